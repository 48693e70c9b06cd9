#include "wavsym/classifier.hpp"

#include "wavsym/sequence.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace wavsym {

namespace {

// Per-scale maxima of weighted coefficients for one tested bound.
struct Acc {
  bool two_scales = true; // product layout: j and j2 both count as scales
  std::map<std::pair<int, int>, std::pair<double, PhaseIndex>> best;

  void add(double w, const PhaseIndex& p) { add(w, p.j, p.j2, p); }
  void add(double w, int j, int j2, const PhaseIndex& p) {
    if (!(w > 0.0)) return;
    auto key = std::make_pair(j, two_scales ? j2 : 0);
    auto it = best.find(key);
    if (it == best.end())
      best.emplace(key, std::make_pair(w, p));
    else if (w > it->second.first)
      it->second = {w, p};
  }

  void finish(DecayEntry& e) const {
    if (best.empty()) return;
    int jlo = 1 << 30, jhi = -1, j2lo = 1 << 30, j2hi = -1;
    for (const auto& [key, v] : best) {
      jlo = std::min(jlo, key.first);
      jhi = std::max(jhi, key.first);
      j2lo = std::min(j2lo, key.second);
      j2hi = std::max(j2hi, key.second);
    }
    double top = 0.0, rest = 0.0, all = 0.0;
    for (const auto& [key, v] : best) {
      if (v.first > all) {
        all = v.first;
        e.witness = v.second;
      }
      const bool is_top = (jhi > jlo && key.first == jhi) || (j2hi > j2lo && key.second == j2hi);
      (is_top ? top : rest) = std::max(is_top ? top : rest, v.first);
    }
    e.constant = all;
    if (jhi == jlo && j2hi == j2lo)
      e.violation_ratio = 1.0;
    else
      e.violation_ratio = rest > 0.0 ? top / rest : inf;
  }
};

void require(const CoefficientTable& t, Layout l, const char* what) {
  if (t.layout != l)
    fail(ErrorCode::layout, std::string(what) + " needs a " + to_string(l) + " table, got " + to_string(t.layout));
}

double scaled_norm(const IntVec& k, int j) { return std::ldexp(euclid(k), -j); }

nlohmann::json witness_json(const std::optional<PhaseIndex>& w) {
  return w ? index_to_json(*w) : nlohmann::json(nullptr);
}

double json_number(double v) { return std::isfinite(v) ? v : (v > 0 ? 1e308 : -1e308); }

} // namespace

double DecayReport::worst_ratio() const {
  double r = 0.0;
  for (const auto& e : entries)
    if (e.in_hypothesis) r = std::max(r, e.violation_ratio);
  return r;
}

const DecayEntry* DecayReport::find(const std::string& branch, int alpha, int beta) const {
  for (const auto& e : entries)
    if (e.branch == branch && e.alpha == alpha && e.beta == beta) return &e;
  return nullptr;
}

nlohmann::json DecayReport::to_json() const {
  nlohmann::json j;
  j["condition"] = condition;
  j["params"] = params;
  j["worst_violation_ratio"] = json_number(worst_ratio());
  auto& arr = j["entries"] = nlohmann::json::array();
  for (const auto& e : entries) {
    nlohmann::json r{{"branch", e.branch},
                     {"alpha", e.alpha},
                     {"beta", e.beta},
                     {"constant", e.constant},
                     {"violation_ratio", json_number(e.violation_ratio)},
                     {"witness", witness_json(e.witness)}};
    if (!e.alpha_multi.empty()) r["alpha_multi"] = std::vector<int>(e.alpha_multi.begin(), e.alpha_multi.end());
    if (!e.beta_multi.empty()) r["beta_multi"] = std::vector<int>(e.beta_multi.begin(), e.beta_multi.end());
    if (condition == "N00" || condition == "KernelDecay") r["N"] = e.order;
    if (condition == "KernelDecay") {
      r["in_hypothesis"] = e.in_hypothesis;
      r["slope"] = e.slope;
    }
    arr.push_back(std::move(r));
  }
  return j;
}

std::string DecayReport::to_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "branch,alpha,beta,N,constant,violation_ratio\n";
  for (const auto& e : entries) {
    os << e.branch << ',' << e.alpha << ',' << e.beta << ',' << e.order << ',' << e.constant << ','
       << json_number(e.violation_ratio) << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------- number arrays

DecayReport check_N00(const CoefficientTable& t, double m, const std::vector<double>& Nlist) {
  require(t, Layout::isotropic, "check_N00");
  DecayReport rep;
  rep.condition = "N00";
  rep.params = {{"m", m}, {"N", Nlist}};
  std::vector<Acc> acc(Nlist.size());
  for (auto& a : acc) a.two_scales = false;
  t.for_each([&](const PhaseIndex& p, cplx v) {
    const double base = std::abs(v) * std::pow(1.0 + scaled_norm(p.k2, p.j), -m);
    for (std::size_t i = 0; i < Nlist.size(); ++i) acc[i].add(base * std::exp2(p.j * Nlist[i]), p);
  });
  for (std::size_t i = 0; i < Nlist.size(); ++i) {
    DecayEntry e;
    e.branch = "N";
    e.order = Nlist[i];
    acc[i].finish(e);
    rep.entries.push_back(std::move(e));
  }
  return rep;
}

DecayReport check_N0delta(const CoefficientTable& t, double m, double delta, int alpha_max, int beta_max) {
  require(t, Layout::product, "check_N0delta");
  if (alpha_max < 0 || beta_max < 0) fail(ErrorCode::config, "alpha_max and beta_max must be >= 0");
  DecayReport rep;
  rep.condition = "N0delta";
  rep.params = {{"m", m}, {"delta", delta}, {"alpha_max", alpha_max}, {"beta_max", beta_max}};
  const double h = t.n / 2.0;
  const int na = alpha_max + 1, nb = beta_max + 1;
  std::vector<Acc> acc(static_cast<std::size_t>(na * nb));
  t.for_each([&](const PhaseIndex& p, cplx v) {
    const double L = 1.0 + scaled_norm(p.k2, p.j2);
    for (int a = 0; a < na; ++a)
      for (int b = 0; b < nb; ++b)
        acc[static_cast<std::size_t>(a * nb + b)].add(
            std::abs(v) * std::exp2((h + a) * p.j + (h + b) * p.j2) * std::pow(L, -(m + delta * a)), p);
  });
  for (int a = 0; a < na; ++a)
    for (int b = 0; b < nb; ++b) {
      DecayEntry e;
      e.branch = "pointwise";
      e.alpha = a;
      e.beta = b;
      acc[static_cast<std::size_t>(a * nb + b)].finish(e);
      rep.entries.push_back(std::move(e));
    }
  return rep;
}

namespace {

std::vector<IntVec> multi_indices(int n, int max_order) {
  std::vector<IntVec> out;
  IntVec lo(static_cast<std::size_t>(n), 0), hi(static_cast<std::size_t>(n), max_order);
  const IndexBox box(lo, hi);
  for (std::size_t t = 0; t < box.size(); ++t) {
    const IntVec v = box.at(t);
    int s = 0;
    for (int x : v) s += x;
    if (s >= 1 && s <= max_order) out.push_back(v);
  }
  std::stable_sort(out.begin(), out.end(), [](const IntVec& a, const IntVec& b) {
    int sa = 0, sb = 0;
    for (int x : a) sa += x;
    for (int x : b) sb += x;
    return sa < sb;
  });
  return out;
}

} // namespace

DecayReport check_Nrhodelta(const CoefficientTable& t, const ClassParams& cp, int alpha_max, int beta_max) {
  require(t, Layout::product, "check_Nrhodelta");
  if (alpha_max < 0 || beta_max < 0) fail(ErrorCode::config, "alpha_max and beta_max must be >= 0");
  if (cp.rho < 0 || cp.delta < 0) fail(ErrorCode::config, "rho and delta must be >= 0");
  DecayReport rep;
  rep.condition = "Nrhodelta";
  rep.params = {{"m", cp.m}, {"rho", cp.rho}, {"delta", cp.delta}, {"alpha_max", alpha_max}, {"beta_max", beta_max}};
  const int n = t.n;
  const double h = n / 2.0;
  const int na = alpha_max + 1, nb = beta_max + 1;

  // (i) pointwise bounds
  std::vector<Acc> nz(static_cast<std::size_t>(na * nb)), zero(static_cast<std::size_t>(na));
  t.for_each([&](const PhaseIndex& p, cplx v) {
    const double av = std::abs(v);
    if (p.eps2 != 0) {
      const double L = 1.0 + scaled_norm(p.k2, p.j2);
      for (int a = 0; a < na; ++a)
        for (int b = 0; b < nb; ++b)
          nz[static_cast<std::size_t>(a * nb + b)].add(
              av * std::exp2((h + a) * p.j + (h + b) * p.j2) * std::pow(L, -(cp.m + cp.delta * a - cp.rho * b)), p);
    } else {
      const double L = 1.0 + euclid(p.k2);
      for (int a = 0; a < na; ++a)
        zero[static_cast<std::size_t>(a)].add(av * std::exp2((h + a) * p.j) * std::pow(L, -(cp.m + cp.delta * a)),
                                              p);
    }
  });

  // (ii) differences along k2 on the eps2 = 0 slice
  const auto betas = multi_indices(n, beta_max);
  std::vector<Acc> diff(static_cast<std::size_t>(na) * betas.size());
  PhaseIndex p;
  p.layout = Layout::product;
  for (const auto& blk : t.blocks) {
    if (blk.eps2 != 0) continue;
    IntVec klo(blk.lo.begin() + n, blk.lo.end()), khi(blk.hi.begin() + n, blk.hi.end());
    IntVec xlo(blk.lo.begin(), blk.lo.begin() + n), xhi(blk.hi.begin(), blk.hi.begin() + n);
    for (std::size_t bi = 0; bi < betas.size(); ++bi)
      for (int a = 0; a < n; ++a)
        if (khi[a] - klo[a] + 1 <= betas[bi][a])
          fail(ErrorCode::window, "k2 window of " + std::to_string(khi[a] - klo[a] + 1) +
                                      " points is too small for difference order " + std::to_string(betas[bi][a]));
    const IndexBox xbox(xlo, xhi);
    const std::size_t slice = IndexBox(klo, khi).size();
    for (std::size_t tx = 0; tx < xbox.size(); ++tx) {
      Sequence s(klo, khi);
      bool any = false;
      for (std::size_t u = 0; u < slice; ++u) {
        s.values[u] = blk.values[tx * slice + u];
        any = any || s.values[u] != cplx{};
      }
      if (!any) continue;
      const IntVec kx = xbox.at(tx);
      p.j = blk.j;
      p.j2 = blk.j2;
      p.eps = blk.eps;
      p.eps2 = 0;
      p.k.assign(kx.begin(), kx.end());
      for (std::size_t bi = 0; bi < betas.size(); ++bi) {
        int bsum = 0;
        for (int x : betas[bi]) bsum += x;
        const Sequence d = difference_op(s, betas[bi], +1, Window::valid);
        const IndexBox dbox = d.box();
        for (std::size_t u = 0; u < dbox.size(); ++u) {
          const double av = std::abs(d.values[u]);
          if (av == 0.0) continue;
          const IntVec kk = dbox.at(u);
          const double L = 1.0 + euclid(kk);
          p.k2.assign(kk.begin(), kk.end());
          for (int a = 0; a < na; ++a)
            diff[static_cast<std::size_t>(a) * betas.size() + bi].add(
                av * std::exp2((h + a) * p.j) * std::pow(L, -(cp.m + cp.delta * a - cp.rho * bsum)), p);
        }
      }
    }
  }

  for (int a = 0; a < na; ++a)
    for (int b = 0; b < nb; ++b) {
      DecayEntry e;
      e.branch = "eps2!=0";
      e.alpha = a;
      e.beta = b;
      nz[static_cast<std::size_t>(a * nb + b)].finish(e);
      rep.entries.push_back(std::move(e));
    }
  for (int a = 0; a < na; ++a) {
    DecayEntry e;
    e.branch = "eps2=0";
    e.alpha = a;
    zero[static_cast<std::size_t>(a)].finish(e);
    rep.entries.push_back(std::move(e));
  }
  for (int a = 0; a < na; ++a)
    for (std::size_t bi = 0; bi < betas.size(); ++bi) {
      DecayEntry e;
      e.branch = "difference";
      e.alpha = a;
      for (int x : betas[bi]) e.beta += x;
      e.beta_multi = betas[bi];
      diff[static_cast<std::size_t>(a) * betas.size() + bi].finish(e);
      rep.entries.push_back(std::move(e));
    }
  return rep;
}

// ---------------------------------------------------------------- Besov

double besov_seminorm(const std::vector<ScaledCoefficient>& c, int dim, double s, double p, double q) {
  if (!(p >= 1.0) || !(q >= 1.0)) fail(ErrorCode::config, "Besov indices need p, q in [1, inf]");
  std::map<int, double> level; // sum |a|^p, or max for p = inf
  for (const auto& e : c) {
    const double a = std::abs(e.value);
    auto& v = level[e.j];
    v = std::isinf(p) ? std::max(v, a) : v + std::pow(a, p);
  }
  double total = 0.0;
  for (const auto& [j, v] : level) {
    const double lp = std::isinf(p) ? v : std::pow(v, 1.0 / p);
    const double w = std::exp2(j * (s + dim / 2.0 - (std::isinf(p) ? 0.0 : dim / p))) * lp;
    total = std::isinf(q) ? std::max(total, w) : total + std::pow(w, q);
  }
  return std::isinf(q) ? total : std::pow(total, 1.0 / q);
}

double besov_seminorm(const CoefficientTable& t, double s, double p, double q) {
  require(t, Layout::isotropic, "besov_seminorm");
  std::vector<ScaledCoefficient> c;
  t.for_each([&](const PhaseIndex& ix, cplx v) { c.push_back({ix.j, v}); });
  return besov_seminorm(c, 2 * t.n, s, p, q);
}

// ---------------------------------------------------------------- modulus

nlohmann::json ModulusSequence::to_json() const {
  nlohmann::json j;
  j["n"] = n;
  j["omega"] = values;
  j["tail_bound"] = tail_bound;
  auto& w = j["witnesses"] = nlohmann::json::array();
  for (std::size_t i = 0; i < values.size(); ++i)
    w.push_back({{"j", i}, {"k", std::vector<int>(witness_k[i].begin(), witness_k[i].end())}, {"e", witness_e[i]}});
  return j;
}

std::string ModulusSequence::plot_data() const {
  std::ostringstream os;
  os.precision(17);
  for (std::size_t i = 0; i < values.size(); ++i)
    os << i << ' ' << (values[i] > 0 ? std::log2(values[i]) : -inf) << '\n';
  return os.str();
}

ModulusSequence omega_modulus(const SymbolField& sigma, int jmax, const OmegaOptions& opt) {
  const int n = sigma.dim();
  if (n < 1 || n > 2) fail(ErrorCode::precondition, "omega_modulus supports n = 1 or 2");
  if (jmax < 0) fail(ErrorCode::config, "jmax must be >= 0");
  if (opt.x_window.size() != static_cast<std::size_t>(n) || opt.xi_window.size() != static_cast<std::size_t>(n))
    fail(ErrorCode::config, "omega_modulus needs n-interval x and xi windows");
  if (!(opt.x_step > 0) || !(opt.xi_step > 0)) fail(ErrorCode::config, "quadrature steps must be positive");

  // xi midpoint grid, or the caller's nodes
  std::vector<std::vector<double>> xi_pts(n), xi_wts(n);
  if (!opt.xi_nodes.empty() && opt.xi_nodes.size() != static_cast<std::size_t>(n))
    fail(ErrorCode::config, "omega_modulus needs one xi node list per axis");
  for (int a = 0; a < n; ++a) {
    const auto [lo, hi] = opt.xi_window[a];
    if (!(hi > lo)) fail(ErrorCode::config, "empty xi window");
    if (!opt.xi_nodes.empty()) {
      for (const auto& [x, w] : opt.xi_nodes[a]) {
        xi_pts[a].push_back(x);
        xi_wts[a].push_back(w);
      }
      continue;
    }
    const int m = std::max(1, static_cast<int>(std::ceil((hi - lo) / opt.xi_step)));
    const double d = (hi - lo) / m;
    for (int i = 0; i < m; ++i) {
      xi_pts[a].push_back(lo + (i + 0.5) * d);
      xi_wts[a].push_back(d);
    }
  }
  std::size_t nxi = 1;
  for (const auto& v : xi_pts) nxi *= v.size();
  auto xi_at = [&](std::size_t t, double* out) {
    double w = 1.0;
    for (int a = n - 1; a >= 0; --a) {
      const std::size_t i = t % xi_pts[a].size();
      out[a] = xi_pts[a][i];
      w *= xi_wts[a][i];
      t /= xi_pts[a].size();
    }
    return w;
  };

  ModulusSequence res;
  res.n = n;
  double peak = 0.0, edge = 0.0;
  const double binom[3][3] = {{1, 0, 0}, {1, 1, 0}, {1, 2, 1}};

  for (int j = 0; j <= jmax; ++j) {
    const double h = std::ldexp(1.0, -j);
    IntVec klo(n), khi(n);
    for (int a = 0; a < n; ++a) {
      const auto [lo, hi] = opt.x_window[a];
      klo[a] = static_cast<int>(std::floor(lo / h));
      khi[a] = std::max(klo[a], static_cast<int>(std::ceil(hi / h)) - 1);
    }
    const IndexBox cubes(klo, khi);
    const int M = std::max(2, static_cast<int>(std::ceil(h / opt.x_step)));
    const double x_cell = std::pow(h / M, n);
    const int ndir = j == 0 ? 1 : 2 * n;
    const std::size_t evals = cubes.size() * static_cast<std::size_t>(std::pow(M, n)) * nxi *
                              static_cast<std::size_t>(ndir * (j == 0 ? 1 : n + 1));
    if (evals > opt.max_evals)
      fail(ErrorCode::size, "omega_modulus at j=" + std::to_string(j) + " needs " + std::to_string(evals) +
                                " evaluations");
    double best = -1.0;
    IntVec best_k = cubes.at(0);
    int best_e = -1;
    for (std::size_t c = 0; c < cubes.size(); ++c) {
      const IntVec k = cubes.at(c);
      std::vector<double> sums(static_cast<std::size_t>(ndir), 0.0);
      const IndexBox sub(IntVec(n, 0), IntVec(n, M - 1));
      double X[4];
      for (std::size_t u = 0; u < sub.size(); ++u) {
        const IntVec s = sub.at(u);
        for (int a = 0; a < n; ++a) X[a] = (k[a] + (s[a] + 0.5) / M) * h;
        for (std::size_t t = 0; t < nxi; ++t) {
          const double wt = xi_at(t, X + n);
          if (j == 0) {
            const double v = std::abs(sigma.at(X));
            sums[0] += v * wt;
            if (v > peak) peak = v;
            continue;
          }
          for (int e = 0; e < ndir; ++e) {
            cplx d = 0.0;
            double Y[4];
            std::copy(X, X + 2 * n, Y);
            for (int i = 0; i <= n; ++i) {
              Y[e] = X[e] + i * h;
              d += ((n - i) % 2 ? -1.0 : 1.0) * binom[n][i] * sigma.at(Y);
            }
            sums[static_cast<std::size_t>(e)] += std::abs(d) * wt;
          }
        }
      }
      for (int e = 0; e < ndir; ++e) {
        const double v = sums[static_cast<std::size_t>(e)] * x_cell;
        if (v > best) {
          best = v;
          best_k = k;
          best_e = j == 0 ? -1 : e;
        }
      }
    }
    res.values.push_back(std::max(best, 0.0));
    res.witness_k.push_back(best_k);
    res.witness_e.push_back(best_e);
  }

  if (opt.declared_tail) {
    res.tail_bound = *opt.declared_tail;
  } else {
    // |sigma| on the faces of the xi window relative to its peak over the x window
    double X[4];
    for (int a = 0; a < n; ++a) {
      const auto [lo, hi] = opt.x_window[a];
      (void)hi;
      X[a] = lo;
    }
    const IndexBox xs(IntVec(n, 0), IntVec(n, 16));
    for (std::size_t u = 0; u < xs.size(); ++u) {
      const IntVec s = xs.at(u);
      for (int a = 0; a < n; ++a) {
        const auto [lo, hi] = opt.x_window[a];
        X[a] = lo + (hi - lo) * s[a] / 16.0;
      }
      for (std::size_t t = 0; t < nxi; ++t) {
        xi_at(t, X + n);
        peak = std::max(peak, std::abs(sigma.at(X)));
        for (int a = 0; a < n; ++a) {
          const double keep = X[n + a];
          for (double b : {opt.xi_window[a].first, opt.xi_window[a].second}) {
            X[n + a] = b;
            edge = std::max(edge, std::abs(sigma.at(X)));
          }
          X[n + a] = keep;
        }
      }
    }
    res.tail_bound = peak > 0 ? edge / peak : 0.0;
    if (res.tail_bound > opt.tail_tol)
      fail(ErrorCode::tail, "symbol is not negligible on the xi-window boundary (relative " +
                                std::to_string(res.tail_bound) + "); widen the window or declare a tail bound");
  }
  return res;
}

// ---------------------------------------------------------------- series

nlohmann::json SeriesVerdict::to_json() const {
  return {{"terms", terms},
          {"partial_sums", partial_sums},
          {"last_ratio", json_number(last_ratio)},
          {"convergent", convergent},
          {"tail_estimate", json_number(tail_estimate)}};
}

SeriesVerdict series_verdict(std::vector<double> terms) {
  SeriesVerdict v;
  double peak = 0.0;
  for (double t : terms) peak = std::max(peak, std::abs(t));
  const double floor = 1e-14 * peak;
  double s = 0.0;
  for (double& t : terms) {
    t = std::abs(t);
    s += t;
    v.partial_sums.push_back(s);
  }
  v.terms = terms;
  const std::size_t J = terms.size();
  auto tv = [&](std::size_t i) { return terms[i] <= floor ? 0.0 : terms[i]; };
  double r = 0.0;
  for (std::size_t i = J >= 3 ? J - 2 : 1; i < J; ++i) {
    const double num = tv(i), den = tv(i - 1);
    const double ri = num == 0.0 ? 0.0 : (den == 0.0 ? inf : num / den);
    r = std::max(r, ri);
  }
  if (J < 2) r = J == 1 && tv(0) > 0 ? inf : 0.0;
  v.last_ratio = r;
  v.convergent = r < 1.0;
  v.tail_estimate = v.convergent ? (J ? tv(J - 1) * r / (1.0 - r) : 0.0) : inf;
  return v;
}

SeriesVerdict check_Bs(const ModulusSequence& w, double s) {
  std::vector<double> terms;
  for (std::size_t j = 0; j < w.values.size(); ++j) terms.push_back(std::exp2((w.n + s) * j) * w.values[j]);
  return series_verdict(std::move(terms));
}

// ---------------------------------------------------------------- exponent fit

nlohmann::json ExponentFit::to_json() const {
  return {{"m", params.m},
          {"rho", params.rho},
          {"delta", params.delta},
          {"alpha_eff", alpha_eff},
          {"beta_eff", beta_eff},
          {"slopes",
           {{"zero_j", slope_j0}, {"zero_L", slope_L0}, {"j", slope_j}, {"j2", slope_j2}, {"L", slope_L}}},
          {"residuals", {{"m", residual_m}, {"eps2=0", residual_zero}, {"eps2!=0", residual_nonzero}}},
          {"samples", samples}};
}

namespace {

struct Lsq {
  Eigen::VectorXd coef;
  double rms = 0.0;
};

Lsq least_squares(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const char* what) {
  if (A.rows() <= A.cols()) fail(ErrorCode::rank, std::string(what) + ": too few samples for the fit");
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
  qr.setThreshold(1e-10);
  if (qr.rank() < A.cols()) fail(ErrorCode::rank, std::string(what) + ": degenerate regression design");
  Lsq r;
  r.coef = qr.solve(b);
  r.rms = std::sqrt((A * r.coef - b).squaredNorm() / static_cast<double>(A.rows()));
  return r;
}

} // namespace

ExponentFit fit_exponents(const CoefficientTable& t, double floor) {
  require(t, Layout::product, "fit_exponents");
  const double cut = floor * t.max_abs();
  struct Row {
    int j, j2;
    bool zero;
    double L, y;
    std::size_t group;
  };
  std::vector<Row> rows;
  std::map<std::pair<int, IntVec>, std::size_t> groups; // x-index of the coarse slice
  std::map<std::pair<int, int>, int> scales;
  t.for_each([&](const PhaseIndex& p, cplx v) {
    const double a = std::abs(v);
    if (!(a > cut) || a == 0.0) return;
    Row r{p.j, p.j2, p.eps2 == 0, 0.0, std::log2(a), 0};
    r.L = std::log2(1.0 + (r.zero ? euclid(p.k2) : scaled_norm(p.k2, p.j2)));
    if (r.zero && p.j == 0) {
      const auto key = std::make_pair(static_cast<int>(p.eps), p.k);
      r.group = groups.emplace(key, groups.size()).first->second;
    }
    scales[{p.j, p.j2}] = 1;
    rows.push_back(r);
  });
  if (scales.size() < 3) fail(ErrorCode::rank, "fit_exponents needs at least 3 populated scale pairs");

  ExponentFit f;
  f.samples = rows.size();
  const double hn = t.n / 2.0;

  // m: within-group slope on the coarse slice (eps2 = 0, j = 0)
  {
    std::vector<double> mean_L(groups.size(), 0.0), mean_y(groups.size(), 0.0), cnt(groups.size(), 0.0);
    for (const auto& r : rows)
      if (r.zero && r.j == 0) {
        mean_L[r.group] += r.L;
        mean_y[r.group] += r.y;
        cnt[r.group] += 1;
      }
    double sxy = 0, sxx = 0, m = 0;
    for (std::size_t g = 0; g < groups.size(); ++g) {
      mean_L[g] /= cnt[g];
      mean_y[g] /= cnt[g];
    }
    for (const auto& r : rows)
      if (r.zero && r.j == 0) {
        sxy += (r.L - mean_L[r.group]) * (r.y - mean_y[r.group]);
        sxx += (r.L - mean_L[r.group]) * (r.L - mean_L[r.group]);
      }
    if (!(sxx > 1e-12)) fail(ErrorCode::rank, "fit_exponents: coarse slice has no spread in k2");
    m = sxy / sxx;
    double ss = 0;
    for (const auto& r : rows)
      if (r.zero && r.j == 0) {
        const double e = r.y - mean_y[r.group] - m * (r.L - mean_L[r.group]);
        ss += e * e;
      }
    std::size_t nm = 0;
    for (const auto& r : rows) nm += r.zero && r.j == 0;
    f.residual_m = std::sqrt(ss / static_cast<double>(nm));
    f.params.m = m;
  }

  // eps2 = 0: log2|a| = c - (n/2 + alpha) j + (m + delta alpha) L
  {
    std::vector<const Row*> rs;
    for (const auto& r : rows)
      if (r.zero) rs.push_back(&r);
    Eigen::MatrixXd A(static_cast<Eigen::Index>(rs.size()), 3);
    Eigen::VectorXd b(static_cast<Eigen::Index>(rs.size()));
    for (std::size_t i = 0; i < rs.size(); ++i) {
      A.row(static_cast<Eigen::Index>(i)) << 1.0, rs[i]->j, rs[i]->L;
      b(static_cast<Eigen::Index>(i)) = rs[i]->y;
    }
    const Lsq r = least_squares(A, b, "fit_exponents (eps2=0 slice)");
    f.slope_j0 = r.coef(1);
    f.slope_L0 = r.coef(2);
    f.residual_zero = r.rms;
    f.alpha_eff = -f.slope_j0 - hn;
    f.params.delta = std::abs(f.alpha_eff) > 1e-9 ? std::max(0.0, (f.slope_L0 - f.params.m) / f.alpha_eff) : 0.0;
  }

  // eps2 != 0: log2|a| = c - (n/2 + alpha) j - (n/2 + beta) j2 + (m + delta alpha - rho beta) L
  {
    std::vector<const Row*> rs;
    for (const auto& r : rows)
      if (!r.zero) rs.push_back(&r);
    Eigen::MatrixXd A(static_cast<Eigen::Index>(rs.size()), 4);
    Eigen::VectorXd b(static_cast<Eigen::Index>(rs.size()));
    for (std::size_t i = 0; i < rs.size(); ++i) {
      A.row(static_cast<Eigen::Index>(i)) << 1.0, rs[i]->j, rs[i]->j2, rs[i]->L;
      b(static_cast<Eigen::Index>(i)) = rs[i]->y;
    }
    const Lsq r = least_squares(A, b, "fit_exponents (eps2!=0 entries)");
    f.slope_j = r.coef(1);
    f.slope_j2 = r.coef(2);
    f.slope_L = r.coef(3);
    f.residual_nonzero = r.rms;
    f.beta_eff = -f.slope_j2 - hn;
    const double alpha_b = -f.slope_j - hn;
    f.params.rho = std::abs(f.beta_eff) > 1e-9
                       ? std::max(0.0, (f.params.m + f.params.delta * alpha_b - f.slope_L) / f.beta_eff)
                       : 0.0;
  }
  return f;
}

} // namespace wavsym
