#include "wavsym/continuity.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace wavsym {

namespace {

double dyad(int j) { return std::ldexp(1.0, j); }

Grid1D cover(double lo, double hi, double h) {
  const double a = std::floor(lo / h) * h;
  const auto n = static_cast<std::size_t>(std::ceil((hi - a) / h - 1e-9)) + 1;
  return Grid1D{a, h, n};
}

std::vector<double> points(const Grid1D& g) {
  std::vector<double> v(g.n);
  for (std::size_t i = 0; i < g.n; ++i) v[i] = g.at(i);
  return v;
}

double max_abs_point(const Grid1D& g) { return std::max(std::abs(g.lo), std::abs(g.hi())); }

void check_modulation(const Grid1D& x, const Grid1D& y) {
  const double a = y.h * max_abs_point(x), b = x.h * max_abs_point(y);
  if (a > pi / 2 || b > pi / 2)
    fail(ErrorCode::aliasing, "e^{ixy} undersampled: h_y max|x| = " + std::to_string(a) +
                                  ", h_x max|y| = " + std::to_string(b) + " (limit pi/2)");
}

// Phi_{j,k}(t) for each k; zero outside the window support.
Eigen::MatrixXd dilates(const WindowFn& w, int j, const std::vector<int>& ks, const std::vector<double>& ts) {
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(ts.size()), static_cast<Eigen::Index>(ks.size()));
  const double s = dyad(j), amp = std::sqrt(s);
  for (std::size_t a = 0; a < ks.size(); ++a)
    for (std::size_t i = 0; i < ts.size(); ++i) {
      const double u = s * ts[i] - ks[a];
      if (u >= w.lo && u <= w.hi) A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(a)) = amp * w(u);
    }
  return A;
}

double lsq_slope(const std::vector<double>& x, const std::vector<double>& y, double* intercept, double* residual) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double d = n * sxx - sx * sx;
  const double b = d == 0 ? 0.0 : (n * sxy - sx * sy) / d;
  const double a = (sy - b * sx) / n;
  double r = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) r += std::pow(y[i] - a - b * x[i], 2);
  if (intercept) *intercept = a;
  if (residual) *residual = x.empty() ? 0.0 : std::sqrt(r / n);
  return b;
}

nlohmann::json spec_json(const ModulatedOpSpec& s) { return {{"j", s.j}, {"k", s.k}, {"l", s.l}}; }

} // namespace

// ---------------------------------------------------------------- windows

WindowFn gaussian_window() {
  return WindowFn{"gaussian", [](double t) { return std::exp(-0.5 * t * t); }, -9.0, 9.0};
}

WindowFn zero_window() { return WindowFn{"zero", [](double) { return 0.0; }, -1.0, 1.0}; }

WindowFn wavelet_window(const Basis& basis, Kind kind, bool centred) {
  const auto b = Basis::get(basis.spec());
  double lo = b->support_lo(kind), hi = b->support_hi(kind);
  if (!b->compact()) {
    const double c = b->center(kind);
    int r = 4;
    while (r < 190 && b->tail_energy(kind, r) > 1e-14) ++r;
    lo = c - r;
    hi = c + r;
  }
  const double shift = centred ? 0.5 * (lo + hi) : 0.0;
  std::string name = b->name() + (kind == Kind::father ? "-father" : "-mother");
  if (centred) name += "-centred";
  return WindowFn{name, [b, kind, shift](double t) { return b->value(kind, t + shift); }, lo - shift, hi - shift};
}

// ---------------------------------------------------------------- modulated operators

ModulatedSum single_term(const ModulatedOpSpec& s, cplx c) {
  ModulatedSum m;
  m.j = s.j;
  m.ks = {s.k};
  m.ls = {s.l};
  m.c = Eigen::MatrixXcd::Constant(1, 1, c);
  return m;
}

ModulatedSum box_sum(int j, int kbox, int lbox, cplx a) {
  ModulatedSum m;
  m.j = j;
  for (int k = -kbox; k <= kbox; ++k) m.ks.push_back(k);
  for (int l = -lbox; l <= lbox; ++l) m.ls.push_back(l);
  m.c = Eigen::MatrixXcd::Constant(static_cast<Eigen::Index>(m.ks.size()), static_cast<Eigen::Index>(m.ls.size()), a);
  return m;
}

std::pair<Grid1D, Grid1D> modulated_grids(const WindowPair& w, const ModulatedSum& s, double h) {
  if (!(h > 0)) fail(ErrorCode::config, "grid spacing must be positive");
  auto span = [&](const WindowFn& win, const std::vector<int>& ks) {
    if (ks.empty()) return Grid1D{0.0, h, 1};
    const auto [a, b] = std::minmax_element(ks.begin(), ks.end());
    const double inv = 1.0 / dyad(s.j);
    return cover(inv * (*a + win.lo), inv * (*b + win.hi), h);
  };
  return {span(w.phi1, s.ks), span(w.phi2, s.ls)};
}

Eigen::MatrixXcd modulated_kernel(const WindowPair& w, const ModulatedSum& s, const std::vector<double>& xs,
                                  const std::vector<double>& ys) {
  if (s.c.rows() != static_cast<Eigen::Index>(s.ks.size()) || s.c.cols() != static_cast<Eigen::Index>(s.ls.size()))
    fail(ErrorCode::config, "coefficient matrix does not match the (k, l) lists");
  const Eigen::MatrixXd A = dilates(w.phi1, s.j, s.ks, xs);
  const Eigen::MatrixXd B = dilates(w.phi2, s.j, s.ls, ys);
  Eigen::MatrixXcd K = A.cast<cplx>() * s.c * B.transpose().cast<cplx>();
  for (Eigen::Index q = 0; q < K.cols(); ++q)
    for (Eigen::Index i = 0; i < K.rows(); ++i)
      if (K(i, q) != cplx{}) K(i, q) *= std::polar(1.0, xs[static_cast<std::size_t>(i)] * ys[static_cast<std::size_t>(q)]);
  return K;
}

OperatorMatrix modulated_operator(const WindowPair& w, const ModulatedSum& s, const Grid1D& x, const Grid1D& y) {
  check_modulation(x, y);
  OperatorMatrix m;
  m.in_axes = {y};
  m.out_axes = {x};
  m.M = modulated_kernel(w, s, points(x), points(y)) * y.h;
  return m;
}

OperatorMatrix modulated_operator(const WindowPair& w, const ModulatedOpSpec& s, const Grid1D& x, const Grid1D& y) {
  return modulated_operator(w, single_term(s), x, y);
}

OperatorMatrix modulated_adjoint(const WindowPair& w, const ModulatedOpSpec& s, const Grid1D& x, const Grid1D& y) {
  check_modulation(x, y);
  const std::vector<double> xs = points(x), ys = points(y);
  const Eigen::MatrixXd P2 = dilates(w.phi2, s.j, {s.l}, ys);
  const Eigen::MatrixXd P1 = dilates(w.phi1, s.j, {s.k}, xs);
  OperatorMatrix m;
  m.in_axes = {x};
  m.out_axes = {y};
  m.M.resize(static_cast<Eigen::Index>(y.n), static_cast<Eigen::Index>(x.n));
  for (Eigen::Index v = 0; v < m.M.cols(); ++v)
    for (Eigen::Index u = 0; u < m.M.rows(); ++u)
      m.M(u, v) = P2(u, 0) * P1(v, 0) * x.h * std::polar(1.0, -ys[static_cast<std::size_t>(u)] * xs[static_cast<std::size_t>(v)]);
  return m;
}

NormEstimate operator_norm(const OperatorMatrix& m, double tol) {
  if (m.in_axes.size() != 1 || m.out_axes.size() != 1) fail(ErrorCode::precondition, "operator_norm: 1-D grids only");
  std::vector<Eigen::Index> r, c;
  for (Eigen::Index i = 0; i < m.M.rows(); ++i)
    if (m.M.row(i).squaredNorm() > 0) r.push_back(i);
  for (Eigen::Index i = 0; i < m.M.cols(); ++i)
    if (m.M.col(i).squaredNorm() > 0) c.push_back(i);
  Eigen::MatrixXcd A(static_cast<Eigen::Index>(r.size()), static_cast<Eigen::Index>(c.size()));
  for (std::size_t a = 0; a < r.size(); ++a)
    for (std::size_t b = 0; b < c.size(); ++b)
      A(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = m.M(r[a], c[b]);
  NormEstimate e = estimate_norm(A, tol);
  e.value *= std::sqrt(m.out_axes[0].h / m.in_axes[0].h);
  return e;
}

// ---------------------------------------------------------------- almost orthogonality

nlohmann::json PairBound::to_json() const {
  return {{"a", spec_json(a)},
          {"b", spec_json(b)},
          {"ab_star", ab_star},
          {"a_star_b", a_star_b},
          {"profile_ab_star", shape_ab_star},
          {"profile_a_star_b", shape_a_star_b},
          {"ratio_ab_star", ratio_ab_star},
          {"ratio_a_star_b", ratio_a_star_b}};
}

PairBound cotlar_pair_bounds(const WindowPair& w, const ModulatedOpSpec& a, const ModulatedOpSpec& b, int N0,
                             double h) {
  if (a.j != b.j) fail(ErrorCode::precondition, "cotlar_pair_bounds: both operators need the same scale");
  if (N0 < 0) fail(ErrorCode::config, "N0 must be >= 0");
  ModulatedSum both;
  both.j = a.j;
  both.ks = {a.k, b.k};
  both.ls = {a.l, b.l};
  both.c = Eigen::MatrixXcd::Zero(2, 2);
  const auto [X, Y] = modulated_grids(w, both, h);
  check_modulation(X, Y);
  const std::vector<double> xs = points(X), ys = points(Y);
  const double wgt = std::sqrt(X.h * Y.h);
  const Eigen::MatrixXcd A = wgt * modulated_kernel(w, single_term(a), xs, ys);
  const Eigen::MatrixXcd B = wgt * modulated_kernel(w, single_term(b), xs, ys);

  PairBound r;
  r.a = a;
  r.b = b;
  r.ab_star = estimate_norm(A * B.adjoint()).value;
  r.a_star_b = estimate_norm(A.adjoint() * B).value;
  const double dk = std::abs(a.k - b.k), dl = std::abs(a.l - b.l), q = std::ldexp(1.0, -2 * a.j);
  r.shape_ab_star = std::pow((1 + q * dk) * (1 + dl), -2.0 * N0);
  r.shape_a_star_b = std::pow((1 + dk) * (1 + q * dl), -2.0 * N0);
  return r;
}

double CotlarFit::worst_ratio() const {
  double w = 0.0;
  for (const auto& p : pairs) w = std::max({w, p.ratio_ab_star, p.ratio_a_star_b});
  return w;
}

nlohmann::json CotlarFit::to_json() const {
  nlohmann::json j{{"N0", N0}, {"C", C}, {"worst_ratio", worst_ratio()}};
  auto& ps = j["pairs"] = nlohmann::json::array();
  for (const auto& p : pairs) ps.push_back(p.to_json());
  return j;
}

std::vector<PairBound> cotlar_batch(const WindowPair& w, const ModulatedOpSpec& base, const std::vector<int>& offsets,
                                    int N0, double h) {
  const int m = static_cast<int>(offsets.size());
  std::vector<PairBound> out(static_cast<std::size_t>(m * m));
#pragma omp parallel for schedule(dynamic)
  for (int t = 0; t < m * m; ++t) {
    ModulatedOpSpec b = base;
    b.k += offsets[static_cast<std::size_t>(t / m)];
    b.l += offsets[static_cast<std::size_t>(t % m)];
    out[static_cast<std::size_t>(t)] = cotlar_pair_bounds(w, base, b, N0, h);
  }
  return out;
}

void apply_fit(const CotlarFit& fit, std::vector<PairBound>& pairs) {
  for (auto& p : pairs) {
    p.ratio_ab_star = fit.C > 0 ? p.ab_star / (fit.C * p.shape_ab_star) : (p.ab_star > 0 ? inf : 0.0);
    p.ratio_a_star_b = fit.C > 0 ? p.a_star_b / (fit.C * p.shape_a_star_b) : (p.a_star_b > 0 ? inf : 0.0);
  }
}

CotlarFit fit_cotlar(std::vector<PairBound> pairs, int N0) {
  CotlarFit f;
  f.N0 = N0;
  for (const auto& p : pairs) f.C = std::max({f.C, p.ab_star / p.shape_ab_star, p.a_star_b / p.shape_a_star_b});
  apply_fit(f, pairs);
  f.pairs = std::move(pairs);
  return f;
}

nlohmann::json AssembleResult::to_json() const {
  return {{"j", j},   {"a", {a.real(), a.imag()}}, {"kbox", kbox},           {"lbox", lbox},
          {"rows", rows}, {"cols", cols},           {"norm", norm.to_json()}, {"ratio_4jn", ratio_4jn}};
}

AssembleResult cotlar_assemble(const WindowPair& w, int j, cplx a, int kbox, int lbox, double h,
                               std::size_t max_points) {
  if (j < 0) fail(ErrorCode::config, "scale j must be >= 0");
  AssembleResult r;
  r.j = j;
  r.a = a;
  r.kbox = kbox;
  r.lbox = lbox;
  if (kbox < 0 || lbox < 0 || a == cplx{}) {
    r.norm.method = "empty";
    return r;
  }
  const ModulatedSum s = box_sum(j, kbox, lbox, a);
  const auto [X, Y] = modulated_grids(w, s, h);
  if (X.n > max_points || Y.n > max_points)
    fail(ErrorCode::size, "cotlar_assemble: grid of " + std::to_string(X.n) + " x " + std::to_string(Y.n) +
                              " points exceeds " + std::to_string(max_points));
  const OperatorMatrix m = modulated_operator(w, s, X, Y);
  r.rows = X.n;
  r.cols = Y.n;
  r.norm = operator_norm(m);
  r.ratio_4jn = r.norm.value / std::ldexp(1.0, 2 * j);
  return r;
}

nlohmann::json ScalingStudy::to_json() const {
  nlohmann::json j{{"slope", slope},
                   {"intercept", intercept},
                   {"residual", residual},
                   {"step_ratios", step_ratios},
                   {"constants", constants}};
  auto& l = j["levels"] = nlohmann::json::array();
  for (const auto& r : levels) l.push_back(r.to_json());
  return j;
}

std::string ScalingStudy::plot_data() const {
  std::ostringstream os;
  os.precision(17);
  for (const auto& r : levels) os << r.j << ' ' << std::log2(r.norm.value) << '\n';
  return os.str();
}

ScalingStudy cotlar_scaling(const WindowPair& w, const std::vector<int>& js, cplx a, double h) {
  ScalingStudy st;
  st.levels.resize(js.size());
  for (std::size_t i = 0; i < js.size(); ++i) {
    const int box = 1 << (2 * js[i] + 1);
    st.levels[i] = cotlar_assemble(w, js[i], a, box, box, h);
  }
  std::vector<double> x, y;
  for (const auto& r : st.levels) {
    x.push_back(r.j);
    y.push_back(std::log2(r.norm.value));
    st.constants.push_back(r.ratio_4jn);
  }
  for (std::size_t i = 1; i < st.levels.size(); ++i)
    st.step_ratios.push_back(st.levels[i].norm.value / st.levels[i - 1].norm.value);
  st.slope = lsq_slope(x, y, &st.intercept, &st.residual);
  return st;
}

// ---------------------------------------------------------------- Schur test

nlohmann::json SchurReport::to_json() const {
  return {{"j", j},
          {"eps", eps},
          {"eps2", eps2},
          {"column_sup", column_sup},
          {"row_sup", row_sup},
          {"coefficient_sum", coefficient_sum},
          {"constant", constant},
          {"predicted", predicted},
          {"ratio_column", ratio_column},
          {"ratio_row", ratio_row}};
}

SchurReport schur_bounds(const CoefficientTable& t, const Basis& basis, int j, unsigned eps, unsigned eps2,
                         int resolution) {
  if (t.layout != Layout::isotropic) fail(ErrorCode::layout, "schur_bounds needs an isotropic table");
  if (t.n != 1) fail(ErrorCode::precondition, "schur_bounds is one-dimensional");
  if (resolution < 2) fail(ErrorCode::config, "resolution must be >= 2");
  const Kind kx = kind_of(static_cast<int>(eps & 1u)), kxi = kind_of(static_cast<int>(eps2 & 1u));

  // hat Phi^eps2 mass inside the window used for z
  const double B = basis.family() == Family::meyer ? basis.band(kxi) : 64.0;
  double inner = 0.0, outer = 0.0;
  const double dxi = 1.0 / 256;
  for (double xi = -8 * B + 0.5 * dxi; xi < 8 * B; xi += dxi) (std::abs(xi) <= B ? inner : outer) += std::abs(basis.fourier(kxi, xi)) * dxi;
  if (outer > 1e-6 * inner)
    fail(ErrorCode::coverage, "schur_bounds: hat Phi carries " + std::to_string(outer / inner) +
                                  " of its L1 mass beyond |xi| = " + std::to_string(B));

  SchurReport r;
  r.j = j;
  r.eps = eps;
  r.eps2 = eps2;
  r.constant = basis.periodized_sup(kx) * inner / (2 * pi);

  std::map<int, std::vector<std::pair<int, cplx>>> rows; // k -> (l, a)
  t.for_each([&](const PhaseIndex& p, cplx v) {
    if (p.j == j && p.eps == eps && p.eps2 == eps2) rows[p.k[0]].emplace_back(p.k2[0], v);
  });
  for (const auto& [k, ls] : rows) {
    double s = 0.0;
    for (const auto& e : ls) s += std::abs(e.second);
    r.coefficient_sum = std::max(r.coefficient_sum, s);
  }
  const double sj = dyad(j);
  r.predicted = r.constant * sj * r.coefficient_sum;
  if (rows.empty()) return r;

  const WindowFn win = wavelet_window(basis, kx);
  const double h = 1.0 / (sj * resolution);
  const Grid1D X = cover((rows.begin()->first + win.lo) / sj, (rows.rbegin()->first + win.hi) / sj, h);
  const long Z = static_cast<long>(std::ceil(sj * B / h));
  const auto nz = static_cast<std::size_t>(2 * Z + 1);
  const std::size_t ny = X.n + 2 * static_cast<std::size_t>(Z);
  if (static_cast<double>(X.n) * static_cast<double>(ny) * static_cast<double>(rows.size()) > 4e9)
    fail(ErrorCode::size, "schur_bounds: quadrature too large");

  // W_k(z) = sum_l a hat Phi(-2^-j z) e^{i 2^-j l z}; P_k(x) = Phi(2^j x - k)
  std::vector<std::vector<cplx>> W;
  std::vector<std::vector<double>> P;
  for (const auto& [k, ls] : rows) {
    std::vector<cplx> w(nz);
    for (std::size_t m = 0; m < nz; ++m) {
      const double z = (static_cast<double>(m) - static_cast<double>(Z)) * h;
      const cplx ph = basis.fourier(kxi, -z / sj);
      if (ph == cplx{}) continue;
      cplx acc{};
      for (const auto& [l, a] : ls) acc += a * std::polar(1.0, l * z / sj);
      w[m] = ph * acc / (2 * pi);
    }
    W.push_back(std::move(w));
    std::vector<double> p(X.n);
    for (std::size_t i = 0; i < X.n; ++i) {
      const double u = sj * X.at(i) - k;
      p[i] = (u >= win.lo && u <= win.hi) ? basis.value(kx, u) : 0.0;
    }
    P.push_back(std::move(p));
  }
  // y_q = X.lo - Z h + q h, so x_i - y_q = (i - q + Z) h
  std::vector<double> col(ny, 0.0);
  for (std::size_t i = 0; i < X.n; ++i) {
    double row = 0.0;
    for (std::size_t q = i; q < i + nz; ++q) {
      const std::size_t m = i + 2 * static_cast<std::size_t>(Z) - q;
      cplx v{};
      for (std::size_t a = 0; a < P.size(); ++a)
        if (P[a][i] != 0.0) v += P[a][i] * W[a][m];
      const double av = std::abs(v) * h;
      row += av;
      col[q] += av;
    }
    r.row_sup = std::max(r.row_sup, row);
  }
  r.column_sup = *std::max_element(col.begin(), col.end());
  if (r.predicted > 0) {
    r.ratio_column = r.column_sup / r.predicted;
    r.ratio_row = r.row_sup / r.predicted;
  }
  return r;
}

// ---------------------------------------------------------------- sharp examples

int support_exponent(const WindowFn& w) {
  int M = 0;
  while (std::ldexp(1.0, M) < w.radius()) ++M;
  return M;
}

namespace {

struct L2Construction {
  WindowFn phi;
  int M = 0, L = 0;
  std::vector<int> ks, ls;
};

L2Construction l2_construction(int j, const SharpL2Options& opt) {
  if (j < 0) fail(ErrorCode::config, "scale j must be >= 0");
  L2Construction c;
  c.phi = wavelet_window(*Basis::daubechies(opt.order), Kind::mother, true);
  c.M = support_exponent(c.phi);
  c.L = 1 << (c.M + 2);
  const double q = std::ldexp(1.0, 2 * j);
  for (int k = 0; k <= opt.C1 * q; k += c.L) {
    c.ks.push_back(k);
    if (k) c.ks.insert(c.ks.begin(), -k);
  }
  for (int l = 0; l <= opt.C2 * q; l += c.L) {
    c.ls.push_back(l);
    if (l) c.ls.insert(c.ls.begin(), -l);
  }
  return c;
}

cplx l2_coefficient(int j, int k, int l) { return std::polar(1.0, -std::ldexp(1.0, -2 * j) * k * l); }

} // namespace

nlohmann::json SharpL2Result::to_json() const {
  return {{"j", j},
          {"M", M},
          {"lattice", lattice},
          {"entries", table.count()},
          {"rows", rows},
          {"cols", cols},
          {"f_norm", f_norm},
          {"rayleigh", rayleigh},
          {"symbol_quotient", symbol_quotient},
          {"norm", norm.to_json()},
          {"besov", besov},
          {"besov_expected", besov_expected}};
}

SharpL2Result sharp_l2_example(int j, const SharpL2Options& opt) {
  const L2Construction c = l2_construction(j, opt);
  SharpL2Result r;
  r.j = j;
  r.M = c.M;
  r.lattice = c.L;

  ModulatedSum s;
  s.j = j;
  s.ks = c.ks;
  s.ls = c.ls;
  s.c.resize(static_cast<Eigen::Index>(c.ks.size()), static_cast<Eigen::Index>(c.ls.size()));
  r.table = CoefficientTable(Layout::isotropic, 1);
  r.table.basis = c.phi.name;
  for (std::size_t a = 0; a < c.ks.size(); ++a)
    for (std::size_t b = 0; b < c.ls.size(); ++b) {
      const cplx v = l2_coefficient(j, c.ks[a], c.ls[b]);
      s.c(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = v;
      PhaseIndex p;
      p.layout = Layout::isotropic;
      p.eps = p.eps2 = 1;
      p.j = p.j2 = j;
      p.k = {c.ks[a]};
      p.k2 = {c.ls[b]};
      r.table.set(p, v);
    }
  r.table.sort_blocks();

  const WindowPair w{c.phi, c.phi};
  const auto [X, Y] = modulated_grids(w, s, opt.h);
  check_modulation(X, Y);
  // keep only samples inside some window support
  auto active = [&](const Grid1D& g, const std::vector<int>& ks) {
    std::vector<double> v;
    const double sj = dyad(j);
    for (std::size_t i = 0; i < g.n; ++i) {
      const double u = sj * g.at(i);
      for (int k : ks)
        if (u - k > c.phi.lo && u - k < c.phi.hi) {
          v.push_back(g.at(i));
          break;
        }
    }
    return v;
  };
  const std::vector<double> xs = active(X, c.ks), ys = active(Y, c.ls);
  r.rows = xs.size();
  r.cols = ys.size();
  if (r.rows > opt.max_points || r.cols > opt.max_points)
    fail(ErrorCode::size, "sharp_l2_example: " + std::to_string(r.rows) + " x " + std::to_string(r.cols) +
                              " active samples exceed " + std::to_string(opt.max_points));
  const Eigen::MatrixXcd K = modulated_kernel(w, s, xs, ys);

  // f_j = sum_{l in tau_j} 2^-j Phi_{j,l}
  const Eigen::MatrixXd F = dilates(c.phi, j, c.ls, ys);
  const Eigen::VectorXcd f = (F * Eigen::VectorXd::Constant(F.cols(), std::ldexp(1.0, -j))).cast<cplx>();
  const Eigen::VectorXcd Tf = K * f * opt.h;
  r.f_norm = std::sqrt(opt.h) * f.norm();
  r.rayleigh = r.f_norm > 0 ? std::sqrt(opt.h) * Tf.norm() / r.f_norm : 0.0;
  r.symbol_quotient = r.rayleigh / std::sqrt(2 * pi);
  r.norm = estimate_norm(opt.h * K);
  r.besov = besov_seminorm(r.table, opt.s, inf, inf);
  r.besov_expected = std::exp2(j * (opt.s + 1));
  return r;
}

SymbolField sharp_l2_symbol(int jmax, double s0, const SharpL2Options& opt) {
  std::vector<L2Construction> cs;
  for (int j = 0; j <= jmax; ++j) cs.push_back(l2_construction(j, opt));
  auto f = [cs, s0](const double* x, const double* xi) {
    cplx v{};
    for (std::size_t j = 0; j < cs.size(); ++j) {
      const auto& c = cs[j];
      const double sj = dyad(static_cast<int>(j));
      const double u = sj * x[0], t = sj * xi[0];
      const int k = c.L * static_cast<int>(std::lround(u / c.L));
      const int l = c.L * static_cast<int>(std::lround(t / c.L));
      if (std::abs(k) > c.ks.back() || std::abs(l) > c.ls.back()) continue;
      if (u - k <= c.phi.lo || u - k >= c.phi.hi || t - l <= c.phi.lo || t - l >= c.phi.hi) continue;
      v += std::exp2(-(s0 + 1) * static_cast<double>(j)) * sj * l2_coefficient(static_cast<int>(j), k, l) *
           c.phi(u - k) * c.phi(t - l);
    }
    return v;
  };
  SymbolField s = SymbolField::closed_form(1, f, "sharp_l2");
  s.params = {{"jmax", jmax}, {"s0", s0}, {"order", opt.order}, {"C1", opt.C1}, {"C2", opt.C2}};
  const double r = cs.back().phi.radius(), q = std::ldexp(1.0, 2 * jmax);
  const double Rx = (opt.C1 * q + r) / dyad(jmax), Rxi = (opt.C2 * q + r) / dyad(jmax);
  s.box = {{-Rx, Rx}, {-Rxi, Rxi}};
  return s;
}

CoefficientTable sharp_l2_table(int jmax, double s0, const SharpL2Options& opt) {
  CoefficientTable t(Layout::isotropic, 1);
  for (int j = 0; j <= jmax; ++j) {
    const L2Construction c = l2_construction(j, opt);
    t.basis = c.phi.name;
    const double w = std::exp2(-(s0 + 1) * j);
    for (int k : c.ks)
      for (int l : c.ls) {
        PhaseIndex p;
        p.layout = Layout::isotropic;
        p.eps = p.eps2 = 1;
        p.j = p.j2 = j;
        p.k = {k};
        p.k2 = {l};
        t.set(p, w * l2_coefficient(j, k, l));
      }
  }
  t.sort_blocks();
  return t;
}

nlohmann::json SharpLp::to_json() const {
  return {{"M", M},
          {"lattice", lattice},
          {"scales", scales},
          {"entries", table.count()},
          {"omega_x_step", omega.x_step},
          {"omega_xi_step", omega.xi_step},
          {"omega_xi_window", {omega.xi_window[0].first, omega.xi_window[0].second}}};
}

SharpLp sharp_lp_example(int jmax, const SharpLpOptions& opt) {
  if (jmax < 0) fail(ErrorCode::config, "jmax must be >= 0");
  const auto db = Basis::daubechies(opt.order);
  const auto meyer = Basis::meyer();
  SharpLp r;
  const WindowFn phi1 = wavelet_window(*db, Kind::mother);
  r.M = support_exponent(phi1);
  r.lattice = 1 << (r.M + 2);
  for (int i = 0; i <= jmax; ++i) r.scales.push_back((r.M + 2) * i);
  const int Jtop = r.scales.back();
  if (Jtop > 20) fail(ErrorCode::size, "sharp_lp_example: finest scale 2^-" + std::to_string(Jtop) + " is beyond the grid budget");

  const int L = r.lattice;
  const double lo = phi1.lo, hi = phi1.hi;
  auto f = [db, meyer, scales = r.scales, L, lo, hi](const double* x, const double* xi) {
    cplx v{};
    for (int J : scales) {
      if (J == 0) continue;
      const double u = std::ldexp(x[0], J);
      const double k = L * std::ceil((u - hi) / L);
      if (u - k < lo) continue;
      const double b = meyer->value(Kind::mother, std::ldexp(xi[0], J));
      if (b == 0.0) continue;
      v += static_cast<double>(J) * J * db->value(Kind::mother, u - k) * b;
    }
    return v;
  };
  r.symbol = SymbolField::closed_form(1, f, "sharp_lp");
  r.symbol.params = {{"jmax", jmax}, {"order", opt.order}, {"M", r.M}};

  r.table = CoefficientTable(Layout::isotropic, 1);
  r.table.basis = db->name() + "/meyer";
  for (int J : r.scales) {
    if (J == 0) continue;
    for (int k = 0; k < (1 << J); k += L) {
      PhaseIndex p;
      p.layout = Layout::isotropic;
      p.eps = p.eps2 = 1;
      p.j = p.j2 = J;
      p.k = {k};
      p.k2 = {0};
      r.table.set(p, static_cast<double>(J) * J * std::ldexp(1.0, -J));
    }
  }
  r.table.sort_blocks();

  // one x period; xi out to |2^J xi| = 24 on each scale, nested midpoint rules with
  // spacing 2^-(J+2) on the band owned by scale J
  const int J1 = jmax == 0 ? 0 : r.scales[1];
  const double R = std::ldexp(24.0, -J1);
  r.symbol.box = {{0.0, 1.0}, {-R, R}};
  r.omega.x_window = {{0.0, 1.0}};
  r.omega.xi_window = {{-R, R}};
  r.omega.x_step = std::ldexp(1.0, -(Jtop + 1));
  r.omega.xi_step = std::ldexp(1.0, -(Jtop + 2));
  std::vector<std::pair<double, double>> nodes;
  double outer = R;
  for (std::size_t i = 1; i < r.scales.size(); ++i) {
    const int J = r.scales[i];
    const double inner = i + 1 < r.scales.size() ? std::ldexp(24.0, -r.scales[i + 1]) : 0.0;
    const double d = std::ldexp(1.0, -(J + 2));
    const int m = static_cast<int>(std::ceil((outer - inner) / d));
    const double dd = (outer - inner) / m;
    for (int q = 0; q < m; ++q) {
      const double x = inner + (q + 0.5) * dd;
      nodes.emplace_back(x, dd);
      nodes.emplace_back(-x, dd);
    }
    outer = inner;
  }
  if (!nodes.empty()) {
    std::sort(nodes.begin(), nodes.end());
    r.omega.xi_nodes = {nodes};
  }
  return r;
}

// ---------------------------------------------------------------- series conditions

nlohmann::json SharpLpTrend::to_json() const {
  return {{"s", s}, {"total_dyadic", total_dyadic}, {"total_weighted", total_weighted}, {"coeff_dyadic", coeff_dyadic.to_json()}, {"coeff_weighted", coeff_weighted.to_json()}};
}

SharpLpTrend sharp_lp_trend(int jmax, double s, const SharpLpOptions& opt) {
  if (jmax < 1) fail(ErrorCode::config, "trend needs jmax >= 1");
  SharpLpTrend r;
  r.s = s;
  std::vector<double> d_dyadic, d_weighted;
  for (int i = 0; i <= jmax; ++i) {
    const SharpLp lp = sharp_lp_example(i, opt);
    std::map<int, std::map<int, double>> rows;
    lp.table.for_each([&](const PhaseIndex& p, cplx v) { rows[p.j][p.k[0]] += std::abs(v); });
    double a = 0.0, b = 0.0;
    for (const auto& [j, ks] : rows) {
      double sup = 0.0;
      for (const auto& e : ks) sup = std::max(sup, e.second);
      a += dyad(j) * sup;
      b += std::exp2(s * j) * sup;
    }
    r.total_dyadic.push_back(a);
    r.total_weighted.push_back(b);
    if (i > 0) {
      d_dyadic.push_back(a - r.total_dyadic[static_cast<std::size_t>(i - 1)]);
      d_weighted.push_back(b - r.total_weighted[static_cast<std::size_t>(i - 1)]);
    }
  }
  r.coeff_dyadic = series_verdict(d_dyadic);
  r.coeff_weighted = series_verdict(d_weighted);
  return r;
}

nlohmann::json Lemma6Report::to_json() const {
  return {{"s", s},
          {"J", J},
          {"scales", scales},
          {"coeff_dyadic", coeff_dyadic.to_json()},
          {"modulus", modulus.to_json()},
          {"coeff_weighted", coeff_weighted.to_json()},
          {"modulus_sampled", modulus_sampled.to_json()},
          {"omega", omega.to_json()},
          {"agree", agree()}};
}

Lemma6Report lemma6_check(const CoefficientTable& t, const SymbolField& sigma, double s, const Lemma6Options& opt) {
  if (t.layout != Layout::isotropic) fail(ErrorCode::layout, "lemma6_check needs an isotropic table");
  if (t.n != 1 || sigma.dim() != 1) fail(ErrorCode::precondition, "lemma6_check is one-dimensional");
  if (opt.extra_scales < 0) fail(ErrorCode::config, "extra_scales must be >= 0");
  Lemma6Report r;
  r.s = s;
  // (j, eps, eps2) -> k -> sum_l |a|
  std::map<std::tuple<int, unsigned, unsigned>, std::map<int, double>> sums;
  t.for_each([&](const PhaseIndex& p, cplx v) { sums[{p.j, p.eps, p.eps2}][p.k[0]] += std::abs(v); });
  std::map<int, double> per_scale;
  for (const auto& [key, ks] : sums) {
    double sup = 0.0;
    for (const auto& e : ks) sup = std::max(sup, e.second);
    if (sup > 0) per_scale[std::get<0>(key)] += sup;
  }
  for (const auto& e : per_scale) r.scales.push_back(e.first);
  const int top = r.scales.empty() ? 0 : r.scales.back();
  r.J = opt.exact_table ? top + opt.extra_scales : std::max(top, t.bounds.jmax);

  std::vector<double> t_dyadic(static_cast<std::size_t>(r.J + 1), 0.0), t_weighted = t_dyadic;
  for (const auto& [j, v] : per_scale) {
    t_dyadic[static_cast<std::size_t>(j)] = dyad(j) * v;
    t_weighted[static_cast<std::size_t>(j)] = std::exp2(s * j) * v;
  }
  r.coeff_dyadic = series_verdict(t_dyadic);
  r.coeff_weighted = series_verdict(t_weighted);
  r.omega = omega_modulus(sigma, r.J, opt.omega);
  r.modulus = check_Bs(r.omega, s);
  std::vector<double> sampled;
  for (int j : r.scales) sampled.push_back(std::exp2((1 + s) * j) * r.omega.values[static_cast<std::size_t>(j)]);
  r.modulus_sampled = series_verdict(sampled);
  return r;
}

} // namespace wavsym
