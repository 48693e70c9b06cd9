#include "wavsym/phase_space.hpp"
#include "wavsym/fft.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>

namespace wavsym {

const char* to_string(Layout l) { return l == Layout::isotropic ? "isotropic" : "product"; }

Layout layout_from_string(const std::string& s) {
  if (s == "isotropic") return Layout::isotropic;
  if (s == "product") return Layout::product;
  fail(ErrorCode::config, "unknown layout '" + s + "'");
}

namespace {

unsigned lex_key(unsigned mask, int n) {
  unsigned key = 0;
  for (int a = 0; a < n; ++a)
    if (mask >> a & 1u) key |= 1u << (n - 1 - a);
  return key;
}

// masks in lexicographic order of their bit tuples
std::vector<unsigned> masks_lex(int n) {
  std::vector<unsigned> m(1u << n);
  for (unsigned i = 0; i < m.size(); ++i) m[i] = i;
  std::sort(m.begin(), m.end(), [n](unsigned a, unsigned b) { return lex_key(a, n) < lex_key(b, n); });
  return m;
}

IntVec mask_bits(unsigned mask, int n) {
  IntVec v(n);
  for (int a = 0; a < n; ++a) v[a] = static_cast<int>(mask >> a & 1u);
  return v;
}

unsigned bits_mask(const nlohmann::json& v) {
  unsigned m = 0;
  for (std::size_t a = 0; a < v.size(); ++a)
    if (v[a].get<int>()) m |= 1u << a;
  return m;
}

bool combo_valid(Layout l, int j, int j2, unsigned eps, unsigned eps2) {
  if (l == Layout::isotropic) return j == 0 || (eps | eps2) != 0;
  return (j == 0 || eps != 0) && (j2 == 0 || eps2 != 0);
}

} // namespace

bool PhaseIndex::valid() const {
  if (k.size() != k2.size() || k.empty()) return false;
  if (j < 0 || j2 < 0) return false;
  if (layout == Layout::isotropic && j2 != j) return false;
  const unsigned full = (1u << n()) - 1u;
  if ((eps & ~full) || (eps2 & ~full)) return false;
  return combo_valid(layout, j, j2, eps, eps2);
}

nlohmann::json index_to_json(const PhaseIndex& p) {
  nlohmann::json j;
  j["layout"] = to_string(p.layout);
  const IntVec e1 = mask_bits(p.eps, p.n()), e2 = mask_bits(p.eps2, p.n());
  j["eps"] = std::vector<int>(e1.begin(), e1.end());
  j["j"] = p.j;
  j["k"] = std::vector<int>(p.k.begin(), p.k.end());
  j["eps_p"] = std::vector<int>(e2.begin(), e2.end());
  j["j_p"] = p.j2;
  j["k_p"] = std::vector<int>(p.k2.begin(), p.k2.end());
  return j;
}

PhaseIndex index_from_json(const nlohmann::json& j) {
  PhaseIndex p;
  try {
    p.layout = layout_from_string(j.value("layout", std::string("product")));
    p.eps = bits_mask(j.at("eps"));
    p.eps2 = bits_mask(j.at("eps_p"));
    p.j = j.at("j");
    p.j2 = j.value("j_p", p.j);
    for (const auto& v : j.at("k")) p.k.push_back(v.get<int>());
    for (const auto& v : j.at("k_p")) p.k2.push_back(v.get<int>());
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::config, std::string("bad phase index: ") + e.what());
  }
  if (!p.valid()) fail(ErrorCode::config, "phase index violates its layout constraint");
  return p;
}

// ---------------------------------------------------------------- table

bool block_less(Layout l, int n, const Block& a, const Block& b) {
  if (a.j != b.j) return a.j < b.j;
  if (l == Layout::product) {
    if (a.j2 != b.j2) return a.j2 < b.j2;
    if (a.eps != b.eps) return lex_key(a.eps, n) < lex_key(b.eps, n);
    return lex_key(a.eps2, n) < lex_key(b.eps2, n);
  }
  const unsigned ka = lex_key(a.eps, n) << n | lex_key(a.eps2, n);
  const unsigned kb = lex_key(b.eps, n) << n | lex_key(b.eps2, n);
  return ka < kb;
}

namespace {

IntVec joint(const PhaseIndex& p) {
  IntVec v(p.k.begin(), p.k.end());
  v.insert(v.end(), p.k2.begin(), p.k2.end());
  return v;
}

bool same_group(const Block& b, const PhaseIndex& p) {
  return b.j == p.j && b.j2 == p.j2 && b.eps == p.eps && b.eps2 == p.eps2;
}

} // namespace

cplx CoefficientTable::get(const PhaseIndex& p) const {
  if (p.layout != layout || p.n() != n) return {};
  const IntVec kk = joint(p);
  for (const auto& b : blocks) {
    if (!same_group(b, p)) continue;
    const IndexBox box = b.box();
    if (box.contains(kk)) return b.values[box.flat(kk)];
  }
  return {};
}

void CoefficientTable::set(const PhaseIndex& p, cplx v) {
  if (p.layout != layout) fail(ErrorCode::layout, "index layout differs from table layout");
  if (p.n() != n) fail(ErrorCode::precondition, "index dimension differs from table");
  if (!p.valid()) fail(ErrorCode::precondition, "index violates its layout constraint");
  const IntVec kk = joint(p);
  for (auto& b : blocks) {
    if (!same_group(b, p)) continue;
    const IndexBox box = b.box();
    if (box.contains(kk)) {
      b.values[box.flat(kk)] = v;
      return;
    }
    // grow the box to include kk
    IntVec lo = b.lo, hi = b.hi;
    for (std::size_t a = 0; a < kk.size(); ++a) {
      lo[a] = std::min(lo[a], kk[a]);
      hi[a] = std::max(hi[a], kk[a]);
    }
    Block g{b.j, b.j2, b.eps, b.eps2, lo, hi, {}};
    const IndexBox nb = g.box();
    g.values.assign(nb.size(), cplx{});
    for (std::size_t t = 0; t < b.values.size(); ++t) g.values[nb.flat(box.at(t))] = b.values[t];
    g.values[nb.flat(kk)] = v;
    b = std::move(g);
    return;
  }
  Block b{p.j, p.j2, p.eps, p.eps2, kk, kk, {v}};
  blocks.push_back(std::move(b));
  sort_blocks();
}

void CoefficientTable::sort_blocks() {
  std::stable_sort(blocks.begin(), blocks.end(),
                   [this](const Block& a, const Block& b) { return block_less(layout, n, a, b); });
}

std::size_t CoefficientTable::count() const {
  std::size_t c = 0;
  for (const auto& b : blocks)
    for (const auto& v : b.values) c += (v != cplx{});
  return c;
}

double CoefficientTable::energy() const {
  double e = 0.0;
  for (const auto& b : blocks)
    for (const auto& v : b.values) e += std::norm(v);
  return e;
}

double CoefficientTable::max_abs() const {
  double m = 0.0;
  for (const auto& b : blocks)
    for (const auto& v : b.values) m = std::max(m, std::abs(v));
  return m;
}

int CoefficientTable::max_j() const {
  int m = -1;
  for (const auto& b : blocks)
    for (const auto& v : b.values)
      if (v != cplx{}) {
        m = std::max(m, b.j);
        break;
      }
  return m;
}

int CoefficientTable::max_j2() const {
  int m = -1;
  for (const auto& b : blocks)
    for (const auto& v : b.values)
      if (v != cplx{}) {
        m = std::max(m, b.j2);
        break;
      }
  return m;
}

void CoefficientTable::scale(cplx c) {
  for (auto& b : blocks)
    for (auto& v : b.values) v *= c;
}

// ---------------------------------------------------------------- enumeration

namespace {

std::pair<double, double> effective_support(const Basis& basis) {
  if (basis.family() == Family::meyer) return {0.0, 1.0};
  const int N = basis.spec().order;
  return {1.0 - N, 2.0 * N - 1.0};
}

} // namespace

std::pair<int, int> translation_range(const Basis& basis, const Bounds& b, int axis, int j, bool second) {
  if (second ? !b.k2lo.empty() : !b.klo.empty()) {
    const IntVec& lo = second ? b.k2lo : b.klo;
    const IntVec& hi = second ? b.k2hi : b.khi;
    if (static_cast<std::size_t>(axis) >= lo.size() || hi.size() != lo.size())
      fail(ErrorCode::config, "translation box rank mismatch");
    if (hi[axis] < lo[axis]) fail(ErrorCode::config, "empty translation box");
    return {lo[axis], hi[axis]};
  }
  const std::size_t n = b.window.size() / 2;
  if (b.window.size() % 2 || static_cast<std::size_t>(axis) >= n)
    fail(ErrorCode::config, "bounds need either translation boxes or a 2n-interval window");
  const auto [lo, hi] = b.window[second ? n + axis : axis];
  if (hi < lo) fail(ErrorCode::config, "window interval is empty");
  const auto [slo, shi] = effective_support(basis);
  const double s = std::ldexp(1.0, j);
  return {static_cast<int>(std::floor(s * lo - shi)) - b.margin,
          static_cast<int>(std::ceil(s * hi - slo)) + b.margin};
}

namespace {

struct Group {
  int j, j2;
  unsigned eps, eps2;
};

std::vector<Group> groups(Layout layout, int n, const Bounds& b) {
  if (b.jmax < 0 || b.j2max < 0) fail(ErrorCode::config, "scale bounds must be >= 0");
  std::vector<Group> out;
  const auto masks = masks_lex(n);
  if (layout == Layout::product) {
    for (int j = 0; j <= b.jmax; ++j)
      for (int j2 = 0; j2 <= b.j2max; ++j2)
        for (unsigned e : masks)
          for (unsigned e2 : masks)
            if (combo_valid(layout, j, j2, e, e2)) out.push_back({j, j2, e, e2});
  } else {
    for (int j = 0; j <= b.jmax; ++j)
      for (unsigned e : masks)
        for (unsigned e2 : masks)
          if (combo_valid(layout, j, j, e, e2)) out.push_back({j, j, e, e2});
  }
  return out;
}

} // namespace

std::vector<PhaseIndex> enumerate_indices(Layout layout, int n, const Bounds& bounds, const Basis& basis) {
  std::vector<PhaseIndex> out;
  for (const auto& g : groups(layout, n, bounds)) {
    IntVec lo, hi;
    for (int s = 0; s < 2; ++s)
      for (int a = 0; a < n; ++a) {
        const auto r = translation_range(basis, bounds, a, s ? g.j2 : g.j, s == 1);
        lo.push_back(r.first);
        hi.push_back(r.second);
      }
    const IndexBox box(lo, hi);
    for (std::size_t t = 0; t < box.size(); ++t) {
      const IntVec kk = box.at(t);
      PhaseIndex p;
      p.layout = layout;
      p.j = g.j;
      p.j2 = g.j2;
      p.eps = g.eps;
      p.eps2 = g.eps2;
      p.k.assign(kk.begin(), kk.begin() + n);
      p.k2.assign(kk.begin() + n, kk.end());
      out.push_back(std::move(p));
    }
  }
  return out;
}

std::vector<PhaseIndex> enumerate_indices(Layout layout, int n, const Bounds& bounds) {
  return enumerate_indices(layout, n, bounds, *Basis::meyer());
}

// ---------------------------------------------------------------- wavelet symbols

double wavelet_value(const Basis& basis, const PhaseIndex& p, const double* x, const double* xi) {
  double v = 1.0;
  const int n = p.n();
  for (int a = 0; a < n; ++a) {
    const double s = std::ldexp(1.0, p.j);
    v *= std::sqrt(s) * basis.value(kind_of(p.eps >> a & 1u), s * x[a] - p.k[a]);
    const double s2 = std::ldexp(1.0, p.j2);
    v *= std::sqrt(s2) * basis.value(kind_of(p.eps2 >> a & 1u), s2 * xi[a] - p.k2[a]);
  }
  return v;
}

SymbolField wavelet_symbol(const Basis& basis, const PhaseIndex& p) {
  if (!p.valid()) fail(ErrorCode::precondition, "wavelet_symbol: invalid index");
  const int n = p.n();
  const BasisSpec spec = basis.spec();
  SeparableTerm t;
  for (int s = 0; s < 2; ++s)
    for (int a = 0; a < n; ++a) {
      const int j = s ? p.j2 : p.j;
      const int k = s ? p.k2[a] : p.k[a];
      const Kind e = kind_of((s ? p.eps2 : p.eps) >> a & 1u);
      const double sc = std::ldexp(1.0, j);
      t.factors.push_back([spec, sc, k, e](double u) {
        return cplx(std::sqrt(sc) * Basis::get(spec)->value(e, sc * u - k));
      });
    }
  SymbolField s = SymbolField::separable(n, {t}, "wavelet");
  s.l2_norm_sq = 1.0;
  s.params = {{"basis", basis.name()}, {"index", index_to_json(p)}};
  return s;
}

// ---------------------------------------------------------------- analysis

namespace {

long floor_div(long a, long b) { return a >= 0 ? a / b : -((-a + b - 1) / b); }

// Table samples at spacing 2^-g, m in [mlo, mlo + w.size()).
struct Dict {
  long mlo = 0;
  std::vector<double> w;
};

Dict make_dict(const Basis& basis, Kind e, int g, double radius) {
  const long stride = 1L << (basis.level() - g);
  long mlo = -floor_div(-basis.table_lo(e), stride);
  long mhi = floor_div(basis.table_hi(e), stride);
  if (std::isfinite(radius)) {
    const double c = basis.center(e);
    mlo = std::max(mlo, static_cast<long>(std::floor((c - radius) * std::ldexp(1.0, g))));
    mhi = std::min(mhi, static_cast<long>(std::ceil((c + radius) * std::ldexp(1.0, g))));
  }
  Dict d;
  d.mlo = mlo;
  for (long m = mlo; m <= mhi; ++m) d.w.push_back(basis.lattice(e, m * stride));
  return d;
}

struct AxisPlan {
  int J = 0;
  int gg = 0; // samples per unit of the scaled variable: 2^gg
  int klo = 0, khi = 0;
  long ilo = 0;      // first sample index; u_i = i * h
  std::size_t S = 0; // sample count
  double h = 0.0;
  int K() const { return khi - klo + 1; }
};

AxisPlan plan_axis(int J, int gg, std::pair<int, int> kr, const Dict& d0, const Dict& d1) {
  AxisPlan p;
  p.J = J;
  p.gg = gg;
  p.klo = kr.first;
  p.khi = kr.second;
  p.h = std::ldexp(1.0, -(J + gg));
  const long mlo = std::min(d0.mlo, d1.mlo);
  const long mhi = std::max(d0.mlo + static_cast<long>(d0.w.size()), d1.mlo + static_cast<long>(d1.w.size())) - 1;
  p.ilo = (static_cast<long>(p.klo) << gg) + mlo;
  const long ihi = (static_cast<long>(p.khi) << gg) + mhi;
  p.S = static_cast<std::size_t>(ihi - p.ilo + 1);
  return p;
}

// 1-D coefficients of f along one axis: out[q] = 2^{J/2} h sum_i f(u_i) Phi(2^J u_i - (klo + q)).
std::vector<cplx> coeffs_1d(const std::function<cplx(double)>& f, const AxisPlan& p, const Dict& d) {
  const int g = p.gg;
  std::vector<cplx> fs(p.S);
  for (std::size_t t = 0; t < p.S; ++t) fs[t] = f(static_cast<double>(p.ilo + static_cast<long>(t)) * p.h);
  std::vector<cplx> out(static_cast<std::size_t>(p.K()));
  const long p0 = (static_cast<long>(p.klo) << g) + d.mlo - p.ilo;
  fft::correlate(fs.data(), fs.size(), 1, d.w, p0, std::size_t{1} << g, out.size(), out.data());
  const double amp = std::sqrt(std::ldexp(1.0, p.J)) * p.h;
  for (auto& v : out) v *= amp;
  return out;
}

// Contract one axis of a row-major array against the needed dictionaries.
std::vector<cplx> contract_axis(const std::vector<cplx>& A, std::vector<std::size_t>& dims, std::size_t axis,
                                const AxisPlan& p, const std::vector<const Dict*>& dicts) {
  const int g = p.gg;
  std::size_t outer = 1, inner = 1;
  for (std::size_t a = 0; a < axis; ++a) outer *= dims[a];
  for (std::size_t a = axis + 1; a < dims.size(); ++a) inner *= dims[a];
  const std::size_t K = static_cast<std::size_t>(p.K());
  const std::size_t nd = dicts.size() * K;
  std::vector<cplx> B(outer * nd * inner);
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t in = 0; in < inner; ++in) {
      const cplx* f = A.data() + o * dims[axis] * inner + in;
      for (std::size_t e = 0; e < dicts.size(); ++e) {
        const long p0 = (static_cast<long>(p.klo) << g) + dicts[e]->mlo - p.ilo;
        cplx* out = B.data() + o * nd * inner + e * K * inner + in;
        fft::correlate(f, dims[axis], inner, dicts[e]->w, p0, std::size_t{1} << g, K, out, inner);
      }
    }
  dims[axis] = nd;
  return B;
}

int default_guard(const Basis& b, bool separable) {
  if (b.family() == Family::meyer) return separable ? 3 : 2;
  return separable ? 6 : 4;
}

} // namespace

CoefficientTable analyze(const SymbolField& sigma, const Basis& basis, Layout layout, const Bounds& bounds,
                         const AnalysisOptions& opt) {
  const int n = sigma.dim();
  const int d = 2 * n;
  if (n < 1 || n > 2) fail(ErrorCode::precondition, "analyze supports n = 1 or 2");
  const bool sep = sigma.is_separable();
  const int g = opt.guard_bits >= 0 ? opt.guard_bits : default_guard(basis, sep);
  if (g > basis.level() || g < 0) fail(ErrorCode::config, "guard bits exceed the basis table level");
  const double radius = sep ? opt.sep_radius : opt.quad_radius;
  if (!(radius > 1.0)) fail(ErrorCode::config, "quadrature radius must exceed 1");

  CoefficientTable table(layout, n);
  table.bounds = bounds;
  table.basis = basis.name();
  table.drop_threshold = opt.drop_threshold;
  table.guard_bits = g;
  table.quad_radius = radius;

  if (const GridFunction* grid = sigma.grid()) {
    const int finest = std::max(bounds.jmax, layout == Layout::product ? bounds.j2max : bounds.jmax);
    for (int a = 0; a < d; ++a) {
      const int J = a < n ? bounds.jmax : (layout == Layout::product ? bounds.j2max : bounds.jmax);
      if (std::ldexp(grid->axes[a].h, J) > 0.5)
        fail(ErrorCode::resolution, "symbol grid spacing " + std::to_string(grid->axes[a].h) +
                                        " is coarser than wavelet scale 2^-" + std::to_string(finest));
    }
  }

  double tail = 0.0;
  for (int e = 0; e < 2; ++e) tail = std::max(tail, std::sqrt(basis.tail_energy(static_cast<Kind>(e), radius)));

  // Sampling density per axis and scale.
  const int res_x = opt.symbol_level >= 0 ? opt.symbol_level : bounds.jmax;
  const int res_xi = opt.symbol_level >= 0 ? opt.symbol_level : (layout == Layout::product ? bounds.j2max : bounds.jmax);
  auto density = [&](int a, int J) { return std::max(J, a < n ? res_x : res_xi) - J + g; };
  std::map<std::pair<int, int>, Dict> dicts; // (kind, density)
  for (int a = 0; a < d; ++a)
    for (int J = 0; J <= std::max(bounds.jmax, bounds.j2max); ++J) {
      const int gg = density(a, J);
      if (gg > basis.level())
        fail(ErrorCode::config, "quadrature density 2^" + std::to_string(gg) + " exceeds the basis table level " +
                                    std::to_string(basis.level()));
      for (int e = 0; e < 2; ++e)
        if (!dicts.count({e, gg})) dicts[{e, gg}] = make_dict(basis, static_cast<Kind>(e), gg, radius);
    }
  auto plan = [&](int a, int J) {
    const int gg = density(a, J);
    return plan_axis(J, gg, translation_range(basis, bounds, a % n, J, a >= n), dicts.at({0, gg}), dicts.at({1, gg}));
  };

  const auto gs = groups(layout, n, bounds);
  // One work item per scale tuple; all eps groups of that tuple come out of one contraction.
  std::vector<std::pair<int, int>> scales;
  for (const auto& gr : gs)
    if (scales.empty() || scales.back() != std::make_pair(gr.j, gr.j2)) scales.emplace_back(gr.j, gr.j2);

  // Separable path: cache 1-D coefficient vectors per (term, axis, scale, kind).
  std::map<std::tuple<std::size_t, int, int, int>, std::vector<cplx>> cache;
  if (sep) {
    for (const auto& [j, j2] : scales)
      for (std::size_t r = 0; r < sigma.terms().size(); ++r)
        for (int a = 0; a < d; ++a) {
          const int J = a < n ? j : j2;
          for (int e = 0; e < 2; ++e) {
            const auto key = std::make_tuple(r, a, J, e);
            if (cache.count(key)) continue;
            const AxisPlan p = plan(a, J);
            cache[key] = coeffs_1d(sigma.terms()[r].factors[a], p, dicts.at({e, p.gg}));
          }
        }
  }

  std::vector<std::vector<Block>> results(scales.size());
  std::vector<ScaleQuadrature> quad(scales.size());
  std::exception_ptr err;
  std::mutex err_mutex;

#pragma omp parallel for schedule(dynamic)
  for (std::size_t si = 0; si < scales.size(); ++si) {
    try {
      const auto [j, j2] = scales[si];
      std::vector<AxisPlan> plans(d);
      for (int a = 0; a < d; ++a) plans[a] = plan(a, a < n ? j : j2);
      std::vector<Group> mine;
      for (const auto& gr : gs)
        if (gr.j == j && gr.j2 == j2) mine.push_back(gr);
      // kinds needed per axis
      std::vector<std::vector<int>> kinds(d);
      for (int a = 0; a < d; ++a) {
        bool need[2] = {false, false};
        for (const auto& gr : mine) need[(a < n ? gr.eps >> a : gr.eps2 >> (a - n)) & 1u] = true;
        for (int e = 0; e < 2; ++e)
          if (need[e]) kinds[a].push_back(e);
      }
      IntVec lo(d), hi(d);
      for (int a = 0; a < d; ++a) {
        lo[a] = plans[a].klo;
        hi[a] = plans[a].khi;
      }
      const IndexBox box(lo, hi);
      ScaleQuadrature q;
      q.j = j;
      q.j2 = j2;
      q.spacing = plans[0].h;

      std::vector<cplx> final_arr;
      std::vector<std::size_t> final_dims(d);
      if (!sep) {
        std::size_t total = 1;
        std::vector<std::size_t> dims(d);
        for (int a = 0; a < d; ++a) total *= (dims[a] = plans[a].S);
        if (total > opt.max_samples)
          fail(ErrorCode::size, "analysis block needs " + std::to_string(total) + " samples (cap " +
                                    std::to_string(opt.max_samples) + ")");
        std::vector<cplx> A(total);
        std::vector<std::size_t> st(d, 1);
        for (int a = d - 1; a-- > 0;) st[a] = st[a + 1] * dims[a + 1];
        double X[4];
        double mass = 0.0;
        for (std::size_t t = 0; t < total; ++t) {
          for (int a = 0; a < d; ++a)
            X[a] = static_cast<double>(plans[a].ilo + static_cast<long>((t / st[a]) % dims[a])) * plans[a].h;
          A[t] = sigma.at(X);
          mass += std::norm(A[t]);
        }
        double vol = 1.0;
        for (int a = 0; a < d; ++a) vol *= plans[a].h;
        q.tail_bound = tail * std::sqrt(mass * vol);
        for (int a = d - 1; a >= 0; --a) {
          std::vector<const Dict*> ds;
          for (int e : kinds[a]) ds.push_back(&dicts.at({e, plans[a].gg}));
          A = contract_axis(A, dims, static_cast<std::size_t>(a), plans[a], ds);
        }
        double amp = 1.0;
        for (int a = 0; a < d; ++a) amp *= std::sqrt(std::ldexp(1.0, plans[a].J)) * plans[a].h;
        for (auto& v : A) v *= amp;
        final_arr = std::move(A);
        final_dims = dims;
      }

      std::vector<Block> out;
      for (const auto& gr : mine) {
        Block b{gr.j, gr.j2, gr.eps, gr.eps2, lo, hi, std::vector<cplx>(box.size())};
        int eb[4];
        for (int a = 0; a < d; ++a) eb[a] = static_cast<int>((a < n ? gr.eps >> a : gr.eps2 >> (a - n)) & 1u);
        if (sep) {
          for (std::size_t r = 0; r < sigma.terms().size(); ++r) {
            const cplx c = sigma.terms()[r].coeff;
            const std::vector<cplx>* vec[4];
            for (int a = 0; a < d; ++a) vec[a] = &cache.at(std::make_tuple(r, a, plans[a].J, eb[a]));
            for (std::size_t t = 0; t < box.size(); ++t) {
              std::size_t rem = t;
              cplx v = c;
              for (int a = d - 1; a >= 0; --a) {
                const std::size_t K = static_cast<std::size_t>(plans[a].K());
                v *= (*vec[a])[rem % K];
                rem /= K;
              }
              b.values[t] += v;
            }
          }
        } else {
          std::vector<std::size_t> st(d, 1);
          for (int a = d - 1; a-- > 0;) st[a] = st[a + 1] * final_dims[a + 1];
          std::size_t slot[4];
          for (int a = 0; a < d; ++a) {
            const auto it = std::find(kinds[a].begin(), kinds[a].end(), eb[a]);
            slot[a] = static_cast<std::size_t>(it - kinds[a].begin()) * static_cast<std::size_t>(plans[a].K());
          }
          for (std::size_t t = 0; t < box.size(); ++t) {
            std::size_t rem = t, off = 0;
            for (int a = d - 1; a >= 0; --a) {
              const std::size_t K = static_cast<std::size_t>(plans[a].K());
              off += (slot[a] + rem % K) * st[a];
              rem /= K;
            }
            b.values[t] = final_arr[off];
          }
        }
        out.push_back(std::move(b));
      }
      results[si] = std::move(out);
      quad[si] = q;
    } catch (...) {
      std::lock_guard<std::mutex> lock(err_mutex);
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);

  for (auto& r : results)
    for (auto& b : r) table.blocks.push_back(std::move(b));
  table.sort_blocks();
  table.quadrature = quad;
  const double cut = opt.drop_threshold * table.max_abs();
  for (auto& b : table.blocks)
    for (auto& v : b.values)
      if (std::abs(v) < cut) v = cplx{};
  return table;
}

// ---------------------------------------------------------------- synthesis

namespace {

// out(.., r, ..) = sum_c M(r, c) A(.., c, ..) along axis; M row-major rows x dims[axis]
std::vector<cplx> mode_product(const std::vector<cplx>& A, std::vector<std::size_t>& dims, std::size_t axis,
                               const std::vector<double>& M, std::size_t rows) {
  std::size_t outer = 1, inner = 1;
  for (std::size_t a = 0; a < axis; ++a) outer *= dims[a];
  for (std::size_t a = axis + 1; a < dims.size(); ++a) inner *= dims[a];
  const std::size_t cols = dims[axis];
  std::vector<cplx> B(outer * rows * inner);
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t c = 0; c < cols; ++c) {
      const cplx* src = A.data() + (o * cols + c) * inner;
      bool any = false;
      for (std::size_t in = 0; in < inner && !any; ++in) any = src[in] != cplx{};
      if (!any) continue;
      for (std::size_t r = 0; r < rows; ++r) {
        const double m = M[r * cols + c];
        if (m == 0.0) continue;
        cplx* dst = B.data() + (o * rows + r) * inner;
        for (std::size_t in = 0; in < inner; ++in) dst[in] += m * src[in];
      }
    }
  dims[axis] = rows;
  return B;
}

} // namespace

GridFunction synthesize(const CoefficientTable& table, const Basis& basis, const std::vector<Grid1D>& axes) {
  const int n = table.n;
  const int d = 2 * n;
  if (axes.size() != static_cast<std::size_t>(d)) fail(ErrorCode::precondition, "synthesize: need 2n target axes");
  GridFunction out(axes);
  for (const auto& b : table.blocks) {
    bool any = false;
    for (const auto& v : b.values) any = any || v != cplx{};
    if (!any) continue;
    std::vector<std::size_t> dims(d);
    for (int a = 0; a < d; ++a) dims[a] = static_cast<std::size_t>(b.hi[a] - b.lo[a] + 1);
    std::vector<cplx> A = b.values;
    for (int a = 0; a < d; ++a) {
      const int J = a < n ? b.j : b.j2;
      const Kind e = kind_of((a < n ? b.eps >> a : b.eps2 >> (a - n)) & 1u);
      const double s = std::ldexp(1.0, J), amp = std::sqrt(s);
      const std::size_t K = dims[a];
      std::vector<double> M(axes[a].n * K);
      for (std::size_t r = 0; r < axes[a].n; ++r)
        for (std::size_t c = 0; c < K; ++c)
          M[r * K + c] = amp * basis.value(e, s * axes[a].at(r) - (b.lo[a] + static_cast<int>(c)));
      A = mode_product(A, dims, static_cast<std::size_t>(a), M, axes[a].n);
    }
    for (std::size_t t = 0; t < A.size(); ++t) out.values[t] += A[t];
  }
  return out;
}

ParsevalReport parseval_report(const CoefficientTable& table, const SymbolField& sigma, int level) {
  ParsevalReport r;
  r.coefficient_energy = table.energy();
  if (sigma.l2_norm_sq) {
    r.symbol_energy = *sigma.l2_norm_sq;
  } else {
    Box box = !sigma.box.empty() ? sigma.box : table.bounds.window;
    if (box.size() != static_cast<std::size_t>(2 * sigma.dim()))
      fail(ErrorCode::precondition, "parseval_report: symbol energy needs a box or a window");
    r.symbol_energy = symbol_energy(sigma, box, level);
  }
  return r;
}

// ---------------------------------------------------------------- I/O

nlohmann::json table_header(const CoefficientTable& t) {
  nlohmann::json h;
  h["type"] = "header";
  h["layout"] = to_string(t.layout);
  h["n"] = t.n;
  h["basis"] = t.basis;
  h["jmax"] = t.bounds.jmax;
  h["j_p_max"] = t.bounds.j2max;
  h["margin"] = t.bounds.margin;
  nlohmann::json w = nlohmann::json::array();
  for (const auto& [a, b] : t.bounds.window) w.push_back({a, b});
  h["window"] = w;
  if (!t.bounds.klo.empty()) {
    h["kbox"] = {std::vector<int>(t.bounds.klo.begin(), t.bounds.klo.end()),
                 std::vector<int>(t.bounds.khi.begin(), t.bounds.khi.end())};
  }
  if (!t.bounds.k2lo.empty()) {
    h["kbox_p"] = {std::vector<int>(t.bounds.k2lo.begin(), t.bounds.k2lo.end()),
                   std::vector<int>(t.bounds.k2hi.begin(), t.bounds.k2hi.end())};
  }
  h["drop_threshold"] = t.drop_threshold;
  h["guard_bits"] = t.guard_bits;
  h["quad_radius"] = t.quad_radius;
  nlohmann::json q = nlohmann::json::array();
  for (const auto& s : t.quadrature) q.push_back({{"j", s.j}, {"j_p", s.j2}, {"spacing", s.spacing}, {"tail_bound", s.tail_bound}});
  h["quadrature"] = q;
  h["entries"] = t.count();
  return h;
}

void write_jsonl(const CoefficientTable& t, const std::string& path) {
  std::ofstream os(path);
  if (!os) fail(ErrorCode::io, "cannot write " + path);
  os << table_header(t).dump() << '\n';
  t.for_each([&](const PhaseIndex& p, cplx v) {
    auto j = index_to_json(p);
    j["re"] = v.real();
    j["im"] = v.imag();
    os << j.dump() << '\n';
  });
}

CoefficientTable read_jsonl(const std::string& path) {
  std::ifstream is(path);
  if (!is) fail(ErrorCode::io, "cannot read " + path);
  std::string line;
  if (!std::getline(is, line)) fail(ErrorCode::io, "empty coefficient file " + path);
  CoefficientTable t;
  try {
    const auto h = nlohmann::json::parse(line);
    if (h.value("type", "") != "header") fail(ErrorCode::io, "coefficient file lacks a header record");
    t.layout = layout_from_string(h.at("layout"));
    t.n = h.at("n");
    t.basis = h.value("basis", "meyer");
    t.bounds.jmax = h.value("jmax", 0);
    t.bounds.j2max = h.value("j_p_max", 0);
    t.bounds.margin = h.value("margin", 2);
    for (const auto& w : h.value("window", nlohmann::json::array())) t.bounds.window.emplace_back(w[0], w[1]);
    if (h.contains("kbox")) {
      for (const auto& v : h["kbox"][0]) t.bounds.klo.push_back(v.get<int>());
      for (const auto& v : h["kbox"][1]) t.bounds.khi.push_back(v.get<int>());
    }
    if (h.contains("kbox_p")) {
      for (const auto& v : h["kbox_p"][0]) t.bounds.k2lo.push_back(v.get<int>());
      for (const auto& v : h["kbox_p"][1]) t.bounds.k2hi.push_back(v.get<int>());
    }
    t.drop_threshold = h.value("drop_threshold", 1e-14);
    t.guard_bits = h.value("guard_bits", 0);
    t.quad_radius = h.value("quad_radius", 0.0);
    for (const auto& q : h.value("quadrature", nlohmann::json::array()))
      t.quadrature.push_back({q.at("j"), q.at("j_p"), q.at("tail_bound"), q.at("spacing")});
    // group records by (j, j2, eps, eps2) and build dense blocks
    std::map<std::tuple<int, int, unsigned, unsigned>, std::vector<std::pair<IntVec, cplx>>> groups;
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      const auto r = nlohmann::json::parse(line);
      PhaseIndex p = index_from_json(r);
      if (p.layout != t.layout) fail(ErrorCode::layout, "record layout differs from header");
      groups[{p.j, p.j2, p.eps, p.eps2}].emplace_back(joint(p), cplx(r.at("re"), r.at("im")));
    }
    for (auto& [key, recs] : groups) {
      Block b;
      std::tie(b.j, b.j2, b.eps, b.eps2) = key;
      b.lo = b.hi = recs.front().first;
      for (const auto& [kk, v] : recs)
        for (std::size_t a = 0; a < kk.size(); ++a) {
          b.lo[a] = std::min(b.lo[a], kk[a]);
          b.hi[a] = std::max(b.hi[a], kk[a]);
        }
      const IndexBox box = b.box();
      b.values.assign(box.size(), cplx{});
      for (const auto& [kk, v] : recs) b.values[box.flat(kk)] = v;
      t.blocks.push_back(std::move(b));
    }
    t.sort_blocks();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::io, std::string("malformed coefficient file: ") + e.what());
  }
  return t;
}

void write_csv(const CoefficientTable& t, const std::string& path) {
  std::ofstream os(path);
  if (!os) fail(ErrorCode::io, "cannot write " + path);
  os.precision(17);
  os << "layout,eps,j,k,eps_p,j_p,k_p,re,im\n";
  auto join = [](const IntVec& v) {
    std::string s;
    for (std::size_t a = 0; a < v.size(); ++a) s += (a ? ";" : "") + std::to_string(v[a]);
    return s;
  };
  t.for_each([&](const PhaseIndex& p, cplx v) {
    os << to_string(p.layout) << ',' << join(mask_bits(p.eps, p.n())) << ',' << p.j << ',' << join(p.k) << ','
       << join(mask_bits(p.eps2, p.n())) << ',' << p.j2 << ',' << join(p.k2) << ',' << v.real() << ',' << v.imag()
       << '\n';
  });
}

} // namespace wavsym
