#include "doctest.h"
#include "wavsym/phase_space.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>

using namespace wavsym;

namespace {

Bounds box_bounds(int jmax, int j2max, IntVec klo, IntVec khi, IntVec k2lo, IntVec k2hi) {
  Bounds b;
  b.jmax = jmax;
  b.j2max = j2max;
  b.klo = klo;
  b.khi = khi;
  b.k2lo = k2lo;
  b.k2hi = k2hi;
  return b;
}

Bounds window_bounds(int jmax, int j2max, double r) {
  Bounds b;
  b.jmax = jmax;
  b.j2max = j2max;
  b.window = {{-r, r}, {-r, r}};
  return b;
}

SymbolField as_closed_form(const SymbolField& s) {
  return SymbolField::closed_form(s.dim(), [s](const double* x, const double* xi) { return s(x, xi); });
}

} // namespace

TEST_CASE("index enumeration") {
  const auto a = enumerate_indices(Layout::product, 1, box_bounds(0, 0, {0}, {0}, {0}, {0}));
  CHECK(a.size() == 4); // father and mother both live at j = 0
  const auto b = enumerate_indices(Layout::product, 1, box_bounds(1, 0, {0}, {1}, {0}, {0}));
  CHECK(b.size() == 12);
  const auto c = enumerate_indices(Layout::isotropic, 1, box_bounds(1, 1, {0}, {0}, {0}, {0}));
  int at1 = 0;
  for (const auto& p : c) {
    CHECK(p.valid());
    if (p.j == 1) {
      ++at1;
      CHECK((p.eps | p.eps2) != 0u);
    }
  }
  CHECK(at1 == 3);
  CHECK(c.size() == 7);
  // scale-major, then eps lexicographic, then k
  const auto d = enumerate_indices(Layout::product, 2, box_bounds(1, 1, {0, 0}, {1, 1}, {0, 0}, {0, 0}));
  for (std::size_t i = 1; i < d.size(); ++i) {
    const auto &p = d[i - 1], &q = d[i];
    CHECK(std::make_pair(p.j, p.j2) <= std::make_pair(q.j, q.j2));
    CHECK(p.valid());
  }
  CHECK(d.front().eps == 0u);
  CHECK(d[1].k == IntVec{0, 1});
  PhaseIndex bad;
  bad.j = 1;
  bad.k = {0};
  bad.k2 = {0};
  CHECK_FALSE(bad.valid());
}

TEST_CASE("analyze a single wavelet") {
  const auto basis = Basis::meyer();
  PhaseIndex p0;
  p0.layout = Layout::product;
  p0.eps = 1;
  p0.eps2 = 1;
  p0.j = 2;
  p0.j2 = 1;
  p0.k = {1};
  p0.k2 = {-2};
  const auto sigma = wavelet_symbol(*basis, p0);
  const Bounds b = window_bounds(3, 2, 2.0);
  const auto t = analyze(sigma, *basis, Layout::product, b);
  CHECK(std::abs(t.get(p0) - 1.0) < 1e-6);
  double worst = 0.0;
  t.for_each([&](const PhaseIndex& p, cplx v) {
    if (!(p == p0)) worst = std::max(worst, std::abs(v));
  });
  CHECK(worst < 1e-6);
  const auto pr = parseval_report(t, sigma);
  CHECK(pr.coefficient_energy == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(pr.symbol_energy == doctest::Approx(1.0));

  // the generic (non-separable) path with a wider truncation radius
  AnalysisOptions opt;
  opt.quad_radius = 64;
  const auto tg = analyze(as_closed_form(sigma), *basis, Layout::product, window_bounds(2, 1, 1.0), opt);
  CHECK(std::abs(tg.get(p0) - 1.0) < 1e-6);
  double worst_g = 0.0;
  tg.for_each([&](const PhaseIndex& p, cplx v) {
    if (!(p == p0)) worst_g = std::max(worst_g, std::abs(v));
  });
  CHECK(worst_g < 1e-6);

  // isotropic wavelet
  PhaseIndex pi0;
  pi0.layout = Layout::isotropic;
  pi0.eps = 0;
  pi0.eps2 = 1;
  pi0.j = pi0.j2 = 1;
  pi0.k = {0};
  pi0.k2 = {3};
  const auto ti = analyze(wavelet_symbol(*basis, pi0), *basis, Layout::isotropic, window_bounds(2, 0, 2.0));
  CHECK(std::abs(ti.get(pi0) - 1.0) < 1e-6);
  CHECK(ti.energy() == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("zero symbol") {
  const auto t = analyze(zero_symbol(1), *Basis::meyer(), Layout::product, window_bounds(2, 2, 3.0));
  CHECK(t.count() == 0);
  const auto pr = parseval_report(t, zero_symbol(1));
  CHECK(pr.coefficient_energy == 0.0);
  CHECK(pr.symbol_energy == 0.0);
  const auto g = synthesize(t, *Basis::meyer(), {Grid1D{-1, 0.5, 5}, Grid1D{-1, 0.5, 5}});
  CHECK(g.max_abs() == 0.0);
}

TEST_CASE("Gaussian Parseval and round trip") {
  const auto basis = Basis::meyer();
  const auto sigma = gaussian_symbol(1);
  double prev = 0.0;
  for (int jmax : {0, 1, 2, 3}) {
    const auto t = analyze(sigma, *basis, Layout::isotropic, window_bounds(jmax, 0, 5.0));
    CHECK(t.energy() >= prev - 1e-12);
    prev = t.energy();
  }
  CHECK(prev == doctest::Approx(pi / 2).epsilon(0.02));
  const auto tp = analyze(sigma, *basis, Layout::product, window_bounds(3, 3, 5.0));
  const auto pr = parseval_report(tp, sigma);
  CHECK(std::abs(pr.gap()) < 0.02 * pr.symbol_energy);
  CHECK(pr.coefficient_energy <= pr.symbol_energy + 1e-9);

  const auto t4 = analyze(sigma, *basis, Layout::isotropic, window_bounds(4, 0, 5.0));
  const Grid1D g{-4.0, 1.0 / 16, 129};
  const auto syn = synthesize(t4, *basis, {g, g});
  double err = 0.0, ref = 0.0;
  for (std::size_t i = 0; i < g.n; ++i)
    for (std::size_t k = 0; k < g.n; ++k) {
      const double x = g.at(i), xi = g.at(k);
      const double v = std::exp(-x * x - xi * xi);
      err += std::norm(syn.values[i * g.n + k] - v);
      ref += v * v;
    }
  CHECK(std::sqrt(err / ref) < 0.05);
  CHECK(std::sqrt(err / ref) < 1e-4); // Gaussian content beyond j = 4 is negligible

  // layout isolation: both partial sums reproduce the same symbol
  const auto syn_p = synthesize(tp, *basis, {g, g});
  double diff = 0.0;
  for (std::size_t t = 0; t < syn.values.size(); ++t) diff = std::max(diff, std::abs(syn.values[t] - syn_p.values[t]));
  CHECK(diff < 1e-6);
}

TEST_CASE("generic and gridded paths agree with the separable path") {
  const auto basis = Basis::meyer();
  const auto sigma = gaussian_symbol(1);
  const Bounds b = window_bounds(2, 2, 4.0);
  const auto ts = analyze(sigma, *basis, Layout::product, b);
  const auto tg = analyze(as_closed_form(sigma), *basis, Layout::product, b);
  double d = 0.0;
  ts.for_each([&](const PhaseIndex& p, cplx v) { d = std::max(d, std::abs(v - tg.get(p))); });
  CHECK(d < 1e-6);

  const Grid1D g{-30.0, 1.0 / 16, 961};
  GridFunction samples({g, g});
  for (std::size_t i = 0; i < g.n; ++i)
    for (std::size_t k = 0; k < g.n; ++k)
      samples.values[i * g.n + k] = std::exp(-g.at(i) * g.at(i) - g.at(k) * g.at(k));
  const auto gridded = SymbolField::gridded(1, samples);
  const auto tq = analyze(gridded, *basis, Layout::product, b);
  double dq = 0.0;
  ts.for_each([&](const PhaseIndex& p, cplx v) { dq = std::max(dq, std::abs(v - tq.get(p))); });
  CHECK(dq < 1e-5);
  GridFunction coarse({Grid1D{-30, 0.25, 241}, Grid1D{-30, 0.25, 241}});
  CHECK_THROWS_AS(analyze(SymbolField::gridded(1, coarse), *basis, Layout::product, b), Error);
}

TEST_CASE("linearity and scaling") {
  const auto basis = Basis::meyer();
  const auto s1 = gaussian_symbol(1);
  const auto s2 = gauss_bessel_symbol(1, -1.0);
  const auto comb = SymbolField::closed_form(1, [&](const double* x, const double* xi) {
    return 2.0 * s1(x, xi) - cplx(0, 3.0) * s2(x, xi);
  });
  const Bounds b = window_bounds(2, 2, 3.0);
  AnalysisOptions opt;
  opt.drop_threshold = 0.0;
  const auto t1 = analyze(as_closed_form(s1), *basis, Layout::product, b, opt);
  const auto t2 = analyze(as_closed_form(s2), *basis, Layout::product, b, opt);
  const auto tc = analyze(comb, *basis, Layout::product, b, opt);
  double d = 0.0;
  tc.for_each([&](const PhaseIndex& p, cplx v) { d = std::max(d, std::abs(v - (2.0 * t1.get(p) - cplx(0, 3.0) * t2.get(p)))); });
  CHECK(d < 1e-12);
}

TEST_CASE("two-dimensional symbols") {
  const auto basis = Basis::meyer();
  const auto sigma = gaussian_symbol(2);
  Bounds b;
  b.jmax = 1;
  b.j2max = 1;
  b.window = {{-3, 3}, {-3, 3}, {-3, 3}, {-3, 3}};
  const auto t = analyze(sigma, *basis, Layout::product, b);
  CHECK(t.energy() == doctest::Approx(pi * pi / 4).epsilon(0.02));
}

TEST_CASE("Daubechies analysis") {
  const auto basis = Basis::daubechies(4);
  PhaseIndex p0;
  p0.eps = 1;
  p0.eps2 = 1;
  p0.j = 1;
  p0.j2 = 0;
  p0.k = {0};
  p0.k2 = {1};
  const auto t = analyze(wavelet_symbol(*basis, p0), *basis, Layout::product, window_bounds(2, 1, 3.0));
  CHECK(std::abs(t.get(p0) - 1.0) < 1e-3);
  CHECK(t.energy() == doctest::Approx(1.0).epsilon(2e-3));
}

TEST_CASE("coefficient table I/O") {
  const auto t = analyze(gaussian_symbol(1), *Basis::meyer(), Layout::product, window_bounds(1, 1, 2.0));
  const auto path = (std::filesystem::temp_directory_path() / "wavsym_table.jsonl").string();
  write_jsonl(t, path);
  const auto back = read_jsonl(path);
  CHECK(back.count() == t.count());
  CHECK(back.layout == t.layout);
  t.for_each([&](const PhaseIndex& p, cplx v) { CHECK(back.get(p) == v); });
  std::remove(path.c_str());
}
