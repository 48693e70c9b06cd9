#include "doctest.h"
#include "wavsym/classifier.hpp"

#include <cmath>

using namespace wavsym;

namespace {

PhaseIndex product_index(unsigned eps, int j, int k, unsigned eps2, int j2, int k2) {
  PhaseIndex p;
  p.layout = Layout::product;
  p.eps = eps;
  p.j = j;
  p.k = {k};
  p.eps2 = eps2;
  p.j2 = j2;
  p.k2 = {k2};
  return p;
}

Bounds window_bounds(int jmax, int j2max, double rx, double rxi) {
  Bounds b;
  b.jmax = jmax;
  b.j2max = j2max;
  b.window = {{-rx, rx}, {-rxi, rxi}};
  return b;
}

// Model table of the number-array envelope with alpha = beta = 1.
CoefficientTable model_table(double xi_exponent) {
  CoefficientTable t(Layout::product, 1);
  Bounds b;
  b.jmax = 4;
  b.j2max = 4;
  b.klo = {-8};
  b.khi = {8};
  b.k2lo = {-32};
  b.k2hi = {32};
  t.bounds = b;
  for (const auto& p : enumerate_indices(Layout::product, 1, b)) {
    double v = std::exp2(-1.5 * p.j);
    if (p.eps2 == 0)
      v *= 1.0 / (1.0 + std::abs(p.k2[0]));
    else
      v *= std::exp2(-1.5 * p.j2) * std::pow(1.0 + std::ldexp(std::abs(p.k2[0]), -p.j2), xi_exponent);
    t.set(p, v);
  }
  return t;
}

} // namespace

TEST_CASE("N00 constants") {
  CoefficientTable empty(Layout::isotropic, 1);
  for (const auto& e : check_N00(empty, 0.0, {1, 2, 4}).entries) CHECK(e.constant == 0.0);

  CoefficientTable t(Layout::isotropic, 1);
  PhaseIndex p;
  p.layout = Layout::isotropic;
  p.eps = 1;
  p.eps2 = 0;
  p.j = p.j2 = 2;
  p.k = {3};
  p.k2 = {0};
  t.set(p, 1.0);
  const auto r = check_N00(t, 0.0, {3});
  CHECK(r.entries[0].constant == doctest::Approx(64.0).epsilon(1e-15));
  REQUIRE(r.entries[0].witness);
  CHECK(*r.entries[0].witness == p);

  // nonincreasing in m
  PhaseIndex q = p;
  q.k2 = {12};
  t.set(q, 0.5);
  double prev = inf;
  for (double m : {-2.0, -1.0, 0.0, 1.0, 2.0}) {
    const double c = check_N00(t, m, {1}).entries[0].constant;
    CHECK(c <= prev);
    prev = c;
  }
  CHECK_THROWS_AS(check_N00(CoefficientTable(Layout::product, 1), 0.0, {1}), Error);
}

TEST_CASE("N0delta constants") {
  CoefficientTable t(Layout::product, 1);
  for (const auto& e : check_N0delta(t, 0.0, 0.0, 2, 2).entries) CHECK(e.constant == 0.0);
  t.set(product_index(1, 1, 0, 1, 2, 4), 1.0);
  const auto r = check_N0delta(t, 0.0, 0.0, 0, 0);
  CHECK(r.entries.size() == 1);
  CHECK(r.entries[0].constant == doctest::Approx(std::pow(2.0, 1.5)).epsilon(1e-15));
  try {
    check_N0delta(CoefficientTable(Layout::isotropic, 1), 0, 0, 1, 1);
    FAIL("expected layout error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::layout);
  }
}

TEST_CASE("Nrhodelta on hand-built tables") {
  CoefficientTable zero(Layout::product, 1);
  for (const auto& e : check_Nrhodelta(zero, {-1, 1, 0}, 2, 2).entries) CHECK(e.constant == 0.0);

  // eps2 = 0 slice constant in k2: every difference vanishes
  CoefficientTable flat(Layout::product, 1);
  for (int k2 = -6; k2 <= 6; ++k2)
    for (int k = -2; k <= 2; ++k) flat.set(product_index(0, 0, k, 0, 0, k2), 0.25);
  const auto r = check_Nrhodelta(flat, {0, 1, 0}, 1, 2);
  int diffs = 0;
  for (const auto& e : r.entries)
    if (e.branch == "difference") {
      ++diffs;
      CHECK(e.constant == 0.0);
    }
  CHECK(diffs == 4);
  CHECK(r.find("eps2=0", 0, 0)->constant == doctest::Approx(0.25 * std::pow(2.0, 0.0)));

  CoefficientTable tiny(Layout::product, 1);
  tiny.set(product_index(0, 0, 0, 0, 0, 0), 1.0);
  tiny.set(product_index(0, 0, 0, 0, 0, 1), 1.0);
  try {
    check_Nrhodelta(tiny, {0, 1, 0}, 0, 2);
    FAIL("expected window error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::window);
  }

  // model tables satisfy the bound with the model constant at every scale
  const auto model = model_table(-2.0);
  const auto m = check_Nrhodelta(model, {-1, 1, 0}, 2, 1);
  CHECK(m.find("eps2!=0", 1, 1)->constant == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(m.find("eps2!=0", 1, 1)->violation_ratio == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(m.find("eps2=0", 1, 0)->constant == doctest::Approx(1.0).epsilon(1e-12));
  // a growing envelope is flagged at the top scale
  CHECK(m.find("eps2!=0", 2, 0)->violation_ratio > 1.5);
}

TEST_CASE("scaling equivariance") {
  auto t = model_table(-2.0);
  const auto a = check_Nrhodelta(t, {-1, 1, 0}, 2, 2);
  const auto fa = fit_exponents(t);
  t.scale(3.0);
  const auto b = check_Nrhodelta(t, {-1, 1, 0}, 2, 2);
  const auto fb = fit_exponents(t);
  REQUIRE(a.entries.size() == b.entries.size());
  for (std::size_t i = 0; i < a.entries.size(); ++i) {
    CHECK(b.entries[i].constant == doctest::Approx(3.0 * a.entries[i].constant).epsilon(1e-12));
    CHECK(b.entries[i].violation_ratio == doctest::Approx(a.entries[i].violation_ratio).epsilon(1e-12));
  }
  CHECK(fb.params.m == doctest::Approx(fa.params.m).epsilon(1e-9));
  CHECK(fb.params.rho == doctest::Approx(fa.params.rho).epsilon(1e-9));
  CHECK(fb.params.delta == doctest::Approx(fa.params.delta).epsilon(1e-9));
}

TEST_CASE("Nrhodelta on an analysed multiplier symbol") {
  const auto basis = Basis::meyer();
  const SymbolField sigma = gauss_bessel_symbol(1, -1.0);
  std::vector<DecayReport> reps;
  for (int J : {3, 4}) {
    const auto t = analyze(sigma, *basis, Layout::product, window_bounds(J, J, 4, 16));
    reps.push_back(check_Nrhodelta(t, {-1, 1, 0}, 2, 2));
    CHECK(reps.back().worst_ratio() <= 1.0);
  }
  for (std::size_t i = 0; i < reps[0].entries.size(); ++i) {
    const double c0 = reps[0].entries[i].constant, c1 = reps[1].entries[i].constant;
    CHECK(c0 > 0.0);
    CHECK(std::abs(c1 - c0) <= 0.2 * c0);
  }
}

TEST_CASE("Besov seminorm") {
  CHECK(besov_seminorm(std::vector<ScaledCoefficient>{}, 1, 1.0, inf, inf) == 0.0);
  CHECK(besov_seminorm({{2, 1.0}}, 1, 1.0, inf, inf) == doctest::Approx(8.0).epsilon(1e-15));
  // p = q = 2, two levels: (sum_j 2^{2js} sum_k |a|^2)^{1/2} since n/2 - n/p = 0
  const std::vector<ScaledCoefficient> c{{0, 1.0}, {1, cplx(0, 2.0)}, {1, 2.0}};
  const double expect = std::sqrt(1.0 + std::pow(2.0, 2 * 0.5) * 8.0);
  CHECK(besov_seminorm(c, 1, 0.5, 2, 2) == doctest::Approx(expect).epsilon(1e-14));
  // p = 1, q = inf: sup_j 2^{j(s - n/2)} sum |a|
  CHECK(besov_seminorm(c, 1, 0.5, 1, inf) == doctest::Approx(std::max(1.0, 4.0)).epsilon(1e-14));
  std::vector<ScaledCoefficient> c3 = c;
  for (auto& e : c3) e.value *= 3.0;
  CHECK(besov_seminorm(c3, 1, 0.5, 2, 2) == doctest::Approx(3 * expect).epsilon(1e-14));
  CHECK_THROWS_AS(besov_seminorm(c, 1, 0.5, 0.5, 1), Error);
}

TEST_CASE("omega modulus") {
  OmegaOptions opt;
  opt.x_window = {{-3, 3}};
  opt.xi_window = {{-8, 8}};

  const auto z = omega_modulus(zero_symbol(1), 3, opt);
  for (double v : z.values) CHECK(v == 0.0);

  OmegaOptions copt = opt;
  copt.declared_tail = 0.0;
  const auto c = omega_modulus(constant_symbol(1, 2.0), 3, copt);
  CHECK(c.values[0] == doctest::Approx(2.0 * 16.0).epsilon(1e-12));
  for (int j = 1; j <= 3; ++j) CHECK(c.values[j] == doctest::Approx(0.0).epsilon(1e-12));

  try {
    omega_modulus(constant_symbol(1, 2.0), 1, opt);
    FAIL("expected tail error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::tail);
  }

  // Gaussian: omega(0) = erf(1) pi/2; omega(j) ~ h * h * int |d/dxi e^{-xi^2}| = 2 h^2
  const auto g = omega_modulus(gaussian_symbol(1), 5, opt);
  CHECK(g.values[0] == doctest::Approx(std::erf(1.0) * pi / 2).epsilon(1e-3));
  CHECK(g.values[5] * std::exp2(10) == doctest::Approx(2.0).epsilon(0.05));
  CHECK(g.witness_e[5] == 1); // xi direction dominates
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int j = 1; j <= 5; ++j) {
    const double y = std::log2(g.values[j]);
    sx += j;
    sy += y;
    sxx += j * j;
    sxy += j * y;
  }
  const double slope = (5 * sxy - sx * sy) / (5 * sxx - sx * sx);
  CHECK(slope == doctest::Approx(-2.0).epsilon(0.1));

  const auto bs = check_Bs(g, 0.5);
  CHECK(bs.convergent);
  CHECK(bs.partial_sums.size() == 6);
}

TEST_CASE("series verdicts") {
  ModulusSequence w;
  w.n = 1;
  w.values = {0, 0, 0, 0};
  auto v = check_Bs(w, 0.5);
  CHECK(v.convergent);
  CHECK(v.partial_sums.back() == 0.0);
  const double s = 0.5;
  w.values.clear();
  for (int j = 0; j < 8; ++j) w.values.push_back(std::pow(4.0, -j * (1 + s)));
  v = check_Bs(w, s);
  CHECK(v.convergent);
  CHECK(v.last_ratio == doctest::Approx(std::exp2(-1.5)));
  CHECK(v.partial_sums.back() < 1.0 / (1.0 - std::exp2(-1.5)));
  CHECK_FALSE(series_verdict({1, 1, 1, 1}).convergent);
  CHECK_FALSE(series_verdict({1, 2, 4}).convergent);
}

TEST_CASE("exponent fit") {
  try {
    fit_exponents(CoefficientTable(Layout::product, 1));
    FAIL("expected rank error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::rank);
  }
  const auto f = fit_exponents(model_table(-2.0));
  CHECK(f.params.m == doctest::Approx(-1.0).epsilon(0.05));
  CHECK(f.params.rho == doctest::Approx(1.0).epsilon(0.05));
  CHECK(std::abs(f.params.delta) < 0.05);
  CHECK(f.alpha_eff == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(f.beta_eff == doctest::Approx(1.0).epsilon(1e-9));
  // exponent -1 on the eps2 != 0 entries is the rho = 0 envelope
  const auto f0 = fit_exponents(model_table(-1.0));
  CHECK(std::abs(f0.params.rho) < 0.05);

  const auto basis = Basis::meyer();
  const auto t = analyze(gauss_bessel_symbol(1, -1.0), *basis, Layout::product, window_bounds(4, 4, 4, 16));
  const auto fr = fit_exponents(t);
  CHECK(std::abs(fr.params.m + 1.0) < 0.15);
}
