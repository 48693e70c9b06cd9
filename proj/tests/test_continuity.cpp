#include "doctest.h"
#include "wavsym/continuity.hpp"

#include <cmath>

using namespace wavsym;

namespace {

WindowPair gauss_pair() { return {gaussian_window(), gaussian_window()}; }

int error_code(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return static_cast<int>(e.code());
  }
  return 0;
}

Bounds iso_bounds(int jmax, double rx, double rxi) {
  Bounds b;
  b.jmax = jmax;
  b.window = {{-rx, rx}, {-rxi, rxi}};
  return b;
}

PhaseIndex atom(int j, int k, int l) {
  PhaseIndex p;
  p.layout = Layout::isotropic;
  p.eps = p.eps2 = 1;
  p.j = p.j2 = j;
  p.k = {k};
  p.k2 = {l};
  return p;
}

} // namespace

TEST_CASE("modulated operator basics") {
  const auto w = gauss_pair();
  const ModulatedOpSpec s{0, 0, 0};
  const auto [x, y] = modulated_grids(w, single_term(s), 1.0 / 16);
  CHECK(x.lo <= -9.0);
  CHECK(x.hi() >= 9.0);

  const WindowPair z{zero_window(), zero_window()};
  const auto [zx, zy] = modulated_grids(z, single_term(s), 1.0 / 16);
  CHECK(modulated_operator(z, s, zx, zy).M.norm() == 0.0);
  CHECK(operator_norm(modulated_operator(z, s, zx, zy)).value == 0.0);

  // adjoint from the conjugate kernel against the weighted conjugate transpose
  const auto T = modulated_operator(w, s, x, y);
  const auto Ts = modulated_adjoint(w, s, x, y);
  const Eigen::MatrixXcd expect = (x.h / y.h) * T.M.adjoint();
  CHECK((Ts.M - expect).cwiseAbs().maxCoeff() < 1e-10);

  // norm through the estimator against a direct SVD of the weighted matrix
  const auto est = operator_norm(T);
  const Eigen::MatrixXcd Wm = std::sqrt(x.h * y.h) * modulated_kernel(w, single_term(s), [&] {
    std::vector<double> v;
    for (std::size_t i = 0; i < x.n; ++i) v.push_back(x.at(i));
    return v;
  }(), [&] {
    std::vector<double> v;
    for (std::size_t i = 0; i < y.n; ++i) v.push_back(y.at(i));
    return v;
  }());
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(Wm);
  CHECK(est.value == doctest::Approx(svd.singularValues()(0)).epsilon(1e-8));

  // a coarse grid on a wide window violates the sampling condition
  CHECK(error_code([&] {
          const auto [bx, by] = modulated_grids(w, box_sum(0, 40, 40, 1.0), 1.0 / 2);
          modulated_operator(w, box_sum(0, 40, 40, 1.0), bx, by);
        }) == static_cast<int>(ErrorCode::aliasing));
}

TEST_CASE("pairwise compositions") {
  const auto w = gauss_pair();
  const ModulatedOpSpec a{1, 0, 0};
  const auto same = cotlar_pair_bounds(w, a, a, 2);
  // ||T T^*|| = ||T^* T|| = ||T||^2
  const auto [x, y] = modulated_grids(w, single_term(a), 1.0 / 16);
  const double n = operator_norm(modulated_operator(w, a, x, y)).value;
  CHECK(same.ab_star == doctest::Approx(n * n).epsilon(1e-6));
  CHECK(same.a_star_b == doctest::Approx(n * n).epsilon(1e-6));

  // translating both operators together leaves the compositions unchanged
  const auto p = cotlar_pair_bounds(w, {1, 0, 0}, {1, 2, 1}, 2);
  const auto q = cotlar_pair_bounds(w, {1, 3, 0}, {1, 5, 1}, 2);
  CHECK(q.ab_star == doctest::Approx(p.ab_star).epsilon(1e-8));

  const auto far = cotlar_pair_bounds(w, a, {1, 8, 0}, 2);
  CHECK(far.a_star_b / same.a_star_b <= std::pow(9.0, -4));

  CHECK(error_code([&] { cotlar_pair_bounds(w, a, {0, 0, 0}, 2); }) == static_cast<int>(ErrorCode::precondition));
}

TEST_CASE("almost orthogonality fit") {
  const auto w = gauss_pair();
  const ModulatedOpSpec base{1, 0, 0};
  auto fit = fit_cotlar(cotlar_batch(w, base, {0, 3, 6, 9, 12}, 2), 2);
  CHECK(fit.pairs.size() == 25);
  CHECK(fit.C > 0);
  CHECK(fit.worst_ratio() <= 1.0 + 1e-12);

  // offsets between the fitted ones
  auto held = cotlar_batch(w, base, {1, 2, 4, 5, 7, 8, 10, 11}, 2);
  apply_fit(fit, held);
  double worst = 0.0;
  for (const auto& p : held) worst = std::max({worst, p.ratio_ab_star, p.ratio_a_star_b});
  CHECK(worst <= 1.25);
}

TEST_CASE("assembled sums") {
  const auto w = gauss_pair();
  const auto empty = cotlar_assemble(w, 0, 1.0, -1, -1);
  CHECK(empty.norm.value == 0.0);

  const auto one = cotlar_assemble(w, 1, 1.0, 0, 0);
  const ModulatedOpSpec s{1, 0, 0};
  const auto [x, y] = modulated_grids(w, single_term(s), 1.0 / 16);
  CHECK(one.norm.value == doctest::Approx(operator_norm(modulated_operator(w, s, x, y)).value).epsilon(1e-8));

  CHECK(error_code([&] { cotlar_assemble(w, 2, 1.0, 200, 200, 1.0 / 16, 1000); }) == static_cast<int>(ErrorCode::size));

  const auto st = cotlar_scaling(w, {0, 1, 2}, 1.0);
  REQUIRE(st.levels.size() == 3);
  CHECK(st.slope <= 2.3);
  CHECK(st.slope > 0.5);
  for (double r : st.step_ratios) CHECK(r > 1.0);
  CHECK(st.plot_data().find('\n') != std::string::npos);
}

TEST_CASE("schur bounds") {
  const auto meyer = Basis::meyer();

  CoefficientTable zero(Layout::isotropic, 1);
  const auto z = schur_bounds(zero, *meyer, 1, 1, 1);
  CHECK(z.row_sup == 0.0);
  CHECK(z.predicted == 0.0);

  // one atom: int |K| dy = (2 pi)^-1 |a| |Phi(2^j x)| 2^j ||hat Phi||_1
  CoefficientTable one(Layout::isotropic, 1);
  one.set(atom(1, 0, 0), 0.5);
  one.sort_blocks();
  double sup = 0.0, l1 = 0.0;
  for (double u = -12; u <= 12; u += 1.0 / 512) sup = std::max(sup, std::abs(meyer->value(Kind::mother, u)));
  for (double xi = -12; xi <= 12; xi += 1.0 / 512) l1 += std::abs(meyer->fourier(Kind::mother, xi)) / 512;
  const auto r1 = schur_bounds(one, *meyer, 1, 1, 1);
  CHECK(r1.row_sup == doctest::Approx(0.5 * 2 * sup * l1 / (2 * pi)).epsilon(1e-2));
  CHECK(r1.ratio_column <= 1.0);
  CHECK(r1.ratio_row <= 1.0);

  const auto t = analyze(gaussian_symbol(1), *meyer, Layout::isotropic, iso_bounds(1, 4, 8));
  for (unsigned e = 0; e < 2; ++e)
    for (unsigned e2 = 0; e2 < 2; ++e2) {
      const auto r = schur_bounds(t, *meyer, 1, e, e2);
      if (r.predicted == 0) continue;
      CHECK(r.ratio_column <= 1.0);
      CHECK(r.ratio_row <= 1.0);
    }

  CHECK(error_code([&] { schur_bounds(one, *Basis::daubechies(2), 1, 1, 1); }) ==
        static_cast<int>(ErrorCode::coverage));
  CHECK(error_code([&] { schur_bounds(CoefficientTable(Layout::product, 1), *meyer, 1, 1, 1); }) ==
        static_cast<int>(ErrorCode::layout));
}

TEST_CASE("sharp L2 example") {
  const auto r0 = sharp_l2_example(0);
  const auto r1 = sharp_l2_example(1);
  CHECK(r1.rayleigh / r0.rayleigh >= 3.0);
  CHECK(r1.norm.value >= r1.rayleigh * (1 - 1e-9));
  CHECK(r1.symbol_quotient == doctest::Approx(r1.rayleigh / std::sqrt(2 * pi)));
  for (const auto* r : {&r0, &r1}) {
    double amax = 0.0;
    r->table.for_each([&](const PhaseIndex&, cplx v) { amax = std::max(amax, std::abs(v)); });
    CHECK(r->besov == doctest::Approx(amax * std::exp2(r->j * 1.5)).epsilon(1e-14));
    CHECK(r->besov == r->besov_expected);
  }
  SharpL2Options small;
  small.max_points = 100;
  CHECK(error_code([&] { sharp_l2_example(2, small); }) == static_cast<int>(ErrorCode::size));

  // symbol and table describe the same sum
  const auto sig = sharp_l2_symbol(1, 0.5);
  const auto tab = sharp_l2_table(1, 0.5);
  const auto db2c = wavelet_window(*Basis::daubechies(2), Kind::mother, true);
  const double x = 0.3, xi = 8.2;
  cplx expect{};
  tab.for_each([&](const PhaseIndex& p, cplx v) {
    const double sj = std::exp2(p.j);
    const double u = sj * x - p.k[0], t = sj * xi - p.k2[0];
    if (u > db2c.lo && u < db2c.hi && t > db2c.lo && t < db2c.hi)
      expect += v * sj * db2c(u) * db2c(t);
  });
  CHECK(std::abs(sig(&x, &xi) - expect) < 1e-12);
}

TEST_CASE("sharp Lp example") {
  const auto e0 = sharp_lp_example(0);
  CHECK(e0.M == 3);
  CHECK(e0.lattice == 32);
  CHECK(e0.table.count() == 0);
  const double x = 0.37, xi = 0.0;
  CHECK(e0.symbol(&x, &xi) == cplx{});

  const auto e2 = sharp_lp_example(2);
  CHECK(e2.scales == std::vector<int>{0, 5, 10});
  CHECK(e2.table.count() == 1 + 32);
  CHECK(error_code([&] { sharp_lp_example(5); }) == static_cast<int>(ErrorCode::size));

  const auto tr = sharp_lp_trend(2, 0.5);
  CHECK(tr.total_dyadic == std::vector<double>{0, 25, 125});
  CHECK_FALSE(tr.coeff_dyadic.convergent);
  CHECK(tr.coeff_weighted.convergent);
}

TEST_CASE("series conditions") {
  Lemma6Options o;
  o.omega.x_window = {{-4, 4}};
  o.omega.xi_window = {{-16, 16}};
  o.omega.x_step = o.omega.xi_step = 1.0 / 64;

  CoefficientTable empty(Layout::isotropic, 1);
  empty.bounds.jmax = 2;
  const auto z = lemma6_check(empty, zero_symbol(1), 0.5, o);
  CHECK(z.J == 2);
  CHECK(z.modulus.convergent);
  CHECK(z.coeff_weighted.convergent);

  const auto t = analyze(gaussian_symbol(1), *Basis::meyer(), Layout::isotropic, iso_bounds(3, 4, 8));
  const auto g = lemma6_check(t, gaussian_symbol(1), 0.5, o);
  CHECK(g.J == 3);
  CHECK(g.modulus.convergent);
  CHECK(g.coeff_weighted.convergent);
  CHECK(g.agree());

  const auto lp = sharp_lp_example(2);
  Lemma6Options lo;
  lo.omega = lp.omega;
  lo.exact_table = true;
  const auto r = lemma6_check(lp.table, lp.symbol, 0.5, lo);
  CHECK(r.J == 16);
  CHECK(r.scales == std::vector<int>{5, 10});
  CHECK(r.modulus.convergent);
  CHECK(r.agree());

  CHECK(error_code([&] { lemma6_check(CoefficientTable(Layout::product, 1), zero_symbol(1), 0.5, o); }) ==
        static_cast<int>(ErrorCode::layout));
}
