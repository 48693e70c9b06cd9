#include "doctest.h"
#include "wavsym/sequence.hpp"

#include <random>

using namespace wavsym;

namespace {

Sequence random_1d(int lo, int n, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return Sequence::from_1d(lo, v);
}

} // namespace

TEST_CASE("differences of polynomials") {
  std::vector<double> lin, sq, cst(10, 3.5);
  for (int k = 0; k < 10; ++k) {
    lin.push_back(k);
    sq.push_back(k * k);
  }
  auto d1 = difference_op(Sequence::from_1d(0, lin), IntVec{1}, +1, Window::valid);
  CHECK(d1.values.size() == 9);
  for (auto v : d1.values) CHECK(v.real() == doctest::Approx(1.0));
  auto d2 = difference_op(Sequence::from_1d(0, sq), IntVec{2}, +1, Window::valid);
  for (auto v : d2.values) CHECK(v.real() == doctest::Approx(2.0));
  auto d0 = difference_op(Sequence::from_1d(0, cst), IntVec{3}, -1, Window::valid);
  for (auto v : d0.values) CHECK(std::abs(v) == 0.0);
  auto id = difference_op(Sequence::from_1d(0, lin), IntVec{0}, +1);
  CHECK(id.values == Sequence::from_1d(0, lin).values);
}

TEST_CASE("tau after S recovers a random sequence") {
  const Sequence a = random_1d(-5, 16, 7);
  const Sequence s = summation_op(a, IntVec{1});
  // direct oracle for S: running sums of earlier entries
  double run = 0.0;
  for (int k = -5; k <= 11; ++k) {
    CHECK(s.at(IntVec{k}).real() == doctest::Approx(run).epsilon(1e-14));
    if (k <= 10) run += a.at(IntVec{k}).real();
  }
  CHECK(s.at(IntVec{40}).real() == doctest::Approx(run)); // constant tail
  const Sequence back = difference_op(s, IntVec{1}, +1);
  for (int k = -8; k <= 14; ++k) CHECK(std::abs(back.at(IntVec{k}) - a.at(IntVec{k})) < 1e-12);
}

TEST_CASE("S after tau recovers a random sequence") {
  const Sequence a = random_1d(2, 16, 11);
  const Sequence d = difference_op(a, IntVec{1}, +1);
  const Sequence s = summation_op(d, IntVec{1});
  for (int k = -3; k <= 25; ++k) CHECK(std::abs(s.at(IntVec{k}) - a.at(IntVec{k})) < 1e-12);
}

TEST_CASE("summation tail divergence") {
  const Sequence a = random_1d(0, 8, 3);
  CHECK_THROWS_AS(summation_op(a, IntVec{2}), Error);
  try {
    summation_op(a, IntVec{2});
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::tail);
  }
  // second differences have two vanishing moments, so S^2 is fine
  const Sequence d2 = difference_op(a, IntVec{2}, +1);
  const Sequence s2 = summation_op(d2, IntVec{2});
  for (int k = -4; k <= 12; ++k) CHECK(std::abs(s2.at(IntVec{k}) - a.at(IntVec{k})) < 1e-12);
}

TEST_CASE("zero sequence and linearity in 2-D") {
  Sequence z(IntVec{0, 0}, IntVec{3, 3});
  auto sz = summation_op(z, IntVec{1, 1});
  for (auto v : sz.values) CHECK(std::abs(v) == 0.0);

  std::mt19937 rng(5);
  std::normal_distribution<double> g;
  Sequence a(IntVec{-1, 0}, IntVec{2, 4}), b(IntVec{-1, 0}, IntVec{2, 4}), c(IntVec{-1, 0}, IntVec{2, 4});
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    a.values[i] = {g(rng), g(rng)};
    b.values[i] = {g(rng), g(rng)};
    c.values[i] = 2.0 * a.values[i] - 3.0 * b.values[i];
  }
  const IntVec al{1, 2};
  auto da = difference_op(a, al, -1), db = difference_op(b, al, -1), dc = difference_op(c, al, -1);
  for (std::size_t i = 0; i < dc.values.size(); ++i)
    CHECK(std::abs(dc.values[i] - (2.0 * da.values[i] - 3.0 * db.values[i])) < 1e-12);
  // mixed tau^{(1,1)} S^{(1,1)} is the identity
  auto s = summation_op(a, IntVec{1, 1});
  auto r = difference_op(s, IntVec{1, 1}, +1);
  for (int k0 = -3; k0 <= 4; ++k0)
    for (int k1 = -2; k1 <= 6; ++k1)
      CHECK(std::abs(r.at(IntVec{k0, k1}) - a.at(IntVec{k0, k1})) < 1e-12);
}

TEST_CASE("function differences") {
  GridFunction f({Grid1D{0.0, 0.25, 9}});
  for (std::size_t i = 0; i < 9; ++i) f.values[i] = f.axes[0].at(i) * f.axes[0].at(i);
  auto d = difference_fn(f, 0, 2, 2); // tau^2 with step 1/2 of x^2 = 2 * (1/2)^2
  for (std::size_t i = 0; i + 4 < 9; ++i) CHECK(d.values[i].real() == doctest::Approx(0.5));
}
