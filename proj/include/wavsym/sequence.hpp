#pragma once

#include "wavsym/common.hpp"

#include <vector>

namespace wavsym {

// Integer-indexed n-D values on the window [lo, hi]; zero outside, except that
// an open axis extends its last slice as a constant to +infinity.
struct Sequence {
  IntVec lo, hi;
  std::vector<cplx> values;
  std::vector<char> open;

  Sequence() = default;
  Sequence(IntVec lo_, IntVec hi_);
  static Sequence from_1d(int lo, const std::vector<cplx>& v);
  static Sequence from_1d(int lo, const std::vector<double>& v);

  std::size_t dim() const { return lo.size(); }
  IndexBox box() const { return IndexBox(lo, hi); }
  cplx at(const IntVec& k) const;
  cplx& ref(const IntVec& k);
  double max_abs() const;
};

enum class Window {
  valid,   // keep only indices whose stencil lies inside the stored window
  extended // zero-extend and grow the window to the full support
};

// tau^alpha_{sign}: per axis i, alpha_i applications of a_k -> a_{k + sign e_i} - a_k.
Sequence difference_op(const Sequence& a, const IntVec& alpha, int sign,
                       Window w = Window::extended);

// S^alpha with S a_k = sum_{l <= k-1} a_l along each axis. The result is open
// along each summed axis, its last slot holding the fiber total. Summing along an
// axis whose constant tail exceeds tail_tol * max|a| throws a tail error.
Sequence summation_op(const Sequence& a, const IntVec& alpha, double tail_tol = 1e-10);

// Differences of sampled functions: tau^p_{step e_axis} with step in samples.
GridFunction difference_fn(const GridFunction& f, std::size_t axis, long step, int p);

} // namespace wavsym
