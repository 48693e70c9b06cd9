#include "wavsym/sequence.hpp"

#include <algorithm>
#include <cmath>

namespace wavsym {

Sequence::Sequence(IntVec lo_, IntVec hi_) : lo(std::move(lo_)), hi(std::move(hi_)) {
  if (lo.size() != hi.size()) fail(ErrorCode::precondition, "Sequence: lo/hi rank mismatch");
  open.assign(lo.size(), 0);
  values.assign(IndexBox(lo, hi).size(), cplx{});
}

Sequence Sequence::from_1d(int lo, const std::vector<cplx>& v) {
  if (v.empty()) fail(ErrorCode::precondition, "Sequence: empty input");
  Sequence s(IntVec{lo}, IntVec{lo + static_cast<int>(v.size()) - 1});
  s.values = v;
  return s;
}

Sequence Sequence::from_1d(int lo, const std::vector<double>& v) {
  return from_1d(lo, std::vector<cplx>(v.begin(), v.end()));
}

cplx Sequence::at(const IntVec& k) const {
  IntVec q = k;
  for (std::size_t a = 0; a < q.size(); ++a) {
    if (q[a] < lo[a]) return {};
    if (q[a] > hi[a]) {
      if (!open[a]) return {};
      q[a] = hi[a];
    }
  }
  return values[box().flat(q)];
}

cplx& Sequence::ref(const IntVec& k) {
  if (!box().contains(k)) fail(ErrorCode::window, "Sequence: index outside window");
  return values[box().flat(k)];
}

double Sequence::max_abs() const {
  double m = 0.0;
  for (const auto& v : values) m = std::max(m, std::abs(v));
  return m;
}

namespace {

Sequence step_difference(const Sequence& a, std::size_t ax, int sign, Window w) {
  IntVec lo = a.lo, hi = a.hi;
  const bool was_open = a.open[ax];
  if (w == Window::valid) {
    if (sign > 0) hi[ax] -= 1;
    else lo[ax] += 1;
  } else if (sign > 0) {
    lo[ax] -= 1;
    if (was_open) hi[ax] -= 1;
  } else if (!was_open) {
    hi[ax] += 1;
  }
  if (hi[ax] < lo[ax]) fail(ErrorCode::window, "difference_op: window too small for the requested order");
  Sequence b(lo, hi);
  b.open = a.open;
  b.open[ax] = 0;
  const IndexBox box = b.box();
  for (std::size_t f = 0; f < box.size(); ++f) {
    IntVec k = box.at(f);
    const cplx here = a.at(k);
    k[ax] += sign;
    b.values[f] = a.at(k) - here;
  }
  return b;
}

} // namespace

Sequence difference_op(const Sequence& a, const IntVec& alpha, int sign, Window w) {
  if (alpha.size() != a.dim()) fail(ErrorCode::precondition, "difference_op: alpha rank mismatch");
  if (sign != 1 && sign != -1) fail(ErrorCode::precondition, "difference_op: sign must be +1 or -1");
  Sequence out = a;
  for (std::size_t ax = 0; ax < alpha.size(); ++ax) {
    if (alpha[ax] < 0) fail(ErrorCode::precondition, "difference_op: negative order");
    for (int r = 0; r < alpha[ax]; ++r) out = step_difference(out, ax, sign, w);
  }
  return out;
}

Sequence summation_op(const Sequence& a, const IntVec& alpha, double tail_tol) {
  if (alpha.size() != a.dim()) fail(ErrorCode::precondition, "summation_op: alpha rank mismatch");
  Sequence cur = a;
  for (std::size_t ax = 0; ax < alpha.size(); ++ax) {
    if (alpha[ax] < 0) fail(ErrorCode::precondition, "summation_op: negative order");
    for (int r = 0; r < alpha[ax]; ++r) {
      if (cur.open[ax]) {
        // Constant tail along ax: summing it diverges unless it vanishes.
        const double scale = std::max(cur.max_abs(), 1e-300);
        const IndexBox box = cur.box();
        double tail = 0.0;
        for (std::size_t f = 0; f < box.size(); ++f)
          if (box.at(f)[ax] == cur.hi[ax]) tail = std::max(tail, std::abs(cur.values[f]));
        if (tail > tail_tol * scale)
          fail(ErrorCode::tail, "summation_op: nonvanishing tail (" + std::to_string(tail / scale) +
                                    " relative) makes the next summation diverge");
        cur.open[ax] = 0;
      }
      IntVec hi = cur.hi;
      hi[ax] += 1;
      Sequence b(cur.lo, hi);
      b.open = cur.open;
      b.open[ax] = 1;
      const IndexBox box = b.box();
      // Walk each fiber along ax with a running sum.
      for (std::size_t f = 0; f < box.size(); ++f) {
        IntVec k = box.at(f);
        if (k[ax] != cur.lo[ax]) continue;
        cplx run{};
        for (int t = cur.lo[ax]; t <= hi[ax]; ++t) {
          k[ax] = t;
          b.values[box.flat(k)] = run;
          run += cur.at(k);
        }
      }
      cur = std::move(b);
    }
  }
  return cur;
}

GridFunction difference_fn(const GridFunction& f, std::size_t axis, long step, int p) {
  if (axis >= f.dim()) fail(ErrorCode::precondition, "difference_fn: axis out of range");
  GridFunction cur = f;
  const auto strides = f.strides();
  const long n = static_cast<long>(f.axes[axis].n);
  for (int r = 0; r < p; ++r) {
    GridFunction out(cur.axes);
    for (std::size_t idx = 0; idx < cur.values.size(); ++idx) {
      const long i = static_cast<long>((idx / strides[axis]) % f.axes[axis].n);
      const long t = i + step;
      const cplx fwd = (t >= 0 && t < n)
                           ? cur.values[static_cast<std::size_t>(static_cast<long>(idx) + step * static_cast<long>(strides[axis]))]
                           : cplx{};
      out.values[idx] = fwd - cur.values[idx];
    }
    cur = std::move(out);
  }
  return cur;
}

} // namespace wavsym
