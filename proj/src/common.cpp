#include "wavsym/common.hpp"

#include <algorithm>
#include <cmath>

namespace wavsym {

const char* to_string(ErrorCode c) {
  switch (c) {
  case ErrorCode::config: return "config";
  case ErrorCode::resolution: return "resolution";
  case ErrorCode::size: return "size";
  case ErrorCode::convergence: return "convergence";
  case ErrorCode::precondition: return "precondition";
  case ErrorCode::layout: return "layout";
  case ErrorCode::window: return "window";
  case ErrorCode::tail: return "tail";
  case ErrorCode::aliasing: return "aliasing";
  case ErrorCode::unsupported: return "unsupported";
  case ErrorCode::rank: return "rank";
  case ErrorCode::coverage: return "coverage";
  case ErrorCode::io: return "io";
  }
  return "unknown";
}

void fail(ErrorCode code, const std::string& msg) {
  throw Error(code, std::string(to_string(code)) + " error: " + msg);
}

Grid1D dyadic_grid(double a, double b, int level) {
  if (!(b >= a)) fail(ErrorCode::precondition, "dyadic_grid: empty interval");
  const double s = std::ldexp(1.0, level);
  const double lo = std::floor(a * s + 1e-9);
  const double hi = std::ceil(b * s - 1e-9);
  Grid1D g;
  g.h = 1.0 / s;
  g.lo = lo / s;
  g.n = static_cast<std::size_t>(hi - lo) + 1;
  return g;
}

bool on_dyadic_lattice(double x, int level) {
  const double s = std::ldexp(x, level);
  return std::abs(s - std::round(s)) < 1e-9 * std::max(1.0, std::abs(s));
}

GridFunction::GridFunction(std::vector<Grid1D> ax) : axes(std::move(ax)) {
  values.assign(size(), cplx{});
}

std::size_t GridFunction::size() const {
  std::size_t n = 1;
  for (const auto& a : axes) n *= a.n;
  return axes.empty() ? 0 : n;
}

std::vector<std::size_t> GridFunction::strides() const {
  std::vector<std::size_t> s(axes.size(), 1);
  for (std::size_t a = axes.size(); a-- > 1;) s[a - 1] = s[a] * axes[a].n;
  return s;
}

double GridFunction::cell_volume() const {
  double v = 1.0;
  for (const auto& a : axes) v *= a.h;
  return v;
}

double GridFunction::l2_norm() const {
  double s = 0.0;
  for (const auto& v : values) s += std::norm(v);
  return std::sqrt(s * cell_volume());
}

double GridFunction::max_abs() const {
  double m = 0.0;
  for (const auto& v : values) m = std::max(m, std::abs(v));
  return m;
}

cplx GridFunction::inner(const GridFunction& other) const {
  if (axes != other.axes) fail(ErrorCode::precondition, "inner product on mismatched grids");
  cplx s{};
  for (std::size_t i = 0; i < values.size(); ++i) s += values[i] * std::conj(other.values[i]);
  return s * cell_volume();
}

void GridFunction::check_consistent() const {
  if (values.size() != size())
    fail(ErrorCode::precondition, "grid function value count does not match grid");
}

IndexBox::IndexBox(IntVec lo, IntVec hi) : lo_(std::move(lo)), hi_(std::move(hi)) {
  if (lo_.size() != hi_.size()) fail(ErrorCode::precondition, "IndexBox dimension mismatch");
  extent_.resize(lo_.size());
  for (std::size_t a = 0; a < lo_.size(); ++a) {
    const long e = static_cast<long>(hi_[a]) - lo_[a] + 1;
    extent_[a] = e > 0 ? static_cast<std::size_t>(e) : 0;
    size_ *= extent_[a];
  }
}

IntVec IndexBox::at(std::size_t flat) const {
  IntVec idx(lo_.size());
  for (std::size_t a = lo_.size(); a-- > 0;) {
    idx[a] = lo_[a] + static_cast<int>(flat % extent_[a]);
    flat /= extent_[a];
  }
  return idx;
}

std::size_t IndexBox::flat(const IntVec& idx) const {
  std::size_t f = 0;
  for (std::size_t a = 0; a < lo_.size(); ++a)
    f = f * extent_[a] + static_cast<std::size_t>(idx[a] - lo_[a]);
  return f;
}

bool IndexBox::contains(const IntVec& idx) const {
  for (std::size_t a = 0; a < lo_.size(); ++a)
    if (idx[a] < lo_[a] || idx[a] > hi_[a]) return false;
  return true;
}

double euclid(const IntVec& v) {
  double s = 0.0;
  for (int x : v) s += static_cast<double>(x) * x;
  return std::sqrt(s);
}

double euclid(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

// Tensor-product cubic interpolation, zero outside the sampled box.
cplx interpolate(const GridFunction& f, const std::vector<std::size_t>& strides, const double* x) {
  const std::size_t n = f.dim();
  long base[4];
  double w[4][4];
  for (std::size_t a = 0; a < n; ++a) {
    const auto& g = f.axes[a];
    const double u = (x[a] - g.lo) / g.h;
    if (u < -1.0 || u > static_cast<double>(g.n)) return {};
    const double fl = std::floor(u);
    const double t = u - fl;
    base[a] = static_cast<long>(fl) - 1;
    w[a][0] = -t * (t - 1.0) * (t - 2.0) / 6.0;
    w[a][1] = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0;
    w[a][2] = -(t + 1.0) * t * (t - 2.0) / 2.0;
    w[a][3] = (t + 1.0) * t * (t - 1.0) / 6.0;
  }
  cplx acc{};
  std::size_t combos = 1;
  for (std::size_t a = 0; a < n; ++a) combos *= 4;
  for (std::size_t c = 0; c < combos; ++c) {
    std::size_t rem = c, off = 0;
    double wt = 1.0;
    bool inside = true;
    for (std::size_t a = n; a-- > 0;) {
      const std::size_t d = rem % 4;
      rem /= 4;
      const long idx = base[a] + static_cast<long>(d);
      if (idx < 0 || idx >= static_cast<long>(f.axes[a].n)) {
        inside = false;
        break;
      }
      off += static_cast<std::size_t>(idx) * strides[a];
      wt *= w[a][d];
    }
    if (inside && wt != 0.0) acc += wt * f.values[off];
  }
  return acc;
}


} // namespace wavsym
