#pragma once

#include <boost/container/small_vector.hpp>

#include <complex>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace wavsym {

using cplx = std::complex<double>;
inline constexpr double pi = std::numbers::pi;

// Integer multi-index; inline storage covers phase-space dimension <= 4.
using IntVec = boost::container::small_vector<int, 4>;

enum class ErrorCode : int {
  config = 2,
  resolution = 3,
  size = 4,
  convergence = 5,
  precondition = 6,
  layout = 7,
  window = 8,
  tail = 9,
  aliasing = 10,
  unsupported = 11,
  rank = 12,
  coverage = 13,
  io = 14,
};

const char* to_string(ErrorCode c);

class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& msg)
      : std::runtime_error(msg), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& msg);

// Uniform 1-D grid x_i = lo + i*h, i in [0, n).
struct Grid1D {
  double lo = 0.0;
  double h = 1.0;
  std::size_t n = 0;

  double at(std::size_t i) const { return lo + h * static_cast<double>(i); }
  double hi() const { return n == 0 ? lo : at(n - 1); }
  bool operator==(const Grid1D&) const = default;
};

// Dyadic grid covering [a, b] with spacing 2^-level, endpoints snapped outward.
Grid1D dyadic_grid(double a, double b, int level);

// True when x is an integer multiple of 2^-level (to rounding).
bool on_dyadic_lattice(double x, int level);

// Samples on a tensor grid, row-major (last axis fastest).
struct GridFunction {
  std::vector<Grid1D> axes;
  std::vector<cplx> values;

  GridFunction() = default;
  explicit GridFunction(std::vector<Grid1D> ax);

  std::size_t dim() const { return axes.size(); }
  std::size_t size() const;
  std::vector<std::size_t> strides() const;
  double cell_volume() const;
  double l2_norm() const;
  double max_abs() const;
  // Trapezoid-free Riemann inner product <this, other> (conjugate on other).
  cplx inner(const GridFunction& other) const;
  void check_consistent() const;
};

// Tensor-product cubic interpolation of f at x (dim() coordinates, dim() <= 4);
// zero outside the sampled box. strides = f.strides().
cplx interpolate(const GridFunction& f, const std::vector<std::size_t>& strides, const double* x);

// Row-major iteration helper over a box of integer multi-indices.
class IndexBox {
public:
  IndexBox(IntVec lo, IntVec hi);
  std::size_t size() const { return size_; }
  IntVec at(std::size_t flat) const;
  std::size_t flat(const IntVec& idx) const;
  bool contains(const IntVec& idx) const;
  const IntVec& lo() const { return lo_; }
  const IntVec& hi() const { return hi_; }
  std::size_t dim() const { return lo_.size(); }

private:
  IntVec lo_, hi_;
  std::vector<std::size_t> extent_;
  std::size_t size_ = 1;
};

double euclid(const IntVec& v);
double euclid(const std::vector<double>& v);

} // namespace wavsym
