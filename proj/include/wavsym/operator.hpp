#pragma once

#include "wavsym/classifier.hpp"
#include "wavsym/common.hpp"
#include "wavsym/phase_space.hpp"
#include "wavsym/symbol.hpp"
#include "wavsym/wavelet.hpp"

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <vector>

namespace wavsym {

// Periodic discretization: a grid of N points at spacing h has period P = N h and
// frequencies xi_m = 2 pi m / P for m in [-floor(N/2), ceil(N/2) - 1].
double grid_frequency(const Grid1D& g, std::size_t fft_index);
// Grid of n points at spacing h with lo = -floor(n/2) h.
Grid1D centered_grid(double h, std::size_t n);

// Samples of f on a tensor grid with f^(xi_m) = h^n sum_i f(x_i) e^{-i x_i xi_m} (FFT order).
class SampledFunction {
public:
  SampledFunction() = default;
  SampledFunction(std::vector<Grid1D> axes, std::vector<cplx> values);
  static SampledFunction sample(std::vector<Grid1D> axes, const std::function<cplx(const double*)>& f);

  int dim() const { return static_cast<int>(axes_.size()); }
  const std::vector<Grid1D>& axes() const { return axes_; }
  const std::vector<cplx>& values() const { return values_; }
  const std::vector<cplx>& spectrum() const { return hat_; }
  std::size_t size() const { return values_.size(); }
  double l2_norm() const;
  GridFunction as_grid_function() const;

private:
  std::vector<Grid1D> axes_;
  std::vector<cplx> values_;
  std::vector<cplx> hat_;
};

double relative_l2(const SampledFunction& a, const SampledFunction& b);

struct ApplyOptions {
  double alias_tol = 1e-8;   // max |f^| on the outer band relative to the peak
  double alias_band = 0.125; // outer fraction of each frequency axis that must be empty
};

// sigma(x, D) f(x) = (2 pi)^-n sum_m e^{i x xi_m} sigma(x, xi_m) f^(xi_m) dxi^n
SampledFunction apply_direct(const SymbolField& sigma, const SampledFunction& f, const ApplyOptions& opt = {});

struct KernelGrid {
  std::vector<Grid1D> x_axes, z_axes;
  std::vector<cplx> values; // row-major over (x_1..x_n, z_1..z_n)
  std::string provenance = "full"; // full | k1 | k2 | k3 | sum
  double tail_bound = 0.0;
  int n() const { return static_cast<int>(x_axes.size()); }
  std::vector<std::size_t> dims() const;
  std::size_t nx() const;
  std::size_t nz() const;
  cplx at(std::size_t ix, std::size_t iz) const { return values[ix * nz() + iz]; }
  double max_abs() const;
  void write(const std::string& path) const; // JSON header line + CSV (x..., z..., re, im)
};

struct KernelOptions {
  bool tempered = false;     // taper sigma smoothly to zero at the Nyquist frequency
  double taper_start = 0.75; // taper begins at this fraction of Nyquist
  double tail_tol = 1e-8;    // untempered: |sigma| on the outer frequency shell / peak
};

// k(x, z) = (2 pi)^-n int sigma(x, xi) e^{i z xi} dxi on a centered, periodic z grid.
KernelGrid kernel_of(const SymbolField& sigma, const std::vector<Grid1D>& x_axes,
                     const std::vector<Grid1D>& z_axes, const KernelOptions& opt = {});

// Tf(x_i) = h^n sum_q k(x_i, z_q) f(x_i - z_q), f extended periodically.
SampledFunction apply_kernel(const KernelGrid& k, const SampledFunction& f);

struct KernelSplit {
  KernelGrid k1, k2, k3;
  KernelGrid total() const;
};

// Wavelet kernel pieces: k1 (eps, eps2 != 0), k2 (eps = 0, eps2 != 0), k3 (eps2 = 0).
KernelSplit kernel_split(const CoefficientTable& table, const Basis& basis, const std::vector<Grid1D>& x_axes,
                         const std::vector<Grid1D>& z_axes);

struct KernelDecayOptions {
  double noise_floor = 1e-10; // region (i) keeps z where the envelope exceeds this fraction of its peak
  std::string basis = "meyer";
  // region (ii): a constant is reported infinite when the ladder growth exponent
  // plus N falls below this margin
  double growth_margin = 0.5;
};

// Region (i) |z| >= 1/2: pointwise (1 + |z|)^-N bounds on d_x^alpha d_z^beta k; the slope
// is fitted on the outer half of the range above the noise floor.
// Region (ii) |z| <= 1/2: Besov B^{alpha,inf}_inf norms in x of d_z^beta k on the ladder |z| = 2^-i.
DecayReport verify_kernel_decay(const KernelGrid& k, const ClassParams& p, int alpha_max, int beta_max,
                                const std::vector<double>& Nlist, const KernelDecayOptions& opt = {});

// Coefficients of a periodic function on its grid (period N h per axis, an integer;
// h dyadic) in the periodized basis, scales 0..jmax.
std::vector<ScaledCoefficient> periodic_coefficients(const GridFunction& f, const Basis& basis, int jmax);

struct OperatorMatrix {
  std::vector<Grid1D> in_axes, out_axes;
  Eigen::MatrixXcd M;
  SampledFunction apply(const SampledFunction& f) const;
  double l2_norm() const; // norm of the induced operator on L^2 of the grids
  void write(const std::string& path) const;
};

OperatorMatrix discretize(const SymbolField& sigma, const std::vector<Grid1D>& in_axes,
                          const std::vector<Grid1D>& out_axes, std::size_t max_entries = std::size_t{1} << 24);

struct NormEstimate {
  double value = 0.0;
  int iterations = 0;
  int restarts = 0;
  double residual = 0.0; // relative change of the Rayleigh value at the last step
  std::string method;    // svd | power
  nlohmann::json to_json() const;
};

// Largest singular value: exact SVD when min(rows, cols) <= svd_limit, otherwise power
// iteration on M^* M to relative tolerance tol, restarting from up to 10 fixed starts.
NormEstimate estimate_norm(const Eigen::MatrixXcd& M, double tol = 1e-10, Eigen::Index svd_limit = 400);
double spectral_norm(const Eigen::MatrixXcd& M);

} // namespace wavsym
