#pragma once

#include "wavsym/common.hpp"

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace wavsym {

enum class Family { meyer, daubechies };
enum class Kind { father = 0, mother = 1 };

inline Kind kind_of(int bit) { return bit ? Kind::mother : Kind::father; }

struct BasisSpec {
  Family family = Family::meyer;
  int order = 0;          // Daubechies vanishing moments
  int level = 10;         // tables sampled at spacing 2^-level
  int radius = 192;       // Meyer table half-width
  int filter_radius = 64; // Meyer filters kept for |k| <= filter_radius

  bool operator==(const BasisSpec&) const = default;
};

BasisSpec parse_basis(const std::string& name); // "meyer", "db4", "daubechies6"

// g_k for k in [lo, lo + taps.size()), zero elsewhere.
struct FilterSequence {
  Kind kind = Kind::father;
  int lo = 0;
  std::vector<double> taps;
  bool finite = true;
  double truncation_error = 0.0; // sup |Phi - sum_k g_k phi(2x-k)| on the table

  double operator[](int k) const {
    const int i = k - lo;
    return (i < 0 || i >= static_cast<int>(taps.size())) ? 0.0 : taps[i];
  }
  int hi() const { return lo + static_cast<int>(taps.size()) - 1; }
};

class Basis {
public:
  static std::shared_ptr<const Basis> get(const BasisSpec& spec);
  static std::shared_ptr<const Basis> meyer() { return get(BasisSpec{}); }
  static std::shared_ptr<const Basis> daubechies(int order);

  const BasisSpec& spec() const { return spec_; }
  Family family() const { return spec_.family; }
  std::string name() const;
  int level() const { return spec_.level; }
  double spacing() const;

  // Table lookup at x = i * 2^-level; zero off the table.
  double lattice(Kind k, long i) const {
    const auto& t = table_[static_cast<int>(k)];
    const long r = i - lo_[static_cast<int>(k)];
    return (r < 0 || r >= static_cast<long>(t.size())) ? 0.0 : t[r];
  }
  double value(Kind k, double x) const; // cubic interpolation between lattice points
  cplx fourier(Kind k, double xi) const;
  // (i xi)^p * fourier, the transform of the p-th derivative
  cplx fourier_derivative(Kind k, double xi, int p) const;

  const std::vector<double>& table(Kind k) const { return table_[static_cast<int>(k)]; }
  long table_lo(Kind k) const { return lo_[static_cast<int>(k)]; }
  long table_hi(Kind k) const;
  double support_lo(Kind k) const;
  double support_hi(Kind k) const;
  double center(Kind k) const;
  bool compact() const { return spec_.family == Family::daubechies; }
  // Fourier support inside band_inner <= |xi| <= band (Meyer only).
  double band(Kind k) const;
  double band_inner(Kind k) const;
  // Energy of the table outside [center - r, center + r].
  double tail_energy(Kind k, double r) const;
  // sup_x sum_k |Phi(x - k)|
  double periodized_sup(Kind k) const;
  double l1_norm(Kind k) const;

  const FilterSequence& filter(Kind k) const { return filter_[static_cast<int>(k)]; }

private:
  explicit Basis(const BasisSpec& spec);
  void build_meyer_tables();
  void build_daubechies_tables();
  void build_filters();

  BasisSpec spec_;
  std::vector<double> table_[2];
  long lo_[2] = {0, 0};
  FilterSequence filter_[2];
  std::vector<double> h_; // Daubechies low-pass, sum = 2
};

// Meyer frequency profiles in closed form.
double meyer_nu(double t);
double meyer_father_hat(double xi);
cplx meyer_mother_hat(double xi);

// Daubechies low-pass taps h_0..h_{2N-1} with sum 2.
std::vector<double> daubechies_filter(int order);

struct Wavelet1D {
  Family family = Family::meyer;
  int order = 0;
  Kind kind = Kind::father;
  Grid1D grid;
  std::vector<double> samples;
  Grid1D freq;                   // DFT frequencies of grid, ascending
  std::vector<cplx> freq_samples;
  bool compact = false;
  double support_lo = 0.0, support_hi = 0.0; // compact support, or the sampled window
  double band_lo = 0.0, band_hi = 0.0;       // Fourier support annulus (Meyer)
  double truncation_radius = 0.0;

  double l2_norm() const;
  GridFunction as_grid_function() const;
};

// Father and mother sampled on grid; grid must reach [-16, 16] and resolve |xi| <= 2 pi.
std::pair<Wavelet1D, Wavelet1D> build_meyer(const Grid1D& grid);
std::pair<Wavelet1D, Wavelet1D> build_daubechies(int order, const Grid1D& grid);

// Samples of f with f_hat given and supported in [-band, band]; exact up to periodization.
std::vector<cplx> band_limited_samples(const std::function<cplx(double)>& fhat, double band,
                                       const Grid1D& grid);

// 2^{nj/2} f(2^j x - k) on target axes. f is interpolated from its own grid.
GridFunction dilate_translate(const GridFunction& f, int j, const IntVec& k,
                              const std::vector<Grid1D>& target);
// Same for the tensor wavelet Phi^eps of a basis, evaluated from the tables.
GridFunction dilate_translate(const Basis& basis, const IntVec& eps, int j, const IntVec& k,
                              const std::vector<Grid1D>& target);

GridFunction tensor_wavelet(const IntVec& eps, const Wavelet1D& father, const Wavelet1D& mother);

// Sum_k (S^s g^1)_k phi(2x - k) along the first axis with eps_i = 1, times the
// remaining factors Phi^{eps_i}(x_i).
GridFunction modified_wavelet(const Basis& basis, const IntVec& eps, int s,
                              const std::vector<Grid1D>& axes);
// 1-D modified filter S^s g^1 (Valid window: the tail slot is dropped once it vanishes).
FilterSequence modified_filter(const Basis& basis, int s);

// S^beta (d^beta phi) for the Meyer father, via the frequency profile
// prod_j [(xi_j/2)/sin(xi_j/2)]^{beta_j} e^{-i beta_j xi_j/2} phi_hat(xi).
GridFunction smoothed_derivative(const Basis& basis, const IntVec& beta,
                                 const std::vector<Grid1D>& axes);
cplx smoothed_derivative_hat(int beta, double xi);

// CSV (x, re, im) plus JSON header sidecar; import reverses both.
void export_wavelet(const Wavelet1D& w, const std::string& csv_path, const std::string& json_path);
Wavelet1D import_wavelet(const std::string& csv_path, const std::string& json_path);

} // namespace wavsym
