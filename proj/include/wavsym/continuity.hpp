#pragma once

#include "wavsym/classifier.hpp"
#include "wavsym/operator.hpp"
#include "wavsym/phase_space.hpp"
#include "wavsym/wavelet.hpp"

#include <Eigen/Dense>

#include "json.hpp"

#include <cmath>
#include <functional>
#include <string>
#include <vector>

// Everything here is one-dimensional (n = 1).
namespace wavsym {

// Real window, negligible outside [lo, hi].
struct WindowFn {
  std::string name;
  std::function<double(double)> f;
  double lo = 0.0, hi = 0.0;
  double operator()(double t) const { return f(t); }
  double radius() const { return std::max(std::abs(lo), std::abs(hi)); }
};

WindowFn gaussian_window(); // e^{-t^2/2}, cut at |t| = 9
WindowFn zero_window();
// Basis function (Meyer cut where the table tail energy drops below 1e-14); centred
// shifts a compact support to be symmetric about 0.
WindowFn wavelet_window(const Basis& basis, Kind kind, bool centred = false);

struct WindowPair {
  WindowFn phi1, phi2;
};

// T_{j,k,l} f(x) = int e^{ixy} Phi1_{j,k}(x) Phi2_{j,l}(y) f(y) dy with Phi_{j,k} = 2^{j/2} Phi(2^j x - k).
struct ModulatedOpSpec {
  int j = 0;
  int k = 0, l = 0;
};

// sum_{k,l} c(k,l) T_{j,k,l}; c is ks.size() x ls.size().
struct ModulatedSum {
  int j = 0;
  std::vector<int> ks, ls;
  Eigen::MatrixXcd c;
};

ModulatedSum single_term(const ModulatedOpSpec& s, cplx c = 1.0);
ModulatedSum box_sum(int j, int kbox, int lbox, cplx a); // |k| <= kbox, |l| <= lbox

// Grids at spacing h covering the Phi1 supports (x) and the Phi2 supports (y).
std::pair<Grid1D, Grid1D> modulated_grids(const WindowPair& w, const ModulatedSum& s, double h);

// Kernel samples K(x_i, y_q) (no quadrature weight).
Eigen::MatrixXcd modulated_kernel(const WindowPair& w, const ModulatedSum& s, const std::vector<double>& xs,
                                  const std::vector<double>& ys);

// M(i, q) = K(x_i, y_q) h_y. Aliasing error when h_y max|x| or h_x max|y| exceeds pi/2.
OperatorMatrix modulated_operator(const WindowPair& w, const ModulatedSum& s, const Grid1D& x, const Grid1D& y);
OperatorMatrix modulated_operator(const WindowPair& w, const ModulatedOpSpec& s, const Grid1D& x, const Grid1D& y);
// Built from the conjugate kernel e^{-iuv} Phi2_{j,l}(u) Phi1_{j,k}(v): y grid out, x grid in.
OperatorMatrix modulated_adjoint(const WindowPair& w, const ModulatedOpSpec& s, const Grid1D& x, const Grid1D& y);

// L^2 norm of the sampled operator; zero rows and columns are dropped first.
NormEstimate operator_norm(const OperatorMatrix& m, double tol = 1e-10);

// ---------------------------------------------------------------- almost orthogonality

struct PairBound {
  ModulatedOpSpec a, b;
  double ab_star = 0.0, a_star_b = 0.0;             // ||T_A T_B^*||, ||T_A^* T_B||
  double shape_ab_star = 0.0, shape_a_star_b = 0.0; // decay profiles without the constant
  double ratio_ab_star = 0.0, ratio_a_star_b = 0.0; // measured / (C profile)
  nlohmann::json to_json() const;
};

// Both compositions on one shared grid. Precondition error unless a.j == b.j.
PairBound cotlar_pair_bounds(const WindowPair& w, const ModulatedOpSpec& a, const ModulatedOpSpec& b, int N0,
                             double h = 1.0 / 16);

struct CotlarFit {
  int N0 = 2;
  double C = 0.0; // max measured / profile over the fitting batch
  std::vector<PairBound> pairs;
  double worst_ratio() const;
  nlohmann::json to_json() const;
};

// Pairs (base, base + (dk, dl)) for dk, dl in offsets.
std::vector<PairBound> cotlar_batch(const WindowPair& w, const ModulatedOpSpec& base, const std::vector<int>& offsets,
                                    int N0, double h = 1.0 / 16);
CotlarFit fit_cotlar(std::vector<PairBound> pairs, int N0);
// Ratios of further pairs against an existing constant.
void apply_fit(const CotlarFit& fit, std::vector<PairBound>& pairs);

struct AssembleResult {
  int j = 0;
  cplx a = 0.0;
  int kbox = 0, lbox = 0;
  std::size_t rows = 0, cols = 0;
  NormEstimate norm;
  double ratio_4jn = 0.0; // norm / 4^j
  nlohmann::json to_json() const;
};

// sum_{|k| <= kbox, |l| <= lbox} a T_{j,k,l}; kbox < 0 is the empty sum.
AssembleResult cotlar_assemble(const WindowPair& w, int j, cplx a, int kbox, int lbox, double h = 1.0 / 16,
                               std::size_t max_points = 4096);

struct ScalingStudy {
  std::vector<AssembleResult> levels;
  double slope = 0.0, intercept = 0.0, residual = 0.0; // log2 norm against j
  std::vector<double> step_ratios;                    // norm_{j+1} / norm_j
  std::vector<double> constants;                      // norm_j / 4^j
  nlohmann::json to_json() const;
  std::string plot_data() const; // "j log2(norm)"
};

// Boxes |k|, |l| <= 2^{2j+1} at every j.
ScalingStudy cotlar_scaling(const WindowPair& w, const std::vector<int>& js, cplx a, double h = 1.0 / 16);

// ---------------------------------------------------------------- Schur test

struct SchurReport {
  int j = 0;
  unsigned eps = 0, eps2 = 0;
  double column_sup = 0.0;      // sup_y int |K| dx
  double row_sup = 0.0;         // sup_x int |K| dy
  double coefficient_sum = 0.0; // sup_k sum_l |a|
  double constant = 0.0;        // (2 pi)^-1 sup_x sum_k |Phi^eps(x - k)| ||hat Phi^eps2||_1
  double predicted = 0.0;       // constant 2^j coefficient_sum
  double ratio_column = 0.0, ratio_row = 0.0;
  nlohmann::json to_json() const;
};

// K(x, y) = (2 pi)^-1 sum_{k,l} a Phi^eps(2^j x - k) hat Phi^eps2(-2^-j (x - y)) e^{i 2^-j l (x - y)}
// is the kernel of the (eps, eps2) scale-j part of an isotropic n = 1 table.
SchurReport schur_bounds(const CoefficientTable& t, const Basis& basis, int j, unsigned eps, unsigned eps2,
                         int resolution = 16);

// ---------------------------------------------------------------- sharp examples

struct SharpL2Options {
  int order = 2;        // Daubechies mother, centred on 0
  double C1 = 6.0, C2 = 6.0;
  double s = 0.5;
  double h = 1.0 / 64;
  std::size_t max_points = 6000;
};

struct SharpL2Result {
  int j = 0, M = 0, lattice = 0;
  CoefficientTable table; // isotropic, eps = eps2 = 1, a = e^{-i 4^-j k l}
  std::size_t rows = 0, cols = 0;
  double f_norm = 0.0;
  double rayleigh = 0.0;        // ||T_j f_j|| / ||f_j||, T_j with kernel e^{ixy} sum a Phi_{j,k}(x) Phi_{j,l}(y)
  double symbol_quotient = 0.0; // the same for K_j(x, D): (2 pi)^-1/2 rayleigh
  NormEstimate norm;            // ||T_j||
  double besov = 0.0, besov_expected = 0.0;
  nlohmann::json to_json() const;
};

// Smallest M with the support of the centred window inside [-2^M, 2^M].
int support_exponent(const WindowFn& w);
SharpL2Result sharp_l2_example(int j, const SharpL2Options& opt = {});
// sum_{j <= jmax} 2^{-j(s0 + 1)} K_j(x, xi) and its table.
SymbolField sharp_l2_symbol(int jmax, double s0, const SharpL2Options& opt = {});
CoefficientTable sharp_l2_table(int jmax, double s0, const SharpL2Options& opt = {});

struct SharpLpOptions {
  int order = 5; // Daubechies mother in x; Meyer mother in xi
};

struct SharpLp {
  int M = 0, lattice = 0;
  std::vector<int> scales; // J_i = (M + 2) i
  SymbolField symbol;      // sum_i J_i^2 sum_{k in lattice Z} Phi1(2^J x - k) Phi2(2^J xi)
  CoefficientTable table;  // a_{J,k,0} = J^2 2^-J on one x period
  OmegaOptions omega;      // windows and steps resolving the finest scale
  nlohmann::json to_json() const;
};

SharpLp sharp_lp_example(int jmax, const SharpLpOptions& opt = {});

// Table-side totals of the examples jmax = 0..jmax; verdicts on the increments.
struct SharpLpTrend {
  double s = 0.0;
  std::vector<double> total_dyadic, total_weighted;
  SeriesVerdict coeff_dyadic, coeff_weighted;
  nlohmann::json to_json() const;
};

SharpLpTrend sharp_lp_trend(int jmax, double s, const SharpLpOptions& opt = {});

// ---------------------------------------------------------------- series conditions

struct Lemma6Options {
  OmegaOptions omega;
  // Constructed tables hold every nonzero coefficient, so their series continue with
  // zero terms; analysed tables stop at their analysis bound.
  bool exact_table = false;
  int extra_scales = 6;
};

// All three series run over j = 0..J with J the analysis bound (or, for exact tables,
// the finest populated scale plus extra_scales); modulus is check_Bs on omega(0..J).
// modulus_sampled keeps 2^{(1+s)j} omega(j) on the populated scales only.
struct Lemma6Report {
  double s = 0.0;
  int J = 0;
  std::vector<int> scales; // populated
  SeriesVerdict coeff_dyadic, modulus, coeff_weighted, modulus_sampled;
  ModulusSequence omega;
  bool agree() const { return modulus.convergent == coeff_weighted.convergent; }
  nlohmann::json to_json() const;
};

Lemma6Report lemma6_check(const CoefficientTable& t, const SymbolField& sigma, double s, const Lemma6Options& opt);

} // namespace wavsym
