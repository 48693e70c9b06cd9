#pragma once

#include "wavsym/phase_space.hpp"
#include "wavsym/symbol.hpp"

#include "json.hpp"

#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace wavsym {

struct ClassParams {
  double m = 0.0;
  double rho = 0.0;
  double delta = 0.0;
};

// One tested (alpha, beta) pair (or decay order N) of a number-array condition.
//  constant         smallest C making the bound hold on every stored coefficient
//  violation_ratio  C needed at the finest populated scale over C needed below it;
//                   <= 1 means the constant is already attained below the truncation edge
struct DecayEntry {
  std::string branch;
  int alpha = 0;
  int beta = 0;
  IntVec alpha_multi, beta_multi; // multi-indices where the branch uses them
  double order = 0.0;              // decay order N (N00 and kernel conditions)
  bool in_hypothesis = true;       // kernel region (ii): outside the exponent constraint
  double slope = 0.0;              // kernel conditions: fitted log-log slope
  double constant = 0.0;
  double violation_ratio = 0.0;
  std::optional<PhaseIndex> witness;
};

struct DecayReport {
  std::string condition; // N00 | N0delta | Nrhodelta | KernelDecay
  nlohmann::json params;
  std::vector<DecayEntry> entries;
  double worst_ratio() const;
  const DecayEntry* find(const std::string& branch, int alpha, int beta) const;
  nlohmann::json to_json() const;
  std::string to_csv() const;
};

DecayReport check_N00(const CoefficientTable& t, double m, const std::vector<double>& Nlist);
DecayReport check_N0delta(const CoefficientTable& t, double m, double delta, int alpha_max, int beta_max);
// Branches: "eps2!=0" and "eps2=0" pointwise bounds, "difference" for tau^beta on the k2 slice.
DecayReport check_Nrhodelta(const CoefficientTable& t, const ClassParams& p, int alpha_max, int beta_max);

struct ScaledCoefficient {
  int j = 0;
  cplx value;
};

// Truncated wavelet Besov seminorm of a dim-variable function; p, q in [1, inf].
double besov_seminorm(const std::vector<ScaledCoefficient>& c, int dim, double s, double p, double q);
// Isotropic phase-space table viewed as a function on R^{2n}.
double besov_seminorm(const CoefficientTable& t, double s, double p, double q);

inline constexpr double inf = std::numeric_limits<double>::infinity();

struct OmegaOptions {
  Box x_window;  // n intervals; cubes meeting it are searched
  Box xi_window; // n intervals; xi integration domain
  double x_step = 1.0 / 32;
  double xi_step = 1.0 / 32;
  // Per-axis (node, weight) rules replacing the uniform xi midpoint grid; xi_window
  // still locates the tail check.
  std::vector<std::vector<std::pair<double, double>>> xi_nodes;
  std::optional<double> declared_tail; // skip the boundary check and record this bound
  double tail_tol = 1e-6;
  std::size_t max_evals = 400'000'000;
};

struct ModulusSequence {
  int n = 1;
  std::vector<double> values;     // omega(j), j = 0..jmax
  std::vector<IntVec> witness_k;  // cube achieving the sup
  std::vector<int> witness_e;     // difference direction (0..2n-1), -1 at j = 0
  double tail_bound = 0.0;
  nlohmann::json to_json() const;
  std::string plot_data() const; // "j log2(omega)" lines
};

ModulusSequence omega_modulus(const SymbolField& sigma, int jmax, const OmegaOptions& opt);

// Partial sums and a ratio-test verdict on the last three terms.
struct SeriesVerdict {
  std::vector<double> terms;
  std::vector<double> partial_sums;
  double last_ratio = 0.0;
  bool convergent = true;
  double tail_estimate = 0.0; // geometric extrapolation of the remainder (inf when divergent)
  nlohmann::json to_json() const;
};

SeriesVerdict series_verdict(std::vector<double> terms);
SeriesVerdict check_Bs(const ModulusSequence& w, double s);

struct ExponentFit {
  ClassParams params;
  double alpha_eff = 0.0; // decay order in j on the eps2=0 slice
  double beta_eff = 0.0;  // decay order in j2 on the eps2!=0 entries
  double slope_j0 = 0.0, slope_L0 = 0.0;              // eps2=0 regression
  double slope_j = 0.0, slope_j2 = 0.0, slope_L = 0.0; // eps2!=0 regression
  double residual_m = 0.0, residual_zero = 0.0, residual_nonzero = 0.0; // rms, log2 units
  std::size_t samples = 0;
  nlohmann::json to_json() const;
};

ExponentFit fit_exponents(const CoefficientTable& t, double floor = 1e-12);

} // namespace wavsym
