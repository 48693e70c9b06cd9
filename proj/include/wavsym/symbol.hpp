#pragma once

#include "wavsym/common.hpp"

#include "json.hpp"

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace wavsym {

// One product term c * prod_a f_a(u_a) over the 2n phase coordinates (x_1..x_n, xi_1..xi_n).
struct SeparableTerm {
  cplx coeff = 1.0;
  std::vector<std::function<cplx(double)>> factors;
};

using Box = std::vector<std::pair<double, double>>;

// sigma(x, xi) on R^n x R^n: closed form, a finite sum of separable terms, or grid samples.
class SymbolField {
public:
  using Eval = std::function<cplx(const double* x, const double* xi)>;

  SymbolField() = default;
  static SymbolField closed_form(int n, Eval f, std::string name = "closed_form");
  static SymbolField separable(int n, std::vector<SeparableTerm> terms, std::string name = "separable");
  // axes ordered x_1..x_n, xi_1..xi_n; zero outside the sampled box
  static SymbolField gridded(int n, GridFunction g, std::string name = "gridded");

  int dim() const { return n_; }
  cplx operator()(const double* x, const double* xi) const;
  cplx at(const double* X) const { return (*this)(X, X + n_); } // X = (x, xi)

  bool is_separable() const { return kind_ == K::separable; }
  bool is_gridded() const { return kind_ == K::gridded; }
  const std::vector<SeparableTerm>& terms() const { return terms_; }
  const GridFunction* grid() const { return kind_ == K::gridded ? &grid_ : nullptr; }

  std::string name;
  std::optional<double> l2_norm_sq; // exact ||sigma||^2 when known
  Box box;                          // declared phase-space box (2n entries), empty = unbounded
  nlohmann::json params;            // provenance for reports

private:
  enum class K { closed, separable, gridded } kind_ = K::closed;
  int n_ = 0;
  Eval eval_;
  std::vector<SeparableTerm> terms_;
  GridFunction grid_;
  std::vector<std::size_t> strides_;
};

SymbolField zero_symbol(int n);
SymbolField constant_symbol(int n, cplx c);
// exp(-|x|^2 - |xi|^2)
SymbolField gaussian_symbol(int n);
// exp(-|x|^2) (1 + |xi|^2)^{m/2}
SymbolField gauss_bessel_symbol(int n, double m);
// (1 + |xi|^2)^{m/2}
SymbolField bessel_multiplier(int n, double m);
// exp(-|xi|^2 / 2)
SymbolField heat_multiplier(int n);
// i xi_axis
SymbolField derivative_symbol(int n, int axis = 0);

// Build from JSON {"type": "...", ...}; see README for the recognised types.
SymbolField make_symbol(const nlohmann::json& spec);

// Riemann sum of |sigma|^2 over the box at spacing 2^-level (trapezoid-free).
double symbol_energy(const SymbolField& s, const Box& box, int level);

} // namespace wavsym
