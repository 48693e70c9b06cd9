#pragma once

#include "wavsym/common.hpp"
#include "wavsym/symbol.hpp"
#include "wavsym/wavelet.hpp"

#include "json.hpp"

#include <string>
#include <vector>

namespace wavsym {

enum class Layout { isotropic, product };

const char* to_string(Layout l);
Layout layout_from_string(const std::string& s);

// Isotropic: ((eps, eps2), j, (k, k2)) with j2 == j.  Product: (eps, j, k) x (eps2, j2, k2).
// eps/eps2 are bit masks, bit a = component a.
struct PhaseIndex {
  Layout layout = Layout::product;
  unsigned eps = 0, eps2 = 0;
  int j = 0, j2 = 0;
  IntVec k, k2;

  int n() const { return static_cast<int>(k.size()); }
  bool valid() const;
  bool operator==(const PhaseIndex&) const = default;
};

nlohmann::json index_to_json(const PhaseIndex& p);
PhaseIndex index_from_json(const nlohmann::json& j);

struct Bounds {
  int jmax = 0;
  int j2max = 0; // product layout only
  Box window;    // 2n intervals; translations chosen so wavelets meet the window
  int margin = 2;
  // Explicit translation boxes used at every scale (override window when set).
  IntVec klo, khi, k2lo, k2hi;
};

struct AnalysisOptions {
  int guard_bits = -1;        // quadrature spacing 2^-(j+g); -1 picks a per-family default
  double quad_radius = 24.0;  // generic path: wavelet truncation radius (scaled units)
  double sep_radius = 96.0;   // separable path truncation radius
  // Finest scale at which sigma has content: every block is sampled at spacing
  // 2^-(max(j, level) + g). -1 uses the finest analysed scale of each axis.
  int symbol_level = -1;
  double drop_threshold = 1e-14;
  std::size_t max_samples = 40'000'000;
};

// Dense storage of one (j, j2, eps, eps2) group over a translation box (2n axes: k then k2).
struct Block {
  int j = 0, j2 = 0;
  unsigned eps = 0, eps2 = 0;
  IntVec lo, hi;
  std::vector<cplx> values;

  IndexBox box() const { return IndexBox(lo, hi); }
};

struct ScaleQuadrature {
  int j = 0, j2 = 0;
  double tail_bound = 0.0; // |a_exact - a| bound from wavelet truncation
  double spacing = 0.0;
};

class CoefficientTable {
public:
  CoefficientTable() = default;
  CoefficientTable(Layout l, int n) : layout(l), n(n) {}

  Layout layout = Layout::product;
  int n = 1;
  Bounds bounds;
  std::string basis = "meyer";
  double drop_threshold = 1e-14;
  int guard_bits = 0;
  double quad_radius = 0.0;
  std::vector<ScaleQuadrature> quadrature;
  std::vector<Block> blocks; // sorted in enumeration order

  cplx get(const PhaseIndex& p) const;
  void set(const PhaseIndex& p, cplx v);
  void sort_blocks();
  std::size_t count() const; // stored (nonzero) entries
  double energy() const;
  double max_abs() const;
  int max_j() const;
  int max_j2() const;
  void scale(cplx c);

  // Visit nonzero entries in enumeration order.
  template <class F> void for_each(F&& f) const {
    PhaseIndex p;
    p.layout = layout;
    for (const auto& b : blocks) {
      const IndexBox box = b.box();
      p.j = b.j;
      p.j2 = b.j2;
      p.eps = b.eps;
      p.eps2 = b.eps2;
      for (std::size_t t = 0; t < b.values.size(); ++t) {
        if (b.values[t] == cplx{}) continue;
        const IntVec kk = box.at(t);
        p.k.assign(kk.begin(), kk.begin() + n);
        p.k2.assign(kk.begin() + n, kk.end());
        f(p, b.values[t]);
      }
    }
  }
};

// Block key order: product (j, j2, eps, eps2); isotropic (j, (eps, eps2)); eps lexicographic.
bool block_less(Layout l, int n, const Block& a, const Block& b);

// Translation range of one phase axis at scale j.
std::pair<int, int> translation_range(const Basis& basis, const Bounds& b, int axis, int j, bool second);

std::vector<PhaseIndex> enumerate_indices(Layout layout, int n, const Bounds& bounds,
                                          const Basis& basis);
std::vector<PhaseIndex> enumerate_indices(Layout layout, int n, const Bounds& bounds);

// The phase-space wavelet Phi_lambda as a separable symbol.
SymbolField wavelet_symbol(const Basis& basis, const PhaseIndex& p);
double wavelet_value(const Basis& basis, const PhaseIndex& p, const double* x, const double* xi);

CoefficientTable analyze(const SymbolField& sigma, const Basis& basis, Layout layout,
                         const Bounds& bounds, const AnalysisOptions& opt = {});

// axes: 2n target axes (x then xi)
GridFunction synthesize(const CoefficientTable& table, const Basis& basis,
                        const std::vector<Grid1D>& axes);

struct ParsevalReport {
  double coefficient_energy = 0.0;
  double symbol_energy = 0.0;
  double gap() const { return symbol_energy - coefficient_energy; }
};
ParsevalReport parseval_report(const CoefficientTable& table, const SymbolField& sigma, int level = 6);

nlohmann::json table_header(const CoefficientTable& t);
void write_jsonl(const CoefficientTable& t, const std::string& path);
CoefficientTable read_jsonl(const std::string& path);
void write_csv(const CoefficientTable& t, const std::string& path);

} // namespace wavsym
