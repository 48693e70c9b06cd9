// One line per acceptance criterion; exit status 1 when any fails.
#include "wavsym/classifier.hpp"
#include "wavsym/cli.hpp"
#include "wavsym/continuity.hpp"
#include "wavsym/operator.hpp"
#include "wavsym/phase_space.hpp"
#include "wavsym/sequence.hpp"
#include "wavsym/symbol.hpp"
#include "wavsym/wavelet.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

using namespace wavsym;

namespace {

// pinned tolerances
constexpr double orth_tol = 1e-6;
constexpr double band_tol = 1e-8;
constexpr double basis_seconds = 10.0;
constexpr double reconstruction_tol = 1e-6;
constexpr double parseval_tol = 0.02;
constexpr double roundtrip_tol = 0.05;
constexpr double parseval_seconds = 60.0;
constexpr double drift_tol = 0.20;
constexpr double m_tol = 0.15;
constexpr double slope_margin = 0.3;
constexpr double dichotomy_tol = 1e-8;
constexpr double cotlar_slope_limit = 2.0 + 0.3;
constexpr double cotlar_seconds = 300.0;
constexpr double growth_min = 3.0;
constexpr double consistency_tol = 1e-6;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

Bounds window_bounds(int jmax, int j2max, double rx, double rxi) {
  Bounds b;
  b.jmax = jmax;
  b.j2max = j2max;
  b.window = {{-rx, rx}, {-rxi, rxi}};
  return b;
}

// ---------------------------------------------------------------- 1

Outcome basis_validity() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto b = Basis::meyer();
  const int lev = 7;
  const double h = std::ldexp(1.0, -lev);
  const long R = 60L << lev;
  std::vector<std::vector<double>> f;
  for (int k = -8; k <= 8; ++k) {
    std::vector<double> v;
    for (long i = -R; i <= R; ++i) v.push_back(b->value(Kind::father, i * h - k));
    f.push_back(std::move(v));
  }
  for (int j = 0; j <= 3; ++j)
    for (int k = -8; k <= 8; ++k) {
      std::vector<double> v;
      const double s = std::sqrt(std::ldexp(1.0, j));
      for (long i = -R; i <= R; ++i) v.push_back(s * b->value(Kind::mother, std::ldexp(i * h, j) - k));
      f.push_back(std::move(v));
    }
  double orth = 0.0;
  for (std::size_t a = 0; a < f.size(); ++a)
    for (std::size_t c = a; c < f.size(); ++c) {
      double s = 0.0;
      for (std::size_t i = 0; i < f[a].size(); ++i) s += f[a][i] * f[c][i];
      orth = std::max(orth, std::abs(s * h - (a == c ? 1.0 : 0.0)));
    }

  // spectra of the sampled tables at spacing 1/16
  auto spectrum_leak = [&](Kind kind, double inner, double outer) {
    const long step = 1L << (b->level() - 4);
    const auto& t = b->table(kind);
    const long lo = b->table_lo(kind);
    double peak = 0.0, leak = 0.0;
    for (double xi = 0.0; xi <= 12.0; xi += 1.0 / 64) {
      cplx s{};
      for (long i = 0; i < static_cast<long>(t.size()); i += step) {
        const double x = (lo + i) * b->spacing();
        s += t[static_cast<std::size_t>(i)] * std::polar(1.0, -x * xi);
      }
      const double v = std::abs(s) / 16;
      peak = std::max(peak, v);
      if (xi < inner - 1e-3 || xi > outer + 1e-3) leak = std::max(leak, v);
    }
    return leak / peak;
  };
  const double leak_father = spectrum_leak(Kind::father, 0.0, 4 * pi / 3);
  const double leak_mother = spectrum_leak(Kind::mother, 2 * pi / 3, 8 * pi / 3);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {orth < orth_tol && leak_father < band_tol && leak_mother < band_tol && secs < basis_seconds,
          "orthonormality dev " + fmt(orth) + ", band leakage father " + fmt(leak_father) + " mother " +
              fmt(leak_mother) + ", " + fmt(secs) + " s"};
}

// ---------------------------------------------------------------- 2

Outcome modified_reconstruction() {
  const auto m = Basis::meyer();
  const Grid1D g{-30.0, 1.0 / 32, 1921};
  double worst = 0.0;
  for (int s = 0; s <= 2; ++s) {
    const auto w = modified_wavelet(*m, IntVec{1}, s, {g});
    const auto back = s == 0 ? w : difference_fn(w, 0, 16, s);
    for (std::size_t i = 16 * s; i + 32 < g.n; ++i)
      worst = std::max(worst, std::abs(back.values[i].real() - m->value(Kind::mother, g.at(i))));
  }
  const auto d6 = Basis::daubechies(6);
  const Grid1D gd{-20.0, 1.0 / 64, 2561};
  bool compact = true;
  double worst_d = 0.0;
  for (int s = 1; s <= 2; ++s) {
    const auto c = modified_filter(*d6, s);
    const double lo = 0.5 * c.lo + d6->support_lo(Kind::father) / 2, hi = 0.5 * (c.hi() + d6->support_hi(Kind::father));
    const auto w = modified_wavelet(*d6, IntVec{1}, s, {gd});
    for (std::size_t i = 0; i < gd.n; ++i)
      if ((gd.at(i) < lo || gd.at(i) > hi) && w.values[i] != cplx{}) compact = false;
    const auto back = difference_fn(w, 0, 32, s);
    for (std::size_t i = 0; i + 64 < gd.n; ++i)
      worst_d = std::max(worst_d, std::abs(back.values[i].real() - d6->value(Kind::mother, gd.at(i))));
  }
  return {worst < reconstruction_tol && compact,
          "Meyer reconstruction dev " + fmt(worst) + " (s <= 2), db6 compact support " + (compact ? "yes" : "no") +
              ", db6 reconstruction dev " + fmt(worst_d)};
}

// ---------------------------------------------------------------- 3

Outcome parseval() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto basis = Basis::meyer();
  const auto sigma = gaussian_symbol(1);
  const auto t = analyze(sigma, *basis, Layout::isotropic, window_bounds(4, 0, 5.0, 5.0));
  const double e = t.energy(), gap = std::abs(e - pi / 2) / (pi / 2);
  const Grid1D g{-4.0, 1.0 / 16, 129};
  const auto syn = synthesize(t, *basis, {g, g});
  double err = 0.0, ref = 0.0;
  for (std::size_t i = 0; i < g.n; ++i)
    for (std::size_t k = 0; k < g.n; ++k) {
      const double x = g.at(i), xi = g.at(k), v = std::exp(-x * x - xi * xi);
      err += std::norm(syn.values[i * g.n + k] - v);
      ref += v * v;
    }
  const double rt = std::sqrt(err / ref);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {gap < parseval_tol && rt < roundtrip_tol && secs < parseval_seconds,
          "energy " + fmt(e) + " vs pi/2 (rel " + fmt(gap) + "), round trip " + fmt(rt) + ", " + fmt(secs) + " s"};
}

// ---------------------------------------------------------------- 4

Outcome class_loop() {
  const auto basis = Basis::meyer();
  const auto sigma = gauss_bessel_symbol(1, -1.0);
  const auto t3 = analyze(sigma, *basis, Layout::product, window_bounds(3, 3, 4, 16));
  const auto t5 = analyze(sigma, *basis, Layout::product, window_bounds(5, 5, 4, 16));
  const auto r3 = check_Nrhodelta(t3, {-1, 1, 0}, 2, 2), r5 = check_Nrhodelta(t5, {-1, 1, 0}, 2, 2);
  double drift = 0.0;
  bool matched = r3.entries.size() == r5.entries.size();
  for (std::size_t i = 0; matched && i < r3.entries.size(); ++i) {
    const double c0 = r3.entries[i].constant, c1 = r5.entries[i].constant;
    drift = std::max(drift, c0 > 0 ? std::abs(c1 - c0) / c0 : (c1 > 0 ? inf : 0.0));
  }
  const auto fit = fit_exponents(t5);
  const double dm = std::abs(fit.params.m + 1.0);
  return {matched && r3.worst_ratio() <= 1.0 && r5.worst_ratio() <= 1.0 && drift < drift_tol && dm < m_tol,
          "violation ratios " + fmt(r3.worst_ratio()) + " / " + fmt(r5.worst_ratio()) + ", drift 3->5 " +
              fmt(drift) + ", fitted m " + fmt(fit.params.m)};
}

// ---------------------------------------------------------------- 5

Outcome kernel_evidence() {
  const auto sigma = gauss_bessel_symbol(1, -1.0);
  const std::vector<Grid1D> xs{Grid1D{-4, 1.0 / 8, 64}}, zs{centered_grid(1.0 / 64, 1024)};
  KernelOptions ko;
  ko.tempered = true;
  const auto k = kernel_of(sigma, xs, zs, ko);
  const auto rep = verify_kernel_decay(k, {-1, 1, 0}, 1, 2, {0, 1, 2, 3, 4, 5, 6});
  bool region_i = true, region_ii = true;
  double worst_gap = -inf;
  int triples = 0;
  for (const auto& e : rep.entries) {
    if (e.branch == "region_i") {
      if (!std::isfinite(e.constant) || e.slope > -e.order + slope_margin) region_i = false;
      worst_gap = std::max(worst_gap, e.slope + e.order);
    } else {
      ++triples;
      if (std::isfinite(e.constant) != e.in_hypothesis) region_ii = false;
    }
  }

  const auto meyer = Basis::meyer();
  const auto t = analyze(sigma, *meyer, Layout::product, window_bounds(2, 2, 3, 8));
  const auto s = kernel_split(t, *meyer, xs, zs);
  double peak = 0.0, dev = 0.0;
  for (const auto* kk : {&s.k1, &s.k2, &s.k3}) peak = std::max(peak, kk->max_abs());
  for (std::size_t i = 0; i < s.k1.nx(); ++i)
    for (std::size_t q = 0; q < s.k1.nz(); ++q) {
      const double z = std::abs(zs[0].at(q));
      if (z <= pi / 3) dev = std::max(dev, std::abs(s.k1.at(i, q)) + std::abs(s.k2.at(i, q)));
      if (z >= 4 * pi / 3) dev = std::max(dev, std::abs(s.k3.at(i, q)));
    }
  const double rel = peak > 0 ? dev / peak : inf;
  return {region_i && region_ii && rel < dichotomy_tol && peak > 0,
          std::string("region (i) finite with slope <= -N+0.3: ") + (region_i ? "yes" : "no") + " (max slope+N " +
              fmt(worst_gap) + "), region (ii) finite exactly in hypothesis over " + std::to_string(triples) +
              " triples: " + (region_ii ? "yes" : "no") + ", dichotomy " + fmt(rel)};
}

// ---------------------------------------------------------------- 6

Outcome cotlar() {
  const auto t0 = std::chrono::steady_clock::now();
  const WindowPair w{gaussian_window(), gaussian_window()};
  const auto fit = fit_cotlar(cotlar_batch(w, {1, 0, 0}, {0, 3, 6, 9, 12}, 2), 2);
  const auto st = cotlar_scaling(w, {0, 1, 2}, 1.0);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {fit.pairs.size() == 25 && fit.worst_ratio() <= 1.0 && st.slope <= cotlar_slope_limit && secs < cotlar_seconds,
          "C = " + fmt(fit.C) + ", worst batch ratio " + fmt(fit.worst_ratio()) + ", log2 slope " + fmt(st.slope) +
              ", " + fmt(secs) + " s"};
}

// ---------------------------------------------------------------- 7

Outcome sharp_l2() {
  const auto r0 = sharp_l2_example(0), r1 = sharp_l2_example(1), r2 = sharp_l2_example(2);
  const double ratio = r1.rayleigh / r0.rayleigh;
  bool exact = true;
  for (const auto* r : {&r0, &r1, &r2}) exact = exact && r->besov == std::exp2(r->j * 1.5);
  return {ratio >= growth_min && exact,
          "Rayleigh ratio j=1/j=0 " + fmt(ratio) + ", Besov 2^{1.5j} exact for j <= 2: " + (exact ? "yes" : "no")};
}

// ---------------------------------------------------------------- 8

Outcome lemma6_corpus() {
  const double s = 0.5;
  struct Row {
    std::string name;
    Lemma6Report r;
  };
  std::vector<Row> rows;
  const auto meyer = Basis::meyer();
  for (const auto& [name, sigma, xi] :
       std::vector<std::tuple<std::string, SymbolField, double>>{{"gaussian", gaussian_symbol(1), 16.0},
                                                                 {"gauss_multiplier(-4)", gauss_bessel_symbol(1, -4.0), 32.0}}) {
    const auto t = analyze(sigma, *meyer, Layout::isotropic, window_bounds(3, 0, 4, 8));
    Lemma6Options o;
    o.omega.x_window = {{-4, 4}};
    o.omega.xi_window = {{-xi, xi}};
    o.omega.x_step = o.omega.xi_step = 1.0 / 64;
    rows.push_back({name, lemma6_check(t, sigma, s, o)});
  }
  {
    SharpL2Options so;
    so.order = 5;
    const auto sigma = sharp_l2_symbol(2, s, so);
    Lemma6Options o;
    o.exact_table = true;
    o.omega.x_window = {sigma.box[0]};
    o.omega.xi_window = {sigma.box[1]};
    o.omega.x_step = o.omega.xi_step = 1.0 / 16;
    rows.push_back({"sharp-l2", lemma6_check(sharp_l2_table(2, s, so), sigma, s, o)});
  }
  const auto lp = sharp_lp_example(2);
  {
    Lemma6Options o;
    o.omega = lp.omega;
    o.exact_table = true;
    rows.push_back({"sharp-lp", lemma6_check(lp.table, lp.symbol, s, o)});
  }
  const auto trend = sharp_lp_trend(2, s);
  bool agree = true;
  std::string detail;
  for (const auto& r : rows) {
    agree = agree && r.r.agree();
    detail += r.name + " " + (r.r.modulus.convergent ? "c" : "d") + "/" + (r.r.coeff_weighted.convergent ? "c" : "d") + ", ";
  }
  const bool div_dyadic = !trend.coeff_dyadic.convergent, bs = rows.back().r.modulus.convergent;
  return {agree && div_dyadic && bs,
          "modulus/weighted verdicts " + detail + "sharp-lp dyadic trend ratio " + fmt(trend.coeff_dyadic.last_ratio) +
              (div_dyadic ? " divergent" : " convergent") + ", check_Bs ratio " + fmt(rows.back().r.modulus.last_ratio) +
              (bs ? " convergent" : " divergent")};
}

// ---------------------------------------------------------------- 9

Outcome triangle() {
  const std::vector<Grid1D> ax{centered_grid(0.25, 128)};
  const auto sigma = SymbolField::closed_form(1, [](const double* x, const double* xi) {
    return std::exp(-x[0] * x[0] / 8) * std::pow(1 + xi[0] * xi[0], -0.5) + cplx(0, 0.3) * xi[0] / (1 + xi[0] * xi[0]);
  });
  KernelOptions ko;
  ko.tempered = true;
  const auto k = kernel_of(sigma, ax, ax, ko);
  const auto M = discretize(sigma, ax, ax);
  std::mt19937 rng(2024);
  std::uniform_real_distribution<double> pos(-6, 6), width(0.8, 2.0), amp(-1, 1);
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<std::tuple<double, double, cplx>> gs;
    for (int i = 0; i < 5; ++i) {
      const double c = pos(rng), w = width(rng), re = amp(rng), im = amp(rng);
      gs.emplace_back(c, w, cplx(re, im));
    }
    const auto f = SampledFunction::sample(ax, [&](const double* x) {
      cplx v = 0.0;
      for (const auto& [c, w, a] : gs) v += a * std::exp(-(x[0] - c) * (x[0] - c) / w);
      return v;
    });
    const auto a = apply_direct(sigma, f), b = apply_kernel(k, f), c = M.apply(f);
    worst = std::max({worst, relative_l2(b, a), relative_l2(c, a), relative_l2(c, b)});
  }
  return {worst < consistency_tol, "worst relative disagreement over 10 inputs " + fmt(worst)};
}

// ---------------------------------------------------------------- 10

std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

Outcome cli_determinism() {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "wavsym_acceptance_cli";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const nlohmann::json cfg = {{"command", "kernel"},
                              {"symbol", {{"builtin", "gauss_multiplier"}, {"m", -1}}},
                              {"class", {{"m", -1}, {"rho", 1}, {"delta", 0}}},
                              {"bounds", {{"jmax", 2}, {"j2max", 2}, {"window", {{-3, 3}, {-8, 8}}}}}};
  std::ofstream(dir / "run.json") << cfg.dump(2);
  std::string outs[2];
  for (int i = 0; i < 2; ++i) {
    const fs::path out = dir / ("out" + std::to_string(i));
    const std::string cmd = std::string(WAVSYM_CLI) + " kernel --config " + (dir / "run.json").string() + " --seed 17 --out " +
                            out.string() + " > /dev/null 2>&1";
    if (std::system(cmd.c_str()) != 0) return {false, "CLI run failed"};
    outs[i] = slurp(out / "report.json");
  }
  const bool same = !outs[0].empty() && outs[0] == outs[1];
  return {same, "report.json " + std::to_string(outs[0].size()) + " bytes, byte-identical: " + (same ? "yes" : "no")};
}

} // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"basis validity", basis_validity},
      {"modified wavelet reconstruction", modified_reconstruction},
      {"Parseval and round trip", parseval},
      {"class membership loop", class_loop},
      {"kernel decay and support dichotomy", kernel_evidence},
      {"almost orthogonality and scaling", cotlar},
      {"sharp L2 growth", sharp_l2},
      {"series conditions corpus", lemma6_corpus},
      {"operator consistency triangle", triangle},
      {"CLI determinism", cli_determinism}};
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%-4s %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  return failed ? 1 : 0;
}
