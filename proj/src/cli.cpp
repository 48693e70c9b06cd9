#include "wavsym/cli.hpp"

#include "wavsym/classifier.hpp"
#include "wavsym/continuity.hpp"
#include "wavsym/operator.hpp"
#include "wavsym/phase_space.hpp"
#include "wavsym/symbol.hpp"
#include "wavsym/wavelet.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

namespace wavsym {

using nlohmann::json;

namespace {

const std::set<std::string> commands{"analyze", "classify", "kernel", "norm-study", "counterexample", "lemma6"};
const std::set<std::string> builtins{"gaussian", "multiplier", "gauss_multiplier", "sharp-l2", "sharp-lp"};

std::string section(const std::string& command) {
  std::string s = command;
  std::replace(s.begin(), s.end(), '-', '_');
  return s;
}

// defaults under `def` for every key the user left out; nested objects merge
json merged(const json& def, const json& user) {
  if (!user.is_object() || !def.is_object()) return user.is_null() ? def : user;
  json out = def;
  for (auto it = user.begin(); it != user.end(); ++it)
    out[it.key()] = def.contains(it.key()) ? merged(def[it.key()], it.value()) : it.value();
  return out;
}

json command_defaults(const std::string& c) {
  if (c == "analyze") return {{"layout", "product"}, {"parseval_level", 6}};
  if (c == "classify") return {{"alpha_max", 2}, {"beta_max", 2}, {"N", {0, 1, 2, 3, 4}}};
  if (c == "kernel")
    return {{"x", {{"lo", -4.0}, {"h", 0.125}, {"n", 64}}},
            {"z", {{"h", 1.0 / 64}, {"n", 1024}}},
            {"tempered", true},
            {"alpha_max", 1},
            {"beta_max", 1},
            {"N", {0, 1, 2, 3, 4, 5, 6}},
            {"dichotomy", true},
            {"trials", 10},
            {"consistency_grid", {{"h", 0.25}, {"n", 128}}}};
  if (c == "norm-study")
    return {{"window", "gaussian"}, {"j", 1},          {"N0", 2},
            {"h", 1.0 / 16},        {"offsets", {0, 3, 6, 9, 12}},
            {"held_out", {1, 2, 4, 5, 7, 8, 10, 11}},   {"scales", {0, 1, 2}}};
  if (c == "counterexample") return {{"which", "l2"}, {"js", {0, 1}}, {"jmax", 2}, {"order", 0}, {"lemma6", false}};
  if (c == "lemma6") return {{"extra_scales", 6}, {"omega", json::object()}};
  return json::object();
}

bool needs_symbol(const std::string& c) { return c == "analyze" || c == "classify" || c == "kernel" || c == "lemma6"; }

Box box_from(const json& j, const char* what) {
  Box b;
  if (!j.is_array()) fail(ErrorCode::config, std::string(what) + " must be a list of [lo, hi] pairs");
  for (const auto& e : j) {
    if (!e.is_array() || e.size() != 2) fail(ErrorCode::config, std::string(what) + " entries must be [lo, hi]");
    const double a = e[0].get<double>(), c = e[1].get<double>();
    if (!(a < c)) fail(ErrorCode::config, std::string(what) + " intervals need lo < hi");
    b.emplace_back(a, c);
  }
  return b;
}

json box_json(const Box& b) {
  json j = json::array();
  for (const auto& [a, c] : b) j.push_back({a, c});
  return j;
}

int symbol_dim(const json& s) { return s.value("n", 1); }

GridFunction read_grid_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) fail(ErrorCode::io, "cannot read grid file " + path);
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    fail(ErrorCode::config, "grid file " + path + ": " + e.what());
  }
  std::vector<Grid1D> axes;
  for (const auto& a : j.at("axes")) axes.push_back(Grid1D{a.at("lo"), a.at("h"), a.at("n")});
  GridFunction g(axes);
  const auto re = j.at("re").get<std::vector<double>>();
  const auto im = j.value("im", std::vector<double>(re.size(), 0.0));
  if (re.size() != g.size() || im.size() != g.size()) fail(ErrorCode::config, "grid file " + path + ": value count does not match the axes");
  for (std::size_t i = 0; i < re.size(); ++i) g.values[i] = {re[i], im[i]};
  return g;
}

SymbolField symbol_of(const json& s) {
  if (s.contains("grid")) {
    GridFunction g = read_grid_file(s["grid"].get<std::string>());
    if (g.dim() % 2) fail(ErrorCode::config, "grid symbol needs 2n axes");
    return SymbolField::gridded(static_cast<int>(g.dim() / 2), std::move(g), "grid");
  }
  if (!s.contains("builtin")) return make_symbol(s);
  const std::string b = s["builtin"];
  const int n = symbol_dim(s);
  if (b == "gaussian") return gaussian_symbol(n);
  if (b == "multiplier") return bessel_multiplier(n, s.value("m", -2.0));
  if (b == "gauss_multiplier") return gauss_bessel_symbol(n, s.value("m", -1.0));
  if (b == "sharp-l2") {
    SharpL2Options o;
    o.order = s.value("order", 5);
    return sharp_l2_symbol(s.value("jmax", 2), s.value("s0", 0.5), o);
  }
  if (b == "sharp-lp") return sharp_lp_example(s.value("jmax", 2), {s.value("order", 5)}).symbol;
  fail(ErrorCode::config, "unknown builtin symbol '" + b + "'");
}

std::shared_ptr<const Basis> basis_of(const json& cfg) { return Basis::get(parse_basis(cfg["basis"]["family"])); }

Bounds bounds_of(const json& cfg, int n) {
  const auto& b = cfg["bounds"];
  Bounds r;
  r.jmax = b["jmax"];
  r.j2max = b["j2max"];
  r.margin = b["margin"];
  r.window = box_from(b["window"], "bounds.window");
  if (r.window.size() != static_cast<std::size_t>(2 * n)) fail(ErrorCode::config, "bounds.window needs 2n intervals");
  return r;
}

AnalysisOptions analysis_of(const json& cfg) {
  AnalysisOptions o;
  o.guard_bits = cfg["basis"]["guard_bits"];
  o.quad_radius = cfg["basis"]["quad_radius"];
  o.sep_radius = cfg["basis"]["sep_radius"];
  o.drop_threshold = cfg["tolerances"]["drop"];
  return o;
}

ClassParams class_of(const json& cfg) { return {cfg["class"]["m"], cfg["class"]["rho"], cfg["class"]["delta"]}; }

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::string table_csv(const CoefficientTable& t) {
  std::ostringstream os;
  os.precision(17);
  os << "j,j_p,eps,eps_p";
  for (int a = 0; a < t.n; ++a) os << ",k" << a;
  for (int a = 0; a < t.n; ++a) os << ",k_p" << a;
  os << ",re,im\n";
  t.for_each([&](const PhaseIndex& p, cplx v) {
    os << p.j << ',' << p.j2 << ',' << p.eps << ',' << p.eps2;
    for (int k : p.k) os << ',' << k;
    for (int k : p.k2) os << ',' << k;
    os << ',' << v.real() << ',' << v.imag() << '\n';
  });
  return os.str();
}

std::string energy_by_scale(const CoefficientTable& t) {
  std::map<int, double> e;
  t.for_each([&](const PhaseIndex& p, cplx v) { e[std::max(p.j, p.j2)] += std::norm(v); });
  std::ostringstream os;
  os.precision(17);
  for (const auto& [j, v] : e) os << j << ' ' << v << '\n';
  return os.str();
}

Grid1D grid_of(const json& g, bool centred) {
  const double h = g["h"];
  const std::size_t n = g["n"];
  return centred ? centered_grid(h, n) : Grid1D{g["lo"].get<double>(), h, n};
}

// Sum of five Gaussians of width >= 0.8, centres in [-6, 6].
SampledFunction random_input(const std::vector<Grid1D>& ax, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> pos(-6, 6), width(0.8, 2.0), amp(-1, 1);
  struct G {
    double c, w;
    cplx a;
  };
  std::vector<G> gs;
  for (int i = 0; i < 5; ++i) {
    const double c = pos(rng), w = width(rng), re = amp(rng), im = amp(rng);
    gs.push_back({c, w, cplx(re, im)});
  }
  return SampledFunction::sample(ax, [gs](const double* x) {
    cplx s = 0.0;
    for (const auto& g : gs) s += g.a * std::exp(-(x[0] - g.c) * (x[0] - g.c) / g.w);
    return s;
  });
}

// ---------------------------------------------------------------- commands

json do_analyze(const json& cfg, Report& rep) {
  const auto& o = cfg["analyze"];
  const SymbolField sigma = symbol_of(cfg["symbol"]);
  const auto basis = basis_of(cfg);
  const Layout layout = o["layout"] == "isotropic" ? Layout::isotropic : Layout::product;
  const auto t = analyze(sigma, *basis, layout, bounds_of(cfg, sigma.dim()), analysis_of(cfg));
  json r;
  r["entries"] = t.count();
  r["energy"] = t.energy();
  r["max_abs"] = t.max_abs();
  r["context"] = table_header(t);
  if (cfg["analyze"]["parseval_level"].get<int>() >= 0) {
    const auto p = parseval_report(t, sigma, o["parseval_level"]);
    r["parseval"] = {{"coefficient_energy", p.coefficient_energy},
                     {"symbol_energy", p.symbol_energy},
                     {"gap", p.gap()},
                     {"relative_gap", p.symbol_energy > 0 ? p.gap() / p.symbol_energy : 0.0},
                     {"quadrature_level", o["parseval_level"]}};
  }
  rep.files.push_back({"coefficients.csv", table_csv(t)});
  rep.files.push_back({"energy_by_scale.dat", energy_by_scale(t)});
  return r;
}

json do_classify(const json& cfg, Report& rep) {
  const auto& o = cfg["classify"];
  const SymbolField sigma = symbol_of(cfg["symbol"]);
  const auto basis = basis_of(cfg);
  const auto t = analyze(sigma, *basis, Layout::product, bounds_of(cfg, sigma.dim()), analysis_of(cfg));
  const ClassParams p = class_of(cfg);
  const auto d = check_Nrhodelta(t, p, o["alpha_max"], o["beta_max"]);
  const auto fit = fit_exponents(t);
  json r;
  r["entries"] = t.count();
  r["Nrhodelta"] = d.to_json();
  r["in_class"] = d.worst_ratio() <= 1.0;
  r["fit"] = fit.to_json();
  r["context"] = table_header(t);
  rep.files.push_back({"decay.csv", d.to_csv()});
  rep.files.push_back({"energy_by_scale.dat", energy_by_scale(t)});
  return r;
}

json do_kernel(const json& cfg, Report& rep) {
  const auto& o = cfg["kernel"];
  const SymbolField sigma = symbol_of(cfg["symbol"]);
  if (sigma.dim() != 1) fail(ErrorCode::precondition, "kernel command is one-dimensional");
  const std::vector<Grid1D> xs{grid_of(o["x"], false)}, zs{grid_of(o["z"], true)};
  KernelOptions ko;
  ko.tempered = o["tempered"];
  ko.tail_tol = cfg["tolerances"]["kernel_tail"];
  const auto k = kernel_of(sigma, xs, zs, ko);
  std::vector<double> Ns = o["N"].get<std::vector<double>>();
  const auto d = verify_kernel_decay(k, class_of(cfg), o["alpha_max"], o["beta_max"], Ns);
  json r;
  r["decay"] = d.to_json();
  bool finite_i = true;
  for (const auto& e : d.entries)
    if (e.branch == "region_i" && !std::isfinite(e.constant)) finite_i = false;
  r["region_i_finite"] = finite_i;
  r["context"] = {{"x", {{"lo", xs[0].lo}, {"h", xs[0].h}, {"n", xs[0].n}}},
                  {"z", {{"lo", zs[0].lo}, {"h", zs[0].h}, {"n", zs[0].n}}},
                  {"tempered", ko.tempered},
                  {"tail_tol", ko.tail_tol},
                  {"tail_bound", k.tail_bound}};
  {
    std::ostringstream env;
    env.precision(17);
    for (std::size_t q = 0; q < k.nz(); ++q) {
      double m = 0.0;
      for (std::size_t i = 0; i < k.nx(); ++i) m = std::max(m, std::abs(k.at(i, q)));
      env << zs[0].at(q) << ' ' << m << '\n';
    }
    rep.files.push_back({"kernel_envelope.dat", env.str()});
  }
  rep.files.push_back({"decay.csv", d.to_csv()});

  if (o["dichotomy"].get<bool>()) {
    const auto meyer = Basis::meyer();
    const auto t = analyze(sigma, *meyer, Layout::product, bounds_of(cfg, 1), analysis_of(cfg));
    const auto s = kernel_split(t, *meyer, xs, zs);
    double peak = 0.0, inner = 0.0, outer = 0.0;
    for (const auto* kk : {&s.k1, &s.k2, &s.k3}) peak = std::max(peak, kk->max_abs());
    for (std::size_t i = 0; i < s.k1.nx(); ++i)
      for (std::size_t q = 0; q < s.k1.nz(); ++q) {
        const double z = std::abs(zs[0].at(q));
        if (z <= pi / 3) inner = std::max(inner, std::abs(s.k1.at(i, q)) + std::abs(s.k2.at(i, q)));
        if (z >= 4 * pi / 3) outer = std::max(outer, std::abs(s.k3.at(i, q)));
      }
    const double rel_in = peak > 0 ? inner / peak : 0.0, rel_out = peak > 0 ? outer / peak : 0.0;
    const double tol = cfg["tolerances"]["dichotomy"];
    r["dichotomy"] = {{"peak", peak},
                      {"inner_relative", rel_in},
                      {"outer_relative", rel_out},
                      {"tolerance", tol},
                      {"pass", rel_in < tol && rel_out < tol},
                      {"entries", t.count()}};
  }

  const int trials = o["trials"];
  if (trials > 0) {
    const std::vector<Grid1D> ax{centered_grid(o["consistency_grid"]["h"], o["consistency_grid"]["n"])};
    KernelOptions tk;
    tk.tempered = true;
    const auto kt = kernel_of(sigma, ax, ax, tk);
    const auto M = discretize(sigma, ax, ax);
    std::mt19937_64 rng(cfg["seed"].get<std::uint64_t>());
    double worst_kernel = 0.0, worst_matrix = 0.0;
    json runs = json::array();
    for (int i = 0; i < trials; ++i) {
      const auto f = random_input(ax, rng);
      const auto a = apply_direct(sigma, f);
      const double ek = relative_l2(apply_kernel(kt, f), a), em = relative_l2(M.apply(f), a);
      worst_kernel = std::max(worst_kernel, ek);
      worst_matrix = std::max(worst_matrix, em);
      runs.push_back({{"kernel", ek}, {"matrix", em}});
    }
    const double tol = cfg["tolerances"]["consistency"];
    r["consistency"] = {{"trials", runs},
                        {"worst_kernel", worst_kernel},
                        {"worst_matrix", worst_matrix},
                        {"tolerance", tol},
                        {"pass", worst_kernel < tol && worst_matrix < tol},
                        {"grid", {{"h", ax[0].h}, {"n", ax[0].n}}}};
  }
  return r;
}

WindowFn window_named(const std::string& name) {
  if (name == "gaussian") return gaussian_window();
  return wavelet_window(*Basis::get(parse_basis(name)), Kind::mother);
}

json do_norm_study(const json& cfg, Report& rep) {
  const auto& o = cfg["norm_study"];
  const WindowFn win = window_named(o["window"]);
  const WindowPair w{win, win};
  const int N0 = o["N0"];
  const double h = o["h"];
  const ModulatedOpSpec base{o["j"].get<int>(), 0, 0};
  const auto fit = fit_cotlar(cotlar_batch(w, base, o["offsets"].get<std::vector<int>>(), N0, h), N0);
  auto held = cotlar_batch(w, base, o["held_out"].get<std::vector<int>>(), N0, h);
  apply_fit(fit, held);
  double worst_held = 0.0;
  json hj = json::array();
  for (const auto& p : held) {
    worst_held = std::max({worst_held, p.ratio_ab_star, p.ratio_a_star_b});
    hj.push_back(p.to_json());
  }
  const auto st = cotlar_scaling(w, o["scales"].get<std::vector<int>>(), 1.0, h);
  const double slope_limit = 2.0 + cfg["tolerances"]["slope"].get<double>();
  json r;
  r["fit"] = fit.to_json();
  r["fit_pass"] = fit.worst_ratio() <= 1.0;
  r["held_out"] = {{"pairs", hj}, {"worst_ratio", worst_held}};
  r["scaling"] = st.to_json();
  r["slope_limit"] = slope_limit;
  r["slope_pass"] = st.slope <= slope_limit;
  r["context"] = {{"window", win.name}, {"window_support", {win.lo, win.hi}}, {"h", h}, {"N0", N0}};
  rep.files.push_back({"scaling.dat", st.plot_data()});
  return r;
}

json do_counterexample(const json& cfg, Report& rep) {
  const auto& o = cfg["counterexample"];
  const std::string which = o["which"];
  const double s = cfg["class"]["s"];
  json r;
  if (which == "l2") {
    SharpL2Options so;
    so.s = s;
    if (o["order"].get<int>() > 0) so.order = o["order"];
    std::vector<SharpL2Result> res;
    json levels = json::array();
    std::ostringstream plot;
    plot.precision(17);
    for (int j : o["js"].get<std::vector<int>>()) {
      res.push_back(sharp_l2_example(j, so));
      levels.push_back(res.back().to_json());
      plot << j << ' ' << std::log2(res.back().rayleigh) << '\n';
    }
    json ratios = json::array();
    double worst = inf;
    bool besov_exact = true;
    for (std::size_t i = 0; i + 1 < res.size(); ++i) {
      const double q = res[i + 1].rayleigh / res[i].rayleigh;
      ratios.push_back(q);
      worst = std::min(worst, q);
    }
    for (const auto& e : res) besov_exact = besov_exact && e.besov == e.besov_expected;
    const double need = cfg["tolerances"]["growth"];
    r["levels"] = levels;
    r["growth_ratios"] = ratios;
    r["growth_required"] = need;
    r["growth_pass"] = !res.empty() && res.size() > 1 && worst >= need;
    r["besov_exact"] = besov_exact;
    r["context"] = {{"order", so.order}, {"C1", so.C1}, {"C2", so.C2}, {"h", so.h}, {"s", so.s}};
    rep.files.push_back({"l2_growth.dat", plot.str()});
  } else if (which == "lp") {
    SharpLpOptions so;
    if (o["order"].get<int>() > 0) so.order = o["order"];
    const int jmax = o["jmax"];
    const auto tr = sharp_lp_trend(jmax, s, so);
    const auto ex = sharp_lp_example(jmax, so);
    r["example"] = ex.to_json();
    r["trend"] = tr.to_json();
    r["dyadic_divergent"] = !tr.coeff_dyadic.convergent;
    if (o["lemma6"].get<bool>()) {
      Lemma6Options lo;
      lo.omega = ex.omega;
      lo.exact_table = true;
      lo.extra_scales = cfg["lemma6"]["extra_scales"];
      const auto l6 = lemma6_check(ex.table, ex.symbol, s, lo);
      r["lemma6"] = l6.to_json();
      r["Bs_convergent"] = l6.modulus.convergent;
      rep.files.push_back({"omega.dat", l6.omega.plot_data()});
    }
  } else {
    fail(ErrorCode::config, "counterexample.which must be l2 or lp");
  }
  return r;
}

json do_lemma6(const json& cfg, Report& rep) {
  const auto& sym = cfg["symbol"];
  const auto& o = cfg["lemma6"];
  const double s = cfg["class"]["s"];
  Lemma6Options lo;
  lo.extra_scales = o["extra_scales"];
  CoefficientTable t;
  SymbolField sigma;
  const std::string b = sym.value("builtin", std::string());
  if (b == "sharp-lp") {
    auto ex = sharp_lp_example(sym.value("jmax", 2), {sym.value("order", 5)});
    t = std::move(ex.table);
    sigma = std::move(ex.symbol);
    lo.omega = ex.omega;
    lo.exact_table = true;
  } else {
    sigma = symbol_of(sym);
    if (sigma.dim() != 1) fail(ErrorCode::precondition, "lemma6 command is one-dimensional");
    if (b == "sharp-l2") {
      SharpL2Options so;
      so.order = sym.value("order", 5);
      t = sharp_l2_table(sym.value("jmax", 2), sym.value("s0", 0.5), so);
      lo.exact_table = true;
      lo.omega.x_window = {sigma.box[0]};
      lo.omega.xi_window = {sigma.box[1]};
      lo.omega.x_step = lo.omega.xi_step = 1.0 / 16;
    } else {
      const Bounds bd = bounds_of(cfg, 1);
      t = analyze(sigma, *basis_of(cfg), Layout::isotropic, bd, analysis_of(cfg));
      lo.omega.x_window = {bd.window[0]};
      lo.omega.xi_window = {bd.window[1]};
      lo.omega.x_step = lo.omega.xi_step = 1.0 / 64;
    }
  }
  const auto& om = o["omega"];
  if (om.contains("x_window")) lo.omega.x_window = box_from(om["x_window"], "lemma6.omega.x_window");
  if (om.contains("xi_window")) {
    lo.omega.xi_window = box_from(om["xi_window"], "lemma6.omega.xi_window");
    lo.omega.xi_nodes.clear();
  }
  if (om.contains("x_step")) lo.omega.x_step = om["x_step"];
  if (om.contains("xi_step")) {
    lo.omega.xi_step = om["xi_step"];
    lo.omega.xi_nodes.clear();
  }
  lo.omega.tail_tol = cfg["tolerances"]["tail"];
  const auto r6 = lemma6_check(t, sigma, s, lo);
  json r = r6.to_json();
  r["context"] = {{"exact_table", lo.exact_table},
                  {"extra_scales", lo.extra_scales},
                  {"x_window", box_json(lo.omega.x_window)},
                  {"xi_window", box_json(lo.omega.xi_window)},
                  {"x_step", lo.omega.x_step},
                  {"xi_step", lo.omega.xi_step},
                  {"xi_nodes", lo.omega.xi_nodes.empty() ? 0 : lo.omega.xi_nodes[0].size()},
                  {"tail_tol", lo.omega.tail_tol},
                  {"entries", t.count()}};
  rep.files.push_back({"omega.dat", r6.omega.plot_data()});
  return r;
}

// rough size of a table: translations per scale per axis times scale groups
double table_estimate(const json& cfg, int n) {
  const Bounds b = bounds_of(cfg, n);
  double total = 0.0;
  for (int j = 0; j <= b.jmax; ++j)
    for (int j2 = 0; j2 <= b.j2max; ++j2) {
      double cnt = 1.0;
      for (int a = 0; a < n; ++a) cnt *= (b.window[a].second - b.window[a].first) * std::exp2(j) + 2 * b.margin + 1;
      for (int a = n; a < 2 * n; ++a) cnt *= (b.window[a].second - b.window[a].first) * std::exp2(j2) + 2 * b.margin + 1;
      total += cnt * std::exp2(2 * n);
    }
  return total;
}

} // namespace

json normalize_config(const json& raw) {
  if (!raw.is_object()) fail(ErrorCode::config, "config must be a JSON object");
  if (!raw.contains("command")) fail(ErrorCode::config, "config needs a \"command\"");
  const std::string c = raw["command"];
  if (!commands.count(c)) fail(ErrorCode::config, "unknown command '" + c + "'");
  json def = {{"command", c},
              {"seed", 0},
              {"basis", {{"family", "meyer"}, {"quad_radius", 24.0}, {"sep_radius", 96.0}, {"guard_bits", -1}}},
              {"bounds", {{"jmax", 3}, {"j2max", 3}, {"margin", 2}, {"window", {{-4.0, 4.0}, {-16.0, 16.0}}}}},
              {"class", {{"m", 0.0}, {"rho", 1.0}, {"delta", 0.0}, {"s", 0.5}}},
              {"tolerances",
               {{"drop", 1e-14},
                {"tail", 1e-6},
                {"kernel_tail", 1e-8},
                {"dichotomy", 1e-8},
                {"consistency", 1e-6},
                {"slope", 0.3},
                {"growth", 3.0}}},
              {section(c), command_defaults(c)}};
  if (c == "counterexample" && raw.value("counterexample", json::object()).value("lemma6", false))
    def["lemma6"] = command_defaults("lemma6");
  json cfg = merged(def, raw);
  cfg.erase("out");
  if (needs_symbol(c) && !cfg.contains("symbol")) fail(ErrorCode::config, "command '" + c + "' needs a symbol");
  if (cfg.contains("symbol") && !cfg["symbol"].is_object()) fail(ErrorCode::config, "symbol must be an object");
  for (auto it = cfg["tolerances"].begin(); it != cfg["tolerances"].end(); ++it)
    if (!it.value().is_number() || !(it.value().get<double>() > 0))
      fail(ErrorCode::config, "tolerance '" + it.key() + "' must be > 0");
  if (!cfg["seed"].is_number_integer() || cfg["seed"].get<long long>() < 0) fail(ErrorCode::config, "seed must be a non-negative integer");
  return cfg;
}

std::vector<Diagnostic> validate_config(const json& raw) {
  std::vector<Diagnostic> out;
  if (!raw.is_object()) return {{"schema", "config must be a JSON object"}};
  if (!raw.contains("command")) return {{"schema", "missing \"command\""}};
  const std::string c = raw.value("command", std::string());
  if (!commands.count(c)) return {{"command", "unknown command '" + c + "'"}};
  if (needs_symbol(c) && !raw.contains("symbol")) return {{"symbol", "command '" + c + "' needs a symbol spec"}};
  json cfg;
  try {
    cfg = normalize_config(raw);
  } catch (const std::exception& e) {
    return {{"schema", e.what()}};
  }
  try {
    int n = 1;
    if (cfg.contains("symbol")) {
      const auto& s = cfg["symbol"];
      if (s.contains("grid")) {
        const std::string p = s["grid"];
        if (!std::filesystem::exists(p)) out.push_back({"path", "grid file " + p + " does not exist"});
      } else if (s.contains("builtin") && !builtins.count(s["builtin"].get<std::string>())) {
        out.push_back({"symbol", "unknown builtin '" + s["builtin"].get<std::string>() + "'"});
      } else if (!s.contains("builtin") && !s.contains("type")) {
        out.push_back({"symbol", "symbol needs builtin, type or grid"});
      }
      n = symbol_dim(s);
    }
    parse_basis(cfg["basis"]["family"]);
    const auto& b = cfg["bounds"];
    if (b["jmax"].get<int>() < 0 || b["j2max"].get<int>() < 0) out.push_back({"bounds", "scale bounds must be >= 0"});
    if (cfg["basis"]["quad_radius"].get<double>() <= 0 || cfg["basis"]["sep_radius"].get<double>() <= 0)
      out.push_back({"truncation", "truncation radii must be > 0"});
    if (c == "analyze" || c == "classify" || (c == "kernel" && cfg["kernel"]["dichotomy"].get<bool>()) ||
        (c == "lemma6" && cfg["symbol"].value("builtin", std::string()).rfind("sharp", 0) != 0)) {
      const double est = table_estimate(cfg, n);
      if (est > 4e6)
        out.push_back({"grid budget", "estimated table size " + fmt(est) + " exceeds the budget of 4e6 coefficients"});
    }
    if (c == "kernel") {
      const auto& k = cfg["kernel"];
      const double nx = k["x"]["n"], nz = k["z"]["n"];
      if (nx * nz > 16777216) out.push_back({"grid budget", "kernel grid exceeds 2^24 samples"});
      const double hz = k["z"]["h"];
      if (cfg["symbol"].contains("box")) {
        const Box bx = box_from(cfg["symbol"]["box"], "symbol.box");
        if (bx.size() == 2 && std::max(std::abs(bx[1].first), std::abs(bx[1].second)) > pi / hz)
          out.push_back({"nyquist", "symbol xi extent exceeds the z-grid Nyquist frequency pi/h"});
      }
    }
    if (c == "lemma6") {
      const auto& o = cfg["lemma6"]["omega"];
      if (o.contains("x_step") && o.contains("xi_step") && o.contains("x_window") && o.contains("xi_window")) {
        const Box xw = box_from(o["x_window"], "x_window"), kw = box_from(o["xi_window"], "xi_window");
        const double pts = (xw[0].second - xw[0].first) / o["x_step"].get<double>() *
                           (kw[0].second - kw[0].first) / o["xi_step"].get<double>();
        if (pts > 4e8) out.push_back({"grid budget", "omega quadrature exceeds 4e8 evaluations per scale"});
      }
    }
    if (c == "counterexample" && cfg["counterexample"]["which"] == "lp" && cfg["counterexample"]["jmax"].get<int>() > 4)
      out.push_back({"grid budget", "sharp L^p example scales beyond 20 are not resolvable"});
  } catch (const std::exception& e) {
    out.push_back({"schema", e.what()});
  }
  return out;
}

json load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) fail(ErrorCode::io, "cannot read config " + path);
  try {
    json j;
    is >> j;
    return j;
  } catch (const json::exception& e) {
    fail(ErrorCode::config, "config " + path + " is not valid JSON: " + e.what());
  }
}

std::vector<Diagnostic> validate_file(const std::string& path) {
  json j;
  try {
    j = load_config(path);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::io) throw;
    return {{"schema", e.what()}};
  }
  return validate_config(j);
}

Report run(const json& config) {
  const auto t0 = std::chrono::steady_clock::now();
  const json cfg = normalize_config(config);
  const std::string c = cfg["command"];
  Report rep;
  json results;
  if (c == "analyze") results = do_analyze(cfg, rep);
  else if (c == "classify") results = do_classify(cfg, rep);
  else if (c == "kernel") results = do_kernel(cfg, rep);
  else if (c == "norm-study") results = do_norm_study(cfg, rep);
  else if (c == "counterexample") results = do_counterexample(cfg, rep);
  else results = do_lemma6(cfg, rep);
  rep.body = {{"config", cfg},
              {"results", results},
              {"provenance", {{"library", "wavsym"}, {"version", version}, {"files", [&] {
                                 json f = json::array();
                                 for (const auto& o : rep.files) f.push_back(o.name);
                                 return f;
                               }()}}}};
  rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

void write_report(const Report& r, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorCode::io, "cannot create " + dir + ": " + ec.message());
  auto put = [&](const std::string& name, const std::string& s) {
    std::ofstream os(fs::path(dir) / name, std::ios::binary);
    if (!os) fail(ErrorCode::io, "cannot write " + (fs::path(dir) / name).string());
    os << s;
  };
  put("report.json", r.dump());
  for (const auto& f : r.files) put(f.name, f.contents);
  const std::time_t now = std::time(nullptr);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  put("run_info.json", json{{"timestamp", stamp}, {"wall_seconds", r.wall_seconds}, {"out", dir}}.dump(2) + "\n");
}

} // namespace wavsym
