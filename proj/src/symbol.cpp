#include "wavsym/symbol.hpp"
#include "wavsym/phase_space.hpp"

#include <cmath>

namespace wavsym {

SymbolField SymbolField::closed_form(int n, Eval f, std::string name) {
  if (n < 1) fail(ErrorCode::precondition, "symbol dimension must be >= 1");
  SymbolField s;
  s.kind_ = K::closed;
  s.n_ = n;
  s.eval_ = std::move(f);
  s.name = std::move(name);
  return s;
}

SymbolField SymbolField::separable(int n, std::vector<SeparableTerm> terms, std::string name) {
  if (n < 1) fail(ErrorCode::precondition, "symbol dimension must be >= 1");
  for (const auto& t : terms)
    if (t.factors.size() != static_cast<std::size_t>(2 * n))
      fail(ErrorCode::precondition, "separable term needs 2n factors");
  SymbolField s;
  s.kind_ = K::separable;
  s.n_ = n;
  s.terms_ = std::move(terms);
  s.name = std::move(name);
  return s;
}

SymbolField SymbolField::gridded(int n, GridFunction g, std::string name) {
  g.check_consistent();
  if (g.dim() != static_cast<std::size_t>(2 * n)) fail(ErrorCode::precondition, "gridded symbol needs 2n axes");
  SymbolField s;
  s.kind_ = K::gridded;
  s.n_ = n;
  s.strides_ = g.strides();
  for (const auto& a : g.axes) s.box.emplace_back(a.lo, a.hi());
  s.grid_ = std::move(g);
  s.name = std::move(name);
  return s;
}

cplx SymbolField::operator()(const double* x, const double* xi) const {
  switch (kind_) {
  case K::closed:
    return eval_(x, xi);
  case K::separable: {
    cplx acc{};
    for (const auto& t : terms_) {
      cplx v = t.coeff;
      for (int a = 0; a < n_ && v != 0.0; ++a) v *= t.factors[a](x[a]);
      for (int a = 0; a < n_ && v != 0.0; ++a) v *= t.factors[n_ + a](xi[a]);
      acc += v;
    }
    return acc;
  }
  case K::gridded: {
    double X[8];
    for (int a = 0; a < n_; ++a) {
      X[a] = x[a];
      X[n_ + a] = xi[a];
    }
    return interpolate(grid_, strides_, X);
  }
  }
  return {};
}

SymbolField zero_symbol(int n) {
  SymbolField s = SymbolField::separable(n, {}, "zero");
  s.l2_norm_sq = 0.0;
  return s;
}

SymbolField constant_symbol(int n, cplx c) {
  SeparableTerm t;
  t.coeff = c;
  t.factors.assign(2 * n, [](double) { return cplx(1.0); });
  SymbolField s = SymbolField::separable(n, {t}, "constant");
  s.params = {{"value", {c.real(), c.imag()}}};
  return s;
}

SymbolField gaussian_symbol(int n) {
  SeparableTerm t;
  t.factors.assign(2 * n, [](double u) { return cplx(std::exp(-u * u)); });
  SymbolField s = SymbolField::separable(n, {t}, "gaussian");
  s.l2_norm_sq = std::pow(pi / 2.0, n);
  return s;
}

SymbolField gauss_bessel_symbol(int n, double m) {
  SymbolField s;
  if (n == 1) {
    SeparableTerm t;
    t.factors = {[](double x) { return cplx(std::exp(-x * x)); },
                 [m](double xi) { return cplx(std::pow(1.0 + xi * xi, 0.5 * m)); }};
    s = SymbolField::separable(1, {t}, "gauss_bessel");
  } else {
    s = SymbolField::closed_form(
        n,
        [n, m](const double* x, const double* xi) {
          double r2 = 0.0, q2 = 0.0;
          for (int a = 0; a < n; ++a) {
            r2 += x[a] * x[a];
            q2 += xi[a] * xi[a];
          }
          return cplx(std::exp(-r2) * std::pow(1.0 + q2, 0.5 * m));
        },
        "gauss_bessel");
  }
  s.params = {{"m", m}};
  return s;
}

SymbolField bessel_multiplier(int n, double m) {
  SymbolField s;
  if (n == 1) {
    SeparableTerm t;
    t.factors = {[](double) { return cplx(1.0); },
                 [m](double xi) { return cplx(std::pow(1.0 + xi * xi, 0.5 * m)); }};
    s = SymbolField::separable(1, {t}, "bessel_multiplier");
  } else {
    s = SymbolField::closed_form(
        n,
        [n, m](const double*, const double* xi) {
          double q2 = 0.0;
          for (int a = 0; a < n; ++a) q2 += xi[a] * xi[a];
          return cplx(std::pow(1.0 + q2, 0.5 * m));
        },
        "bessel_multiplier");
  }
  s.params = {{"m", m}};
  return s;
}

SymbolField heat_multiplier(int n) {
  SeparableTerm t;
  for (int a = 0; a < n; ++a) t.factors.push_back([](double) { return cplx(1.0); });
  for (int a = 0; a < n; ++a) t.factors.push_back([](double xi) { return cplx(std::exp(-0.5 * xi * xi)); });
  return SymbolField::separable(n, {t}, "heat");
}

SymbolField derivative_symbol(int n, int axis) {
  if (axis < 0 || axis >= n) fail(ErrorCode::config, "derivative axis out of range");
  SeparableTerm t;
  for (int a = 0; a < 2 * n; ++a) t.factors.push_back([](double) { return cplx(1.0); });
  t.factors[n + axis] = [](double xi) { return cplx(0.0, xi); };
  SymbolField s = SymbolField::separable(n, {t}, "derivative");
  s.params = {{"axis", axis}};
  return s;
}

SymbolField make_symbol(const nlohmann::json& spec) {
  if (!spec.is_object() || !spec.contains("type")) fail(ErrorCode::config, "symbol spec needs a \"type\"");
  const std::string type = spec.at("type");
  const int n = spec.value("n", 1);
  if (n < 1 || n > 3) fail(ErrorCode::config, "symbol dimension n must be in [1, 3]");
  SymbolField s;
  if (type == "zero") s = zero_symbol(n);
  else if (type == "constant") s = constant_symbol(n, spec.value("value", 1.0));
  else if (type == "gaussian") s = gaussian_symbol(n);
  else if (type == "gauss_bessel") s = gauss_bessel_symbol(n, spec.value("m", -1.0));
  else if (type == "bessel_multiplier") s = bessel_multiplier(n, spec.value("m", -2.0));
  else if (type == "heat") s = heat_multiplier(n);
  else if (type == "derivative") s = derivative_symbol(n, spec.value("axis", 0));
  else if (type == "wavelet") {
    const auto basis = Basis::get(parse_basis(spec.value("basis", std::string("meyer"))));
    s = wavelet_symbol(*basis, index_from_json(spec.at("index")));
  } else {
    fail(ErrorCode::config, "unknown symbol type '" + type + "'");
  }
  if (spec.contains("box")) {
    Box b;
    for (const auto& e : spec["box"]) b.emplace_back(e.at(0).get<double>(), e.at(1).get<double>());
    if (b.size() != static_cast<std::size_t>(2 * s.dim())) fail(ErrorCode::config, "symbol box needs 2n intervals");
    s.box = b;
  }
  return s;
}

double symbol_energy(const SymbolField& s, const Box& box, int level) {
  const std::size_t d = static_cast<std::size_t>(2 * s.dim());
  if (box.size() != d) fail(ErrorCode::precondition, "symbol_energy: box must have 2n intervals");
  const double h = std::ldexp(1.0, -level);
  if (s.is_separable()) {
    // sum over term pairs of products of 1-D inner products
    const auto& T = s.terms();
    double total = 0.0;
    for (std::size_t r = 0; r < T.size(); ++r)
      for (std::size_t q = 0; q < T.size(); ++q) {
        cplx v = T[r].coeff * std::conj(T[q].coeff);
        for (std::size_t a = 0; a < d; ++a) {
          cplx ip{};
          for (double u = box[a].first; u <= box[a].second; u += h)
            ip += T[r].factors[a](u) * std::conj(T[q].factors[a](u));
          v *= ip * h;
        }
        total += v.real();
      }
    return total;
  }
  std::vector<Grid1D> axes;
  for (const auto& [a, b] : box) axes.push_back(Grid1D{a, h, static_cast<std::size_t>(std::floor((b - a) / h)) + 1});
  std::size_t total = 1;
  for (const auto& g : axes) total *= g.n;
  if (total > 200'000'000) fail(ErrorCode::size, "symbol_energy: quadrature grid too large");
  std::vector<std::size_t> st(d, 1);
  for (std::size_t a = d - 1; a-- > 0;) st[a] = st[a + 1] * axes[a + 1].n;
  double acc = 0.0;
  double X[8];
  for (std::size_t t = 0; t < total; ++t) {
    for (std::size_t a = 0; a < d; ++a) X[a] = axes[a].at((t / st[a]) % axes[a].n);
    acc += std::norm(s.at(X));
  }
  return acc * std::pow(h, static_cast<double>(d));
}

} // namespace wavsym
