#include "wavsym/wavelet.hpp"
#include "wavsym/fft.hpp"
#include "wavsym/sequence.hpp"

#include <Eigen/Dense>
#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>

namespace wavsym {

namespace {

constexpr double two_pi = 2.0 * pi;

long floor_div(long a, long b) { return a >= 0 ? a / b : -((-a + b - 1) / b); }

} // namespace

BasisSpec parse_basis(const std::string& name) {
  BasisSpec s;
  if (name == "meyer") return s;
  std::string digits;
  if (name.rfind("daubechies", 0) == 0) digits = name.substr(10);
  else if (name.rfind("db", 0) == 0) digits = name.substr(2);
  else fail(ErrorCode::config, "unknown basis '" + name + "'");
  try {
    s.order = std::stoi(digits);
  } catch (...) {
    fail(ErrorCode::config, "basis '" + name + "' lacks an order");
  }
  if (s.order < 1 || s.order > 20) fail(ErrorCode::config, "Daubechies order must be in [1, 20]");
  s.family = Family::daubechies;
  return s;
}

double meyer_nu(double t) {
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  return t * t * t * t * (35.0 - 84.0 * t + 70.0 * t * t - 20.0 * t * t * t);
}

double meyer_father_hat(double xi) {
  const double a = std::abs(xi);
  if (a <= two_pi / 3.0) return 1.0;
  if (a >= 4.0 * pi / 3.0) return 0.0;
  return std::cos(0.5 * pi * meyer_nu(3.0 * a / two_pi - 1.0));
}

cplx meyer_mother_hat(double xi) {
  const double a = std::abs(xi);
  double b = 0.0;
  if (a > two_pi / 3.0 && a <= 4.0 * pi / 3.0)
    b = std::sin(0.5 * pi * meyer_nu(3.0 * a / two_pi - 1.0));
  else if (a > 4.0 * pi / 3.0 && a < 8.0 * pi / 3.0)
    b = std::cos(0.5 * pi * meyer_nu(3.0 * a / (4.0 * pi) - 1.0));
  return std::polar(b, -0.5 * xi);
}

std::vector<double> daubechies_filter(int order) {
  if (order < 1) fail(ErrorCode::precondition, "daubechies_filter: order must be >= 1");
  const int N = order;
  // P(y) = sum_k C(N-1+k, k) y^k, y = sin^2(w/2)
  std::vector<double> c(N);
  for (int k = 0; k < N; ++k) {
    double b = 1.0;
    for (int i = 1; i <= k; ++i) b = b * (N - 1 + i) / i;
    c[k] = b;
  }
  std::vector<cplx> poly{1.0};
  for (int i = 0; i < N; ++i) {
    std::vector<cplx> next(poly.size() + 1);
    for (std::size_t t = 0; t < poly.size(); ++t) {
      next[t] += poly[t];
      next[t + 1] += poly[t];
    }
    poly = std::move(next);
  }
  if (N > 1) {
    const int d = N - 1;
    Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(d, d);
    for (int i = 0; i < d; ++i) comp(0, i) = -c[d - 1 - i] / c[d];
    for (int i = 1; i < d; ++i) comp(i, i - 1) = 1.0;
    Eigen::EigenSolver<Eigen::MatrixXd> es(comp, false);
    for (int r = 0; r < d; ++r) {
      const cplx y = es.eigenvalues()[r];
      const cplx cc = 2.0 - 4.0 * y;
      const cplx disc = std::sqrt(cc * cc - 4.0);
      cplx z = 0.5 * (cc + disc);
      if (std::abs(z) > 1.0) z = 0.5 * (cc - disc);
      std::vector<cplx> next(poly.size() + 1);
      for (std::size_t t = 0; t < poly.size(); ++t) {
        next[t] += poly[t];
        next[t + 1] -= z * poly[t];
      }
      poly = std::move(next);
    }
  }
  std::vector<double> h(poly.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) sum += (h[i] = poly[i].real());
  for (auto& v : h) v *= 2.0 / sum;
  return h;
}

// ---------------------------------------------------------------- Basis

std::shared_ptr<const Basis> Basis::get(const BasisSpec& spec) {
  static std::mutex m;
  static std::vector<std::shared_ptr<const Basis>> cache;
  std::lock_guard<std::mutex> lock(m);
  for (const auto& b : cache)
    if (b->spec() == spec) return b;
  if (spec.level < 4 || spec.level > 14) fail(ErrorCode::config, "basis table level must be in [4, 14]");
  if (spec.family == Family::meyer && (spec.radius < 16 || spec.filter_radius < 4))
    fail(ErrorCode::config, "Meyer table radius must be >= 16");
  std::shared_ptr<const Basis> b(new Basis(spec));
  cache.push_back(b);
  return b;
}

std::shared_ptr<const Basis> Basis::daubechies(int order) {
  BasisSpec s;
  s.family = Family::daubechies;
  s.order = order;
  return get(s);
}

Basis::Basis(const BasisSpec& spec) : spec_(spec) {
  if (spec_.family == Family::meyer) build_meyer_tables();
  else build_daubechies_tables();
  build_filters();
}

std::string Basis::name() const {
  return spec_.family == Family::meyer ? "meyer" : "db" + std::to_string(spec_.order);
}

double Basis::spacing() const { return std::ldexp(1.0, -spec_.level); }

long Basis::table_hi(Kind k) const {
  return lo_[static_cast<int>(k)] + static_cast<long>(table(k).size()) - 1;
}

void Basis::build_meyer_tables() {
  const int L = spec_.level;
  const long R = spec_.radius;
  long P = 1;
  while (P < 4 * (R + 2)) P <<= 1;
  const std::size_t N = static_cast<std::size_t>(P) << L;
  std::vector<cplx> A(N);
  const long M = (4 * P) / 3 + 2;
  for (long m = -M; m <= M; ++m) {
    const double xi = two_pi * static_cast<double>(m) / static_cast<double>(P);
    const cplx v = meyer_father_hat(xi) + cplx(0.0, 1.0) * meyer_mother_hat(xi);
    A[static_cast<std::size_t>((m % static_cast<long>(N) + static_cast<long>(N)) % static_cast<long>(N))] = v;
  }
  fft::transform(A, +1);
  const long step = 1L << L;
  const long lo = -R * step, hi = (R + 1) * step;
  for (int k = 0; k < 2; ++k) {
    lo_[k] = lo;
    table_[k].resize(static_cast<std::size_t>(hi - lo + 1));
  }
  const double inv = 1.0 / static_cast<double>(P);
  for (long i = lo; i <= hi; ++i) {
    const cplx v = A[static_cast<std::size_t>((i % static_cast<long>(N) + static_cast<long>(N)) % static_cast<long>(N))] * inv;
    table_[0][static_cast<std::size_t>(i - lo)] = v.real();
    table_[1][static_cast<std::size_t>(i - lo)] = v.imag();
  }
}

void Basis::build_daubechies_tables() {
  const int N = spec_.order;
  const int L = spec_.level;
  h_ = daubechies_filter(N);
  const int len = 2 * N; // taps h_0..h_{2N-1}
  // phi at integers 0..2N-1: eigenvector of A_{ik} = h_{2i-k} for eigenvalue 1.
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(len, len);
  for (int i = 0; i < len; ++i)
    for (int k = 0; k < len; ++k) {
      const int t = 2 * i - k;
      if (t >= 0 && t < len) A(i, k) = h_[t];
    }
  Eigen::EigenSolver<Eigen::MatrixXd> es(A);
  int best = 0;
  for (int r = 1; r < len; ++r)
    if (std::abs(es.eigenvalues()[r] - 1.0) < std::abs(es.eigenvalues()[best] - 1.0)) best = r;
  Eigen::VectorXd v = es.eigenvectors().col(best).real();
  v /= v.sum();
  const long step = 1L << L;
  const long n = static_cast<long>(len - 1) * step + 1;
  auto& phi = table_[0];
  phi.assign(static_cast<std::size_t>(n), 0.0);
  lo_[0] = 0;
  for (int i = 0; i < len - 1; ++i) phi[static_cast<std::size_t>(i * step)] = v(i);
  for (int l = 1; l <= L; ++l) {
    const long s = step >> l;
    for (long t = s; t < n; t += 2 * s) {
      double acc = 0.0;
      for (int k = 0; k < len; ++k) {
        const long u = 2 * t - k * step;
        if (u >= 0 && u < n) acc += h_[k] * phi[static_cast<std::size_t>(u)];
      }
      phi[static_cast<std::size_t>(t)] = acc;
    }
  }
  // psi(x) = sum_k g_k phi(2x - k), g_k = (-1)^k h_{1-k}, support [1-N, N]
  lo_[1] = static_cast<long>(1 - N) * step;
  auto& psi = table_[1];
  psi.assign(static_cast<std::size_t>((2 * N - 1) * step + 1), 0.0);
  for (long t = lo_[1]; t <= static_cast<long>(N) * step; ++t) {
    double acc = 0.0;
    for (int k = 2 - 2 * N; k <= 1; ++k) {
      const double g = ((k % 2 == 0) ? 1.0 : -1.0) * h_[1 - k];
      const long u = 2 * t - k * step;
      if (u >= 0 && u < n) acc += g * phi[static_cast<std::size_t>(u)];
    }
    psi[static_cast<std::size_t>(t - lo_[1])] = acc;
  }
}

void Basis::build_filters() {
  auto& h = filter_[0];
  auto& g = filter_[1];
  h.kind = Kind::father;
  g.kind = Kind::mother;
  if (spec_.family == Family::meyer) {
    const int K = spec_.filter_radius;
    const long half = 1L << (spec_.level - 1);
    h.lo = -K;
    g.lo = 1 - K;
    h.finite = g.finite = false;
    for (int k = -K; k <= K; ++k) h.taps.push_back(lattice(Kind::father, k * half));
    for (int k = 1 - K; k <= 1 + K; ++k)
      g.taps.push_back(((k % 2 == 0) ? -1.0 : 1.0) * h[1 - k]);
  } else {
    const int N = spec_.order;
    h.lo = 0;
    h.taps = h_;
    g.lo = 2 - 2 * N;
    for (int k = 2 - 2 * N; k <= 1; ++k) g.taps.push_back(((k % 2 == 0) ? 1.0 : -1.0) * h_[1 - k]);
  }
  // Scale-equation residual on a subsample of each table.
  const long step = 1L << spec_.level;
  const long stride = std::max(1L, step >> 5);
  for (int e = 0; e < 2; ++e) {
    auto& f = filter_[e];
    double err = 0.0;
    for (long t = lo_[e]; t <= table_hi(static_cast<Kind>(e)); t += stride) {
      double acc = 0.0;
      for (int k = f.lo; k <= f.hi(); ++k) acc += f[k] * lattice(Kind::father, 2 * t - k * step);
      err = std::max(err, std::abs(acc - lattice(static_cast<Kind>(e), t)));
    }
    f.truncation_error = err;
  }
}

double Basis::value(Kind k, double x) const {
  const double u = std::ldexp(x, spec_.level);
  const double fl = std::floor(u);
  const double t = u - fl;
  const long i = static_cast<long>(fl);
  if (t == 0.0) return lattice(k, i);
  const double p0 = lattice(k, i - 1), p1 = lattice(k, i), p2 = lattice(k, i + 1), p3 = lattice(k, i + 2);
  // cubic Lagrange through i-1..i+2
  return p0 * (-t * (t - 1.0) * (t - 2.0) / 6.0) + p1 * ((t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0) +
         p2 * (-(t + 1.0) * t * (t - 2.0) / 2.0) + p3 * ((t + 1.0) * t * (t - 1.0) / 6.0);
}

cplx Basis::fourier(Kind k, double xi) const {
  if (spec_.family == Family::meyer)
    return k == Kind::father ? cplx(meyer_father_hat(xi)) : meyer_mother_hat(xi);
  auto m0 = [&](double w) {
    cplx s{};
    for (std::size_t i = 0; i < h_.size(); ++i) s += h_[i] * std::polar(1.0, -static_cast<double>(i) * w);
    return 0.5 * s;
  };
  auto phi_hat = [&](double x) {
    cplx p = 1.0;
    for (int j = 1; j <= 40; ++j) p *= m0(std::ldexp(x, -j));
    return p;
  };
  if (k == Kind::father) return phi_hat(xi);
  const auto& g = filter_[1];
  cplx m1{};
  for (int t = g.lo; t <= g.hi(); ++t) m1 += g[t] * std::polar(1.0, -t * 0.5 * xi);
  return 0.5 * m1 * phi_hat(0.5 * xi);
}

cplx Basis::fourier_derivative(Kind k, double xi, int p) const {
  return std::pow(cplx(0.0, xi), p) * fourier(k, xi);
}

double Basis::support_lo(Kind k) const { return static_cast<double>(table_lo(k)) * spacing(); }
double Basis::support_hi(Kind k) const { return static_cast<double>(table_hi(k)) * spacing(); }

double Basis::center(Kind k) const {
  if (k == Kind::mother) return 0.5;
  return spec_.family == Family::meyer ? 0.0 : 0.5 * (2 * spec_.order - 1);
}

double Basis::band(Kind k) const {
  if (spec_.family != Family::meyer) return std::numeric_limits<double>::infinity();
  return k == Kind::father ? 4.0 * pi / 3.0 : 8.0 * pi / 3.0;
}

double Basis::band_inner(Kind k) const {
  return (spec_.family == Family::meyer && k == Kind::mother) ? two_pi / 3.0 : 0.0;
}

double Basis::tail_energy(Kind k, double r) const {
  const auto& t = table(k);
  const double c = center(k), h = spacing();
  double e = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double x = static_cast<double>(lo_[static_cast<int>(k)] + static_cast<long>(i)) * h;
    if (std::abs(x - c) > r) e += t[i] * t[i];
  }
  return e * h;
}

double Basis::periodized_sup(Kind k) const {
  const long step = 1L << spec_.level;
  double best = 0.0;
  for (long o = 0; o < step; ++o) {
    double s = 0.0;
    for (long i = floor_div(table_lo(k) - o, step) * step + o; i <= table_hi(k); i += step)
      s += std::abs(lattice(k, i));
    best = std::max(best, s);
  }
  return best;
}

double Basis::l1_norm(Kind k) const {
  double s = 0.0;
  for (double v : table(k)) s += std::abs(v);
  return s * spacing();
}

// ---------------------------------------------------------------- Wavelet1D

double Wavelet1D::l2_norm() const {
  double s = 0.0;
  for (double v : samples) s += v * v;
  return std::sqrt(s * grid.h);
}

GridFunction Wavelet1D::as_grid_function() const {
  GridFunction g({grid});
  for (std::size_t i = 0; i < samples.size(); ++i) g.values[i] = samples[i];
  return g;
}

std::vector<cplx> band_limited_samples(const std::function<cplx(double)>& fhat, double band,
                                       const Grid1D& grid) {
  if (grid.n == 0) return {};
  if (band >= pi / grid.h) fail(ErrorCode::resolution, "grid spacing too coarse for the frequency band");
  const std::size_t N = fft::good_size(2 * grid.n + static_cast<std::size_t>(std::ceil(256.0 / grid.h)));
  const double P = static_cast<double>(N) * grid.h;
  std::vector<cplx> A(N);
  const long M = static_cast<long>(std::ceil(band * P / two_pi)) + 1;
  for (long m = -M; m <= M; ++m) {
    const double xi = two_pi * static_cast<double>(m) / P;
    if (std::abs(xi) > band) continue;
    A[static_cast<std::size_t>((m + static_cast<long>(N)) % static_cast<long>(N))] =
        fhat(xi) * std::polar(1.0, xi * grid.lo);
  }
  fft::transform(A, +1);
  A.resize(grid.n);
  for (auto& v : A) v /= P;
  return A;
}

namespace {

void fill_frequency(Wavelet1D& w, const std::function<cplx(double)>& fhat) {
  const double dxi = two_pi / (static_cast<double>(w.grid.n) * w.grid.h);
  w.freq = Grid1D{-static_cast<double>(w.grid.n / 2) * dxi, dxi, w.grid.n};
  w.freq_samples.resize(w.grid.n);
  for (std::size_t i = 0; i < w.grid.n; ++i) w.freq_samples[i] = fhat(w.freq.at(i));
}

void check_grid(const Grid1D& grid, double need_band) {
  if (grid.n < 2 || grid.h <= 0.0) fail(ErrorCode::precondition, "wavelet grid is empty");
  if (grid.lo > -16.0 || grid.hi() < 16.0)
    fail(ErrorCode::precondition, "wavelet grid must cover [-16, 16]");
  if (need_band >= pi / grid.h)
    fail(ErrorCode::resolution, "grid spacing " + std::to_string(grid.h) +
                                    " cannot resolve the frequency cutoff");
}

} // namespace

std::pair<Wavelet1D, Wavelet1D> build_meyer(const Grid1D& grid) {
  check_grid(grid, 8.0 * pi / 3.0);
  std::pair<Wavelet1D, Wavelet1D> out;
  const std::function<cplx(double)> hats[2] = {[](double x) { return cplx(meyer_father_hat(x)); },
                                               [](double x) { return meyer_mother_hat(x); }};
  Wavelet1D* ws[2] = {&out.first, &out.second};
  for (int e = 0; e < 2; ++e) {
    Wavelet1D& w = *ws[e];
    w.family = Family::meyer;
    w.kind = static_cast<Kind>(e);
    w.grid = grid;
    const auto s = band_limited_samples(hats[e], e ? 8.0 * pi / 3.0 : 4.0 * pi / 3.0, grid);
    w.samples.resize(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) w.samples[i] = s[i].real();
    fill_frequency(w, hats[e]);
    w.support_lo = grid.lo;
    w.support_hi = grid.hi();
    w.band_lo = e ? two_pi / 3.0 : 0.0;
    w.band_hi = e ? 8.0 * pi / 3.0 : 4.0 * pi / 3.0;
    w.truncation_radius = std::min(-grid.lo, grid.hi());
  }
  return out;
}

std::pair<Wavelet1D, Wavelet1D> build_daubechies(int order, const Grid1D& grid) {
  if (grid.n < 2 || grid.h <= 0.0) fail(ErrorCode::precondition, "wavelet grid is empty");
  const auto basis = Basis::daubechies(order);
  if (grid.lo > basis->support_lo(Kind::mother) || grid.hi() < basis->support_hi(Kind::father))
    fail(ErrorCode::precondition, "grid does not cover the Daubechies supports");
  if (grid.h > 0.5) fail(ErrorCode::resolution, "grid spacing must be <= 1/2");
  std::pair<Wavelet1D, Wavelet1D> out;
  Wavelet1D* ws[2] = {&out.first, &out.second};
  for (int e = 0; e < 2; ++e) {
    Wavelet1D& w = *ws[e];
    const Kind k = static_cast<Kind>(e);
    w.family = Family::daubechies;
    w.order = order;
    w.kind = k;
    w.grid = grid;
    w.compact = true;
    w.support_lo = basis->support_lo(k);
    w.support_hi = basis->support_hi(k);
    w.samples.resize(grid.n);
    for (std::size_t i = 0; i < grid.n; ++i) w.samples[i] = basis->value(k, grid.at(i));
    fill_frequency(w, [&](double x) { return basis->fourier(k, x); });
    w.band_hi = std::numeric_limits<double>::infinity();
    w.truncation_radius = 0.5 * (w.support_hi - w.support_lo);
  }
  return out;
}

// ---------------------------------------------------------------- dilation

namespace {

void check_scale(int j, const std::vector<Grid1D>& target) {
  if (j < 0) fail(ErrorCode::precondition, "dilate_translate: j must be >= 0");
  for (const auto& g : target)
    if (std::ldexp(g.h, j) > 0.5)
      fail(ErrorCode::resolution, "target grid spacing cannot resolve scale 2^-" + std::to_string(j));
}

} // namespace

GridFunction dilate_translate(const GridFunction& f, int j, const IntVec& k,
                              const std::vector<Grid1D>& target) {
  f.check_consistent();
  const std::size_t n = f.dim();
  if (n == 0 || n > 4 || k.size() != n || target.size() != n)
    fail(ErrorCode::precondition, "dilate_translate: dimension mismatch");
  check_scale(j, target);
  GridFunction out(target);
  const auto fs = f.strides();
  const double amp = std::ldexp(1.0, static_cast<int>(n) * j / 2) *
                     ((static_cast<int>(n) * j) % 2 ? std::sqrt(2.0) : 1.0);
  const double s = std::ldexp(1.0, j);
  const IndexBox box(IntVec(n, 0), [&] {
    IntVec hi(n);
    for (std::size_t a = 0; a < n; ++a) hi[a] = static_cast<int>(target[a].n) - 1;
    return hi;
  }());
  double x[4];
  for (std::size_t t = 0; t < out.values.size(); ++t) {
    const IntVec i = box.at(t);
    for (std::size_t a = 0; a < n; ++a) x[a] = s * target[a].at(static_cast<std::size_t>(i[a])) - k[a];
    out.values[t] = amp * interpolate(f, fs, x);
  }
  return out;
}

namespace {

GridFunction outer(const std::vector<std::vector<cplx>>& factors, const std::vector<Grid1D>& axes) {
  GridFunction out(axes);
  const std::size_t n = axes.size();
  const auto st = out.strides();
  for (std::size_t t = 0; t < out.values.size(); ++t) {
    cplx v = 1.0;
    for (std::size_t a = 0; a < n; ++a) v *= factors[a][(t / st[a]) % axes[a].n];
    out.values[t] = v;
  }
  return out;
}

} // namespace

GridFunction dilate_translate(const Basis& basis, const IntVec& eps, int j, const IntVec& k,
                              const std::vector<Grid1D>& target) {
  const std::size_t n = eps.size();
  if (n == 0 || k.size() != n || target.size() != n)
    fail(ErrorCode::precondition, "dilate_translate: dimension mismatch");
  check_scale(j, target);
  const double amp = std::sqrt(std::ldexp(1.0, j));
  const double s = std::ldexp(1.0, j);
  std::vector<std::vector<cplx>> f(n);
  for (std::size_t a = 0; a < n; ++a) {
    f[a].resize(target[a].n);
    for (std::size_t i = 0; i < target[a].n; ++i)
      f[a][i] = amp * basis.value(kind_of(eps[a]), s * target[a].at(i) - k[a]);
  }
  return outer(f, target);
}

GridFunction tensor_wavelet(const IntVec& eps, const Wavelet1D& father, const Wavelet1D& mother) {
  if (eps.empty()) fail(ErrorCode::precondition, "tensor_wavelet: n must be >= 1");
  if (!(father.grid == mother.grid)) fail(ErrorCode::precondition, "tensor_wavelet: grid mismatch");
  std::vector<Grid1D> axes(eps.size(), father.grid);
  std::vector<std::vector<cplx>> f(eps.size());
  for (std::size_t a = 0; a < eps.size(); ++a) {
    const auto& src = eps[a] ? mother.samples : father.samples;
    f[a].assign(src.begin(), src.end());
  }
  return outer(f, axes);
}

// ---------------------------------------------------------------- Lemma-type constructions

FilterSequence modified_filter(const Basis& basis, int s) {
  if (s < 0) fail(ErrorCode::precondition, "modified_wavelet: s must be >= 0");
  if (basis.family() == Family::daubechies && s >= basis.spec().order)
    fail(ErrorCode::precondition, "modified_wavelet: s must be below the vanishing-moment order");
  const auto& g = basis.filter(Kind::mother);
  FilterSequence out;
  out.kind = Kind::mother;
  out.finite = g.finite;
  if (s == 0) return g;
  if (!g.finite) {
    // Meyer: c = S^s g has symbol G(w) / (e^{iw} - 1)^s with G(w) = 2 e^{-iw} phi_hat(2 wrap(w + pi)),
    // which vanishes for |w| < pi/3, so the quotient is smooth and c decays like g.
    const std::size_t N = 1 << 14;
    std::vector<cplx> A(N);
    for (std::size_t m = 0; m < N; ++m) {
      const double w = two_pi * static_cast<double>(m) / static_cast<double>(N);
      const double u = std::remainder(w + pi, two_pi);
      const double ph = meyer_father_hat(2.0 * u);
      if (ph == 0.0) continue;
      A[m] = 2.0 * std::polar(ph, -w) / std::pow(std::polar(1.0, w) - 1.0, s);
    }
    fft::transform(A, +1);
    out.lo = g.lo;
    double outside = 0.0;
    const long n = static_cast<long>(N);
    for (long k = -n / 2; k < n / 2; ++k) {
      const double v = A[static_cast<std::size_t>((k + n) % n)].real() / static_cast<double>(N);
      if (k >= g.lo && k <= g.hi()) out.taps.push_back(v);
      else outside = std::max(outside, std::abs(v));
    }
    out.truncation_error = std::max(g.truncation_error, outside);
    return out;
  }
  Sequence seq = Sequence::from_1d(g.lo, g.taps);
  for (int r = 0; r < s; ++r) {
    seq = summation_op(seq, IntVec{1}, 1e-10);
    const double scale = std::max(seq.max_abs(), 1e-300);
    if (std::abs(seq.values.back()) > 1e-10 * scale)
      fail(ErrorCode::tail, "modified_wavelet: filter moment does not vanish");
    seq.values.pop_back();
    seq.hi[0] -= 1;
    seq.open[0] = 0;
  }
  out.lo = seq.lo[0];
  for (const auto& v : seq.values) out.taps.push_back(v.real());
  while (out.taps.size() > 1 && std::abs(out.taps.back()) < 1e-15) out.taps.pop_back();
  while (out.taps.size() > 1 && std::abs(out.taps.front()) < 1e-15) {
    out.taps.erase(out.taps.begin());
    ++out.lo;
  }
  return out;
}

GridFunction modified_wavelet(const Basis& basis, const IntVec& eps, int s,
                              const std::vector<Grid1D>& axes) {
  const std::size_t n = eps.size();
  if (axes.size() != n) fail(ErrorCode::precondition, "modified_wavelet: axes/eps mismatch");
  std::size_t e0 = n;
  for (std::size_t a = 0; a < n; ++a)
    if (eps[a]) {
      e0 = a;
      break;
    }
  if (e0 == n) fail(ErrorCode::precondition, "modified_wavelet: epsilon must be nonzero");
  const FilterSequence c = modified_filter(basis, s);
  std::vector<std::vector<cplx>> f(n);
  for (std::size_t a = 0; a < n; ++a) {
    f[a].resize(axes[a].n);
    for (std::size_t i = 0; i < axes[a].n; ++i) {
      const double x = axes[a].at(i);
      if (a != e0) {
        f[a][i] = basis.value(kind_of(eps[a]), x);
        continue;
      }
      double acc = 0.0;
      for (int k = c.lo; k <= c.hi(); ++k) acc += c[k] * basis.value(Kind::father, 2.0 * x - k);
      f[a][i] = acc;
    }
  }
  return outer(f, axes);
}

cplx smoothed_derivative_hat(int beta, double xi) {
  const double phi = meyer_father_hat(xi);
  if (phi == 0.0 || beta == 0) return phi;
  const double half = 0.5 * xi;
  const double r = half == 0.0 ? 1.0 : half / std::sin(half);
  return std::pow(r, beta) * std::polar(1.0, -beta * half) * phi;
}

GridFunction smoothed_derivative(const Basis& basis, const IntVec& beta,
                                 const std::vector<Grid1D>& axes) {
  if (basis.family() != Family::meyer)
    fail(ErrorCode::unsupported, "smoothed_derivative needs a band-limited (Meyer) basis");
  if (axes.size() != beta.size() || beta.empty())
    fail(ErrorCode::precondition, "smoothed_derivative: axes/beta mismatch");
  std::vector<std::vector<cplx>> f(beta.size());
  for (std::size_t a = 0; a < beta.size(); ++a) {
    if (beta[a] < 0) fail(ErrorCode::precondition, "smoothed_derivative: beta must be >= 0");
    const int b = beta[a];
    f[a] = band_limited_samples([b](double x) { return smoothed_derivative_hat(b, x); },
                                4.0 * pi / 3.0, axes[a]);
  }
  return outer(f, axes);
}

// ---------------------------------------------------------------- I/O

namespace {

const char* family_name(Family f) { return f == Family::meyer ? "meyer" : "daubechies"; }

} // namespace

void export_wavelet(const Wavelet1D& w, const std::string& csv_path, const std::string& json_path) {
  std::ofstream csv(csv_path);
  if (!csv) fail(ErrorCode::io, "cannot write " + csv_path);
  csv.precision(17);
  csv << "x,re,im\n";
  for (std::size_t i = 0; i < w.samples.size(); ++i) csv << w.grid.at(i) << ',' << w.samples[i] << ",0\n";
  nlohmann::json j;
  j["family"] = family_name(w.family);
  j["order"] = w.order;
  j["kind"] = w.kind == Kind::father ? "father" : "mother";
  j["grid"] = {{"lo", w.grid.lo}, {"hi", w.grid.hi()}, {"h", w.grid.h}, {"n", w.grid.n}};
  j["compact"] = w.compact;
  j["support"] = {w.support_lo, w.support_hi};
  j["band"] = {w.band_lo, std::isfinite(w.band_hi) ? nlohmann::json(w.band_hi) : nlohmann::json(nullptr)};
  j["truncation_radius"] = w.truncation_radius;
  std::ofstream js(json_path);
  if (!js) fail(ErrorCode::io, "cannot write " + json_path);
  js << j.dump(2) << '\n';
}

Wavelet1D import_wavelet(const std::string& csv_path, const std::string& json_path) {
  std::ifstream js(json_path);
  if (!js) fail(ErrorCode::io, "cannot read " + json_path);
  nlohmann::json j;
  try {
    js >> j;
  } catch (const std::exception& e) {
    fail(ErrorCode::io, std::string("bad wavelet header: ") + e.what());
  }
  Wavelet1D w;
  w.family = j.at("family") == "meyer" ? Family::meyer : Family::daubechies;
  w.order = j.value("order", 0);
  w.kind = j.at("kind") == "father" ? Kind::father : Kind::mother;
  w.grid = Grid1D{j["grid"]["lo"].get<double>(), j["grid"]["h"].get<double>(), j["grid"]["n"].get<std::size_t>()};
  w.compact = j.value("compact", false);
  w.support_lo = j["support"][0];
  w.support_hi = j["support"][1];
  w.band_lo = j["band"][0];
  w.band_hi = j["band"][1].is_null() ? std::numeric_limits<double>::infinity() : j["band"][1].get<double>();
  w.truncation_radius = j.value("truncation_radius", 0.0);
  std::ifstream csv(csv_path);
  if (!csv) fail(ErrorCode::io, "cannot read " + csv_path);
  std::string line;
  std::getline(csv, line);
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string x, re;
    std::getline(ss, x, ',');
    std::getline(ss, re, ',');
    w.samples.push_back(std::stod(re));
  }
  if (w.samples.size() != w.grid.n) fail(ErrorCode::io, "wavelet CSV row count disagrees with header");
  // Frequency samples from a Riemann sum of the spatial samples.
  const double dxi = two_pi / (static_cast<double>(w.grid.n) * w.grid.h);
  w.freq = Grid1D{-static_cast<double>(w.grid.n / 2) * dxi, dxi, w.grid.n};
  w.freq_samples.assign(w.grid.n, cplx{});
  for (std::size_t q = 0; q < w.grid.n; ++q) {
    cplx s{};
    const double xi = w.freq.at(q);
    for (std::size_t i = 0; i < w.grid.n; ++i) s += w.samples[i] * std::polar(1.0, -xi * w.grid.at(i));
    w.freq_samples[q] = s * w.grid.h;
  }
  return w;
}

} // namespace wavsym
