#include "wavsym/operator.hpp"

#include "wavsym/fft.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <mutex>

namespace wavsym {

namespace {

std::size_t total(const std::vector<Grid1D>& ax) {
  std::size_t s = 1;
  for (const auto& g : ax) s *= g.n;
  return s;
}

std::vector<int> int_dims(const std::vector<Grid1D>& ax) {
  std::vector<int> d;
  for (const auto& g : ax) d.push_back(static_cast<int>(g.n));
  return d;
}

long freq_index(std::size_t i, std::size_t N) {
  return i < (N + 1) / 2 ? static_cast<long>(i) : static_cast<long>(i) - static_cast<long>(N);
}

// Unflatten t over axes (row-major) into per-axis indices.
void unflatten(std::size_t t, const std::vector<Grid1D>& ax, std::size_t* idx) {
  for (std::size_t a = ax.size(); a-- > 0;) {
    idx[a] = t % ax[a].n;
    t /= ax[a].n;
  }
}

void check_axes(const std::vector<Grid1D>& ax, const char* what) {
  if (ax.empty() || ax.size() > 2) fail(ErrorCode::precondition, std::string(what) + ": dimension must be 1 or 2");
  for (const auto& g : ax)
    if (g.n < 2 || !(g.h > 0)) fail(ErrorCode::config, std::string(what) + ": degenerate grid");
}

double smooth_step(double u) { // 0 at u <= 0, 1 at u >= 1, C-infinity
  if (u <= 0) return 0.0;
  if (u >= 1) return 1.0;
  const double a = std::exp(-1.0 / u), b = std::exp(-1.0 / (1.0 - u));
  return a / (a + b);
}

// Apply f to every 1-D fiber of a row-major array along one axis.
template <class F>
void along_axis(std::vector<cplx>& v, const std::vector<std::size_t>& dims, std::size_t axis, F&& f) {
  std::size_t outer = 1, inner = 1;
  for (std::size_t a = 0; a < axis; ++a) outer *= dims[a];
  for (std::size_t a = axis + 1; a < dims.size(); ++a) inner *= dims[a];
  const std::size_t n = dims[axis];
  std::vector<cplx> fiber(n);
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t in = 0; in < inner; ++in) {
      cplx* base = v.data() + o * n * inner + in;
      for (std::size_t i = 0; i < n; ++i) fiber[i] = base[i * inner];
      f(fiber);
      for (std::size_t i = 0; i < n; ++i) base[i * inner] = fiber[i];
    }
}

// p-th derivative along one axis of a periodic sampled array.
void spectral_derivative(std::vector<cplx>& v, const std::vector<std::size_t>& dims, std::size_t axis,
                         const Grid1D& g, int p) {
  if (p == 0) return;
  const std::size_t N = g.n;
  std::vector<cplx> mult(N);
  for (std::size_t i = 0; i < N; ++i) {
    const long m = freq_index(i, N);
    if (N % 2 == 0 && m == -static_cast<long>(N / 2) && p % 2) continue; // Nyquist mode has no odd derivative
    mult[i] = std::pow(cplx(0.0, grid_frequency(g, i)), p) / static_cast<double>(N);
  }
  along_axis(v, dims, axis, [&](std::vector<cplx>& f) {
    fft::transform(f, -1);
    for (std::size_t i = 0; i < N; ++i) f[i] *= mult[i];
    fft::transform(f, +1);
  });
}

std::vector<IntVec> multi_upto(int n, int max_order) {
  std::vector<IntVec> out;
  const IndexBox box(IntVec(static_cast<std::size_t>(n), 0), IntVec(static_cast<std::size_t>(n), max_order));
  for (int s = 0; s <= max_order; ++s)
    for (std::size_t t = 0; t < box.size(); ++t) {
      const IntVec v = box.at(t);
      int sum = 0;
      for (int x : v) sum += x;
      if (sum == s) out.push_back(v);
    }
  return out;
}

int order_of(const IntVec& v) {
  int s = 0;
  for (int x : v) s += x;
  return s;
}

std::string grid_json(const std::vector<Grid1D>& ax) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& g : ax) j.push_back({{"lo", g.lo}, {"h", g.h}, {"n", g.n}});
  return j.dump();
}

} // namespace

double grid_frequency(const Grid1D& g, std::size_t i) {
  return 2.0 * pi * static_cast<double>(freq_index(i, g.n)) / (static_cast<double>(g.n) * g.h);
}

Grid1D centered_grid(double h, std::size_t n) {
  return Grid1D{-static_cast<double>(n / 2) * h, h, n};
}

// ---------------------------------------------------------------- sampled functions

SampledFunction::SampledFunction(std::vector<Grid1D> axes, std::vector<cplx> values)
    : axes_(std::move(axes)), values_(std::move(values)) {
  check_axes(axes_, "SampledFunction");
  if (values_.size() != total(axes_)) fail(ErrorCode::config, "SampledFunction: value count does not match the grid");
  hat_ = values_;
  fft::transform_nd(hat_, int_dims(axes_), -1);
  std::size_t idx[4];
  double vol = 1.0;
  for (const auto& g : axes_) vol *= g.h;
  for (std::size_t t = 0; t < hat_.size(); ++t) {
    unflatten(t, axes_, idx);
    double ph = 0.0;
    for (std::size_t a = 0; a < axes_.size(); ++a) ph -= axes_[a].lo * grid_frequency(axes_[a], idx[a]);
    hat_[t] *= vol * std::polar(1.0, ph);
  }
}

SampledFunction SampledFunction::sample(std::vector<Grid1D> axes, const std::function<cplx(const double*)>& f) {
  check_axes(axes, "SampledFunction");
  std::vector<cplx> v(total(axes));
  std::size_t idx[4];
  double x[4];
  for (std::size_t t = 0; t < v.size(); ++t) {
    unflatten(t, axes, idx);
    for (std::size_t a = 0; a < axes.size(); ++a) x[a] = axes[a].at(idx[a]);
    v[t] = f(x);
  }
  return SampledFunction(std::move(axes), std::move(v));
}

double SampledFunction::l2_norm() const {
  double s = 0.0, vol = 1.0;
  for (const auto& v : values_) s += std::norm(v);
  for (const auto& g : axes_) vol *= g.h;
  return std::sqrt(s * vol);
}

GridFunction SampledFunction::as_grid_function() const {
  GridFunction g(axes_);
  g.values = values_;
  return g;
}

double relative_l2(const SampledFunction& a, const SampledFunction& b) {
  if (a.size() != b.size()) fail(ErrorCode::config, "relative_l2: size mismatch");
  double d = 0.0, r = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    d += std::norm(a.values()[i] - b.values()[i]);
    r += std::norm(b.values()[i]);
  }
  return r > 0 ? std::sqrt(d / r) : std::sqrt(d);
}

SampledFunction apply_direct(const SymbolField& sigma, const SampledFunction& f, const ApplyOptions& opt) {
  const auto& ax = f.axes();
  const int n = f.dim();
  if (sigma.dim() != n) fail(ErrorCode::config, "apply_direct: symbol and function dimensions differ");
  const auto& hat = f.spectrum();
  const std::size_t N = hat.size();

  double peak = 0.0, outer = 0.0;
  std::size_t idx[4];
  std::vector<double> xi(N * static_cast<std::size_t>(n));
  for (std::size_t t = 0; t < N; ++t) {
    unflatten(t, ax, idx);
    bool edge = false;
    for (int a = 0; a < n; ++a) {
      xi[t * n + a] = grid_frequency(ax[a], idx[a]);
      const double half = static_cast<double>(ax[a].n) / 2.0;
      edge = edge || std::abs(static_cast<double>(freq_index(idx[a], ax[a].n))) >= (1.0 - opt.alias_band) * half;
    }
    const double v = std::abs(hat[t]);
    peak = std::max(peak, v);
    if (edge) outer = std::max(outer, v);
  }
  if (peak > 0 && outer > opt.alias_tol * peak)
    fail(ErrorCode::aliasing, "input has spectral mass " + std::to_string(outer / peak) +
                                  " (relative) near the Nyquist frequency; refine the grid");

  double scale = 1.0;
  for (const auto& g : ax) scale /= static_cast<double>(g.n) * g.h;
  std::vector<cplx> out(N);
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < N; ++i) {
    std::size_t id[4];
    double x[2];
    unflatten(i, ax, id);
    for (int a = 0; a < n; ++a) x[a] = ax[a].at(id[a]);
    cplx s = 0.0;
    for (std::size_t t = 0; t < N; ++t) {
      if (hat[t] == cplx{}) continue;
      const double* w = xi.data() + t * n;
      double ph = 0.0;
      for (int a = 0; a < n; ++a) ph += x[a] * w[a];
      s += std::polar(1.0, ph) * sigma(x, w) * hat[t];
    }
    out[i] = s * scale;
  }
  return SampledFunction(ax, std::move(out));
}

// ---------------------------------------------------------------- kernels

std::vector<std::size_t> KernelGrid::dims() const {
  std::vector<std::size_t> d;
  for (const auto& g : x_axes) d.push_back(g.n);
  for (const auto& g : z_axes) d.push_back(g.n);
  return d;
}

std::size_t KernelGrid::nx() const { return total(x_axes); }
std::size_t KernelGrid::nz() const { return total(z_axes); }

double KernelGrid::max_abs() const {
  double m = 0.0;
  for (const auto& v : values) m = std::max(m, std::abs(v));
  return m;
}

void KernelGrid::write(const std::string& path) const {
  std::ofstream os(path);
  if (!os) fail(ErrorCode::io, "cannot write " + path);
  nlohmann::json h{{"kind", "kernel"},
                   {"provenance", provenance},
                   {"x_axes", nlohmann::json::parse(grid_json(x_axes))},
                   {"z_axes", nlohmann::json::parse(grid_json(z_axes))},
                   {"tail_bound", tail_bound},
                   {"convention", "k(x,z) = (2pi)^-n int sigma(x,xi) e^{i z xi} dxi"}};
  os << h.dump() << '\n';
  const int d = n();
  for (int a = 0; a < d; ++a) os << "x" << a + 1 << ',';
  for (int a = 0; a < d; ++a) os << "z" << a + 1 << ',';
  os << "re,im\n";
  os << std::setprecision(17);
  std::size_t ix[2], iz[2];
  for (std::size_t i = 0; i < nx(); ++i) {
    unflatten(i, x_axes, ix);
    for (std::size_t q = 0; q < nz(); ++q) {
      unflatten(q, z_axes, iz);
      for (int a = 0; a < d; ++a) os << x_axes[a].at(ix[a]) << ',';
      for (int a = 0; a < d; ++a) os << z_axes[a].at(iz[a]) << ',';
      const cplx v = at(i, q);
      os << v.real() << ',' << v.imag() << '\n';
    }
  }
}

namespace {

void check_centered(const std::vector<Grid1D>& z) {
  for (const auto& g : z)
    if (std::abs(g.lo + static_cast<double>(g.n / 2) * g.h) > 1e-12 * g.h * static_cast<double>(g.n))
      fail(ErrorCode::config, "z grid must be centered: lo = -floor(n/2) h (see centered_grid)");
}

} // namespace

KernelGrid kernel_of(const SymbolField& sigma, const std::vector<Grid1D>& x_axes, const std::vector<Grid1D>& z_axes,
                     const KernelOptions& opt) {
  check_axes(x_axes, "kernel_of");
  check_axes(z_axes, "kernel_of");
  const int n = sigma.dim();
  if (static_cast<int>(x_axes.size()) != n || static_cast<int>(z_axes.size()) != n)
    fail(ErrorCode::config, "kernel_of: grid dimensions do not match the symbol");
  check_centered(z_axes);
  if (!(opt.taper_start > 0 && opt.taper_start < 1)) fail(ErrorCode::config, "taper_start must lie in (0, 1)");

  KernelGrid k;
  k.x_axes = x_axes;
  k.z_axes = z_axes;
  const std::size_t NX = k.nx(), NZ = k.nz();
  k.values.assign(NX * NZ, cplx{});

  std::vector<double> xi(NZ * n), taper(NZ, 1.0);
  std::vector<char> shell(NZ, 0);
  std::size_t idx[4];
  for (std::size_t t = 0; t < NZ; ++t) {
    unflatten(t, z_axes, idx);
    for (int a = 0; a < n; ++a) {
      const auto& g = z_axes[a];
      xi[t * n + a] = grid_frequency(g, idx[a]);
      const double r = std::abs(xi[t * n + a]) / (pi / g.h);
      if (opt.tempered) taper[t] *= smooth_step((1.0 - r) / (1.0 - opt.taper_start));
      if (std::abs(freq_index(idx[a], g.n)) >= static_cast<long>(g.n / 2) - 1) shell[t] = 1;
    }
  }
  double scale = 1.0;
  for (const auto& g : z_axes) scale /= static_cast<double>(g.n) * g.h;
  // z index q holds lag (q - floor(N/2)); the inverse FFT returns lags mod N
  std::vector<std::size_t> src(NZ);
  for (std::size_t q = 0; q < NZ; ++q) {
    unflatten(q, z_axes, idx);
    std::size_t s = 0;
    for (int a = 0; a < n; ++a) {
      const std::size_t N = z_axes[a].n;
      s = s * N + (idx[a] + N - N / 2) % N;
    }
    src[q] = s;
  }

  double peak = 0.0, edge = 0.0;
  std::exception_ptr err;
  std::mutex mu;
#pragma omp parallel for schedule(dynamic) reduction(max : peak, edge)
  for (std::size_t i = 0; i < NX; ++i) {
    try {
      std::size_t id[4];
      double x[2];
      unflatten(i, x_axes, id);
      for (int a = 0; a < n; ++a) x[a] = x_axes[a].at(id[a]);
      std::vector<cplx> c(NZ);
      for (std::size_t t = 0; t < NZ; ++t) {
        const cplx s = sigma(x, xi.data() + t * n);
        const double a = std::abs(s);
        peak = std::max(peak, a);
        if (shell[t]) edge = std::max(edge, a);
        c[t] = s * taper[t];
      }
      fft::transform_nd(c, int_dims(z_axes), +1);
      for (std::size_t q = 0; q < NZ; ++q) k.values[i * NZ + q] = c[src[q]] * scale;
    } catch (...) {
      std::lock_guard<std::mutex> lock(mu);
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);
  k.tail_bound = peak > 0 ? edge / peak : 0.0;
  if (!opt.tempered && k.tail_bound > opt.tail_tol)
    fail(ErrorCode::tail, "symbol is " + std::to_string(k.tail_bound) +
                              " of its peak at the Nyquist frequency; refine the z grid or request tempering");
  return k;
}

SampledFunction apply_kernel(const KernelGrid& k, const SampledFunction& f) {
  const int n = f.dim();
  if (k.n() != n) fail(ErrorCode::config, "apply_kernel: dimension mismatch");
  for (int a = 0; a < n; ++a) {
    if (!(k.x_axes[a] == f.axes()[a])) fail(ErrorCode::config, "apply_kernel: kernel x grid differs from f's grid");
    if (std::abs(k.z_axes[a].h - f.axes()[a].h) > 1e-12 * f.axes()[a].h)
      fail(ErrorCode::config, "apply_kernel: z spacing must equal the grid spacing of f");
  }
  const auto& ax = f.axes();
  const std::size_t NX = f.size(), NZ = k.nz();
  double vol = 1.0;
  for (const auto& g : ax) vol *= g.h;
  std::vector<cplx> out(NX);
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < NX; ++i) {
    std::size_t ix[2], iz[2];
    unflatten(i, ax, ix);
    cplx s = 0.0;
    for (std::size_t q = 0; q < NZ; ++q) {
      unflatten(q, k.z_axes, iz);
      std::size_t src = 0;
      for (int a = 0; a < n; ++a) {
        const long N = static_cast<long>(ax[a].n);
        const long lag = static_cast<long>(iz[a]) - static_cast<long>(k.z_axes[a].n / 2);
        long r = (static_cast<long>(ix[a]) - lag) % N;
        if (r < 0) r += N;
        src = src * ax[a].n + static_cast<std::size_t>(r);
      }
      s += k.at(i, q) * f.values()[src];
    }
    out[i] = s * vol;
  }
  return SampledFunction(ax, std::move(out));
}

KernelGrid KernelSplit::total() const {
  KernelGrid t = k1;
  for (std::size_t i = 0; i < t.values.size(); ++i) t.values[i] += k2.values[i] + k3.values[i];
  t.provenance = "sum";
  return t;
}

KernelSplit kernel_split(const CoefficientTable& table, const Basis& basis, const std::vector<Grid1D>& x_axes,
                         const std::vector<Grid1D>& z_axes) {
  if (table.layout != Layout::product) fail(ErrorCode::layout, "kernel_split needs a product-layout table");
  if (basis.family() != Family::meyer)
    fail(ErrorCode::unsupported, "kernel_split relies on compact Fourier support: Meyer basis only");
  const int n = table.n;
  check_axes(x_axes, "kernel_split");
  check_axes(z_axes, "kernel_split");
  if (static_cast<int>(x_axes.size()) != n || static_cast<int>(z_axes.size()) != n)
    fail(ErrorCode::config, "kernel_split: grid dimensions do not match the table");

  KernelGrid base;
  base.x_axes = x_axes;
  base.z_axes = z_axes;
  const std::size_t NX = base.nx(), NZ = base.nz();
  Eigen::MatrixXcd K[3] = {Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(NX), static_cast<Eigen::Index>(NZ)),
                           Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(NX), static_cast<Eigen::Index>(NZ)),
                           Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(NX), static_cast<Eigen::Index>(NZ))};
  const double norm = std::pow(2.0 * pi, -n);
  std::size_t idx[2];

  for (const auto& b : table.blocks) {
    bool any = false;
    for (const auto& v : b.values) any = any || v != cplx{};
    if (!any) continue;
    IntVec xlo(b.lo.begin(), b.lo.begin() + n), xhi(b.hi.begin(), b.hi.begin() + n);
    IntVec zlo(b.lo.begin() + n, b.lo.end()), zhi(b.hi.begin() + n, b.hi.end());
    const IndexBox xbox(xlo, xhi), zbox(zlo, zhi);
    const auto KX = static_cast<Eigen::Index>(xbox.size()), KZ = static_cast<Eigen::Index>(zbox.size());

    Eigen::MatrixXcd U(static_cast<Eigen::Index>(NX), KX);
    const double sx = std::ldexp(1.0, b.j);
    for (std::size_t i = 0; i < NX; ++i) {
      unflatten(i, x_axes, idx);
      for (Eigen::Index r = 0; r < KX; ++r) {
        const IntVec k = xbox.at(static_cast<std::size_t>(r));
        double v = 1.0;
        for (int a = 0; a < n; ++a)
          v *= std::sqrt(sx) * basis.value(kind_of(b.eps >> a & 1u), sx * x_axes[a].at(idx[a]) - k[a]);
        U(static_cast<Eigen::Index>(i), r) = v;
      }
    }
    Eigen::MatrixXcd V(static_cast<Eigen::Index>(NZ), KZ);
    const double sz = std::ldexp(1.0, -b.j2);
    for (std::size_t q = 0; q < NZ; ++q) {
      unflatten(q, z_axes, idx);
      cplx hat = 1.0;
      double z[2];
      for (int a = 0; a < n; ++a) {
        z[a] = z_axes[a].at(idx[a]);
        hat *= std::sqrt(sz) * basis.fourier(kind_of(b.eps2 >> a & 1u), -sz * z[a]);
      }
      for (Eigen::Index c = 0; c < KZ; ++c) {
        if (hat == cplx{}) {
          V(static_cast<Eigen::Index>(q), c) = 0.0;
          continue;
        }
        const IntVec k2 = zbox.at(static_cast<std::size_t>(c));
        double ph = 0.0;
        for (int a = 0; a < n; ++a) ph += sz * k2[a] * z[a];
        V(static_cast<Eigen::Index>(q), c) = hat * std::polar(1.0, ph);
      }
    }
    Eigen::MatrixXcd A(KX, KZ);
    for (Eigen::Index r = 0; r < KX; ++r)
      for (Eigen::Index c = 0; c < KZ; ++c) A(r, c) = b.values[static_cast<std::size_t>(r * KZ + c)];
    const int piece = b.eps2 == 0 ? 2 : (b.eps != 0 ? 0 : 1);
    K[piece].noalias() += norm * (U * A) * V.transpose();
  }

  KernelSplit out;
  KernelGrid* dst[3] = {&out.k1, &out.k2, &out.k3};
  const char* tags[3] = {"k1", "k2", "k3"};
  for (int p = 0; p < 3; ++p) {
    *dst[p] = base;
    dst[p]->provenance = tags[p];
    dst[p]->values.resize(NX * NZ);
    for (std::size_t i = 0; i < NX; ++i)
      for (std::size_t q = 0; q < NZ; ++q)
        dst[p]->values[i * NZ + q] = K[p](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(q));
  }
  return out;
}

// ---------------------------------------------------------------- periodic wavelet analysis

std::vector<ScaledCoefficient> periodic_coefficients(const GridFunction& f, const Basis& basis, int jmax) {
  const std::size_t n = f.dim();
  if (n < 1 || n > 2) fail(ErrorCode::precondition, "periodic_coefficients: dimension must be 1 or 2");
  if (jmax < 0) fail(ErrorCode::config, "jmax must be >= 0");
  std::vector<int> p(n);
  std::vector<double> P(n);
  for (std::size_t a = 0; a < n; ++a) {
    const auto& g = f.axes[a];
    const double lg = -std::log2(g.h);
    p[a] = static_cast<int>(std::lround(lg));
    if (std::abs(lg - p[a]) > 1e-9 || p[a] < jmax)
      fail(ErrorCode::resolution, "periodic analysis needs a dyadic spacing <= 2^-jmax");
    P[a] = static_cast<double>(g.n) * g.h;
    if (std::abs(P[a] - std::round(P[a])) > 1e-9 || P[a] < 1)
      fail(ErrorCode::config, "periodic analysis needs an integer period");
  }
  std::vector<int> dims;
  for (const auto& g : f.axes) dims.push_back(static_cast<int>(g.n));
  std::vector<cplx> F = f.values;
  fft::transform_nd(F, dims, -1);
  double vol = 1.0;
  for (const auto& g : f.axes) vol *= g.h;

  std::vector<ScaledCoefficient> out;
  for (int j = 0; j <= jmax; ++j) {
    const double s = std::ldexp(1.0, j);
    // periodized 2^{j/2} Phi^e(2^j x) on each axis
    std::vector<std::vector<double>> w[2];
    for (int e = 0; e < 2; ++e) {
      const Kind kd = static_cast<Kind>(e);
      w[e].resize(n);
      for (std::size_t a = 0; a < n; ++a) {
        const auto& g = f.axes[a];
        w[e][a].assign(g.n, 0.0);
        for (std::size_t t = 0; t < g.n; ++t) {
          const double x = g.at(t);
          const long r0 = static_cast<long>(std::ceil((basis.support_lo(kd) / s - x) / P[a]));
          const long r1 = static_cast<long>(std::floor((basis.support_hi(kd) / s - x) / P[a]));
          double v = 0.0;
          for (long r = r0; r <= r1; ++r) v += basis.value(kd, s * (x + r * P[a]));
          w[e][a][t] = std::sqrt(s) * v;
        }
      }
    }
    for (unsigned eps = 0; eps < (1u << n); ++eps) {
      if (j > 0 && eps == 0) continue;
      std::vector<cplx> W(f.values.size());
      std::size_t id[2];
      for (std::size_t t = 0; t < W.size(); ++t) {
        unflatten(t, f.axes, id);
        double v = 1.0;
        for (std::size_t a = 0; a < n; ++a) v *= w[eps >> a & 1u][a][id[a]];
        W[t] = v;
      }
      fft::transform_nd(W, dims, -1);
      for (std::size_t t = 0; t < W.size(); ++t) W[t] = F[t] * std::conj(W[t]);
      fft::transform_nd(W, dims, +1);
      const double norm = vol / static_cast<double>(W.size());
      // translations k 2^-j are every (2^-j / h)-th lag
      std::vector<std::size_t> stride(n), count(n);
      for (std::size_t a = 0; a < n; ++a) {
        stride[a] = std::size_t{1} << (p[a] - j);
        count[a] = f.axes[a].n / stride[a];
      }
      if (n == 1) {
        for (std::size_t k = 0; k < count[0]; ++k) out.push_back({j, W[k * stride[0]] * norm});
      } else {
        for (std::size_t k0 = 0; k0 < count[0]; ++k0)
          for (std::size_t k1 = 0; k1 < count[1]; ++k1)
            out.push_back({j, W[k0 * stride[0] * f.axes[1].n + k1 * stride[1]] * norm});
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------- kernel decay

DecayReport verify_kernel_decay(const KernelGrid& k, const ClassParams& cp, int alpha_max, int beta_max,
                                const std::vector<double>& Nlist, const KernelDecayOptions& opt) {
  const int n = k.n();
  if (alpha_max < 0 || beta_max < 0) fail(ErrorCode::config, "alpha_max and beta_max must be >= 0");
  const auto basis = Basis::get(parse_basis(opt.basis));
  DecayReport rep;
  rep.condition = "KernelDecay";
  rep.params = {{"m", cp.m},          {"rho", cp.rho}, {"delta", cp.delta}, {"alpha_max", alpha_max},
                {"beta_max", beta_max}, {"N", Nlist},   {"provenance", k.provenance}};
  const std::size_t NX = k.nx(), NZ = k.nz();
  const auto dims = k.dims();

  std::vector<double> zabs(NZ);
  std::size_t idx[2];
  for (std::size_t q = 0; q < NZ; ++q) {
    unflatten(q, k.z_axes, idx);
    double r = 0.0;
    for (int a = 0; a < n; ++a) r += k.z_axes[a].at(idx[a]) * k.z_axes[a].at(idx[a]);
    zabs[q] = std::sqrt(r);
  }
  // ladder |z| = 2^-i for i >= 1 on the grid
  std::vector<std::pair<int, std::vector<std::size_t>>> ladder;
  for (int i = 1; i < 60; ++i) {
    const double r = std::ldexp(1.0, -i);
    std::vector<std::size_t> pts;
    for (std::size_t q = 0; q < NZ; ++q)
      if (std::abs(zabs[q] - r) < 1e-12) pts.push_back(q);
    if (pts.empty()) break;
    ladder.emplace_back(i, std::move(pts));
  }
  bool far = false;
  for (double z : zabs) far = far || z >= 0.5 + 1e-12;
  if (!far || ladder.size() < 2)
    fail(ErrorCode::coverage, "kernel z grid must cover |z| > 1/2 and the ladder |z| = 1/2, 1/4 (dyadic spacing)");

  int jx = 60;
  for (const auto& g : k.x_axes) jx = std::min(jx, static_cast<int>(std::lround(-std::log2(g.h))) - 2);
  jx = std::max(jx, 0);

  // rounding level of a spectral derivative of the sampled kernel
  const double kmax = k.max_abs();
  auto roundoff = [&](const IntVec& alpha, const IntVec& beta) {
    double r = 1e-13 * kmax;
    for (int a = 0; a < n; ++a)
      r *= std::pow(pi / k.x_axes[a].h, alpha[a]) * std::pow(pi / k.z_axes[a].h, beta[a]);
    return r;
  };

  const auto alphas = multi_upto(n, alpha_max);
  const auto betas = multi_upto(n, beta_max);
  std::vector<DecayEntry> region1, region2;

  for (const auto& beta : betas) {
    std::vector<cplx> Db = k.values;
    for (int a = 0; a < n; ++a)
      spectral_derivative(Db, dims, static_cast<std::size_t>(n + a), k.z_axes[a], beta[a]);

    // region (i)
    for (const auto& alpha : alphas) {
      std::vector<cplx> D = Db;
      for (int a = 0; a < n; ++a) spectral_derivative(D, dims, static_cast<std::size_t>(a), k.x_axes[a], alpha[a]);
      std::vector<double> env(NZ, 0.0);
      for (std::size_t i = 0; i < NX; ++i)
        for (std::size_t q = 0; q < NZ; ++q) env[q] = std::max(env[q], std::abs(D[i * NZ + q]));
      double peak = 0.0;
      for (std::size_t q = 0; q < NZ; ++q)
        if (zabs[q] >= 0.5 - 1e-12) peak = std::max(peak, env[q]);
      if (peak <= roundoff(alpha, beta)) peak = 0.0;
      std::vector<std::size_t> use;
      double zr = 0.5;
      for (std::size_t q = 0; q < NZ; ++q)
        if (zabs[q] >= 0.5 - 1e-12 && peak > 0 && env[q] >= opt.noise_floor * peak) {
          use.push_back(q);
          zr = std::max(zr, zabs[q]);
        }
      const double zmid = 0.5 * (0.5 + zr);
      double slope = peak == 0.0 ? -inf : 0.0;
      {
        // tail: the outer half of the usable range
        double sx = 0, sy = 0, sxx = 0, sxy = 0, m = 0;
        for (std::size_t q : use) {
          if (zabs[q] < zmid) continue;
          const double X = std::log(1.0 + zabs[q]), Y = std::log(env[q]);
          sx += X;
          sy += Y;
          sxx += X * X;
          sxy += X * Y;
          m += 1;
        }
        if (m >= 2 && m * sxx - sx * sx > 1e-300) slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
      }
      for (double N : Nlist) {
        DecayEntry e;
        e.branch = "region_i";
        e.alpha = order_of(alpha);
        e.beta = order_of(beta);
        e.alpha_multi = alpha;
        e.beta_multi = beta;
        e.order = N;
        e.slope = slope;
        double cfar = 0.0, cnear = 0.0;
        for (std::size_t q : use) {
          double& c = zabs[q] >= zmid ? cfar : cnear;
          c = std::max(c, env[q] * std::pow(1.0 + zabs[q], N));
        }
        e.constant = std::max(cfar, cnear);
        e.violation_ratio = e.constant == 0.0 ? 0.0 : (cnear > 0 ? cfar / cnear : inf);
        region1.push_back(std::move(e));
      }
    }

    // region (ii): Besov norms in x of z-slices on the ladder
    std::vector<std::vector<double>> norms(static_cast<std::size_t>(alpha_max + 1),
                                           std::vector<double>(ladder.size(), 0.0));
    for (std::size_t r = 0; r < ladder.size(); ++r)
      for (std::size_t q : ladder[r].second) {
        GridFunction slice(k.x_axes);
        for (std::size_t i = 0; i < NX; ++i) slice.values[i] = Db[i * NZ + q];
        const auto coeffs = periodic_coefficients(slice, *basis, jx);
        for (int a = 0; a <= alpha_max; ++a)
          norms[static_cast<std::size_t>(a)][r] =
              std::max(norms[static_cast<std::size_t>(a)][r], besov_seminorm(coeffs, n, a, inf, inf));
      }
    for (int a = 0; a <= alpha_max; ++a) {
      const auto& nv = norms[static_cast<std::size_t>(a)];
      double slope = 0.0;
      {
        double sx = 0, sy = 0, sxx = 0, sxy = 0, m = 0;
        for (std::size_t r = 0; r < ladder.size(); ++r) {
          if (!(nv[r] > 0)) continue;
          const double X = -ladder[r].first * std::log(2.0), Y = std::log(nv[r]);
          sx += X;
          sy += Y;
          sxx += X * X;
          sxy += X * Y;
          m += 1;
        }
        if (m >= 2) slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
      }
      for (double N : Nlist) {
        DecayEntry e;
        e.branch = "region_ii";
        e.alpha = a;
        e.beta = order_of(beta);
        e.beta_multi = beta;
        e.order = N;
        e.slope = slope;
        e.in_hypothesis = n + cp.m + cp.delta * a + std::max(1.0, cp.rho) * e.beta < N * cp.rho;
        double inner = 0.0, rest = 0.0;
        for (std::size_t r = 0; r < ladder.size(); ++r) {
          const double v = nv[r] * std::pow(std::ldexp(1.0, -ladder[r].first), N);
          double& c = r + 1 == ladder.size() ? inner : rest;
          c = std::max(c, v);
        }
        e.constant = std::max(inner, rest);
        e.violation_ratio = e.constant == 0.0 ? 0.0 : (rest > 0 ? inner / rest : inf);
        if (e.constant > 0.0 && slope + N < opt.growth_margin) e.constant = e.violation_ratio = inf;
        region2.push_back(std::move(e));
      }
    }
  }
  for (auto& e : region1) rep.entries.push_back(std::move(e));
  for (auto& e : region2) rep.entries.push_back(std::move(e));
  return rep;
}

// ---------------------------------------------------------------- matrices

OperatorMatrix discretize(const SymbolField& sigma, const std::vector<Grid1D>& in_axes,
                          const std::vector<Grid1D>& out_axes, std::size_t max_entries) {
  check_axes(in_axes, "discretize");
  check_axes(out_axes, "discretize");
  const int n = sigma.dim();
  if (static_cast<int>(in_axes.size()) != n || static_cast<int>(out_axes.size()) != n)
    fail(ErrorCode::config, "discretize: grid dimensions do not match the symbol");
  const std::size_t NI = total(in_axes), NO = total(out_axes);
  if (NI * NO > max_entries)
    fail(ErrorCode::size, "operator matrix " + std::to_string(NO) + "x" + std::to_string(NI) + " exceeds the cap of " +
                              std::to_string(max_entries) + " entries");
  OperatorMatrix op;
  op.in_axes = in_axes;
  op.out_axes = out_axes;
  op.M.resize(static_cast<Eigen::Index>(NO), static_cast<Eigen::Index>(NI));

  std::vector<double> xi(NI * n);
  std::size_t idx[2];
  for (std::size_t t = 0; t < NI; ++t) {
    unflatten(t, in_axes, idx);
    for (int a = 0; a < n; ++a) xi[t * n + a] = grid_frequency(in_axes[a], idx[a]);
  }
  const auto dims = int_dims(in_axes);
  std::exception_ptr err;
  std::mutex mu;
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < NO; ++i) {
    try {
      std::size_t id[2];
      double y[2];
      unflatten(i, out_axes, id);
      for (int a = 0; a < n; ++a) y[a] = out_axes[a].at(id[a]);
      std::vector<cplx> c(NI);
      for (std::size_t t = 0; t < NI; ++t) {
        const double* w = xi.data() + t * n;
        double ph = 0.0;
        for (int a = 0; a < n; ++a) ph += (y[a] - in_axes[a].lo) * w[a];
        c[t] = sigma(y, w) * std::polar(1.0, ph);
      }
      fft::transform_nd(c, dims, -1);
      for (std::size_t t = 0; t < NI; ++t)
        op.M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)) = c[t] / static_cast<double>(NI);
    } catch (...) {
      std::lock_guard<std::mutex> lock(mu);
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);
  return op;
}

SampledFunction OperatorMatrix::apply(const SampledFunction& f) const {
  if (f.axes() != in_axes) fail(ErrorCode::config, "OperatorMatrix::apply: input grid mismatch");
  Eigen::Map<const Eigen::VectorXcd> v(f.values().data(), static_cast<Eigen::Index>(f.size()));
  const Eigen::VectorXcd r = M * v;
  return SampledFunction(out_axes, std::vector<cplx>(r.data(), r.data() + r.size()));
}

double OperatorMatrix::l2_norm() const {
  double hin = 1.0, hout = 1.0;
  for (const auto& g : in_axes) hin *= g.h;
  for (const auto& g : out_axes) hout *= g.h;
  return std::sqrt(hout / hin) * spectral_norm(M);
}

void OperatorMatrix::write(const std::string& path) const {
  std::ofstream os(path);
  if (!os) fail(ErrorCode::io, "cannot write " + path);
  nlohmann::json h{{"kind", "operator_matrix"},
                   {"rows", M.rows()},
                   {"cols", M.cols()},
                   {"in_axes", nlohmann::json::parse(grid_json(in_axes))},
                   {"out_axes", nlohmann::json::parse(grid_json(out_axes))},
                   {"convention", "(Mf)_i = sigma(x,D)f(y_i), periodic trapezoid quadrature"},
                   {"layout", "row per output sample; re,im pairs"}};
  os << h.dump() << '\n' << std::setprecision(17);
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    for (Eigen::Index c = 0; c < M.cols(); ++c) {
      if (c) os << ',';
      os << M(r, c).real() << ',' << M(r, c).imag();
    }
    os << '\n';
  }
}

nlohmann::json NormEstimate::to_json() const {
  return {{"value", value}, {"iterations", iterations}, {"restarts", restarts}, {"residual", residual}, {"method", method}};
}

NormEstimate estimate_norm(const Eigen::MatrixXcd& M, double tol, Eigen::Index svd_limit) {
  NormEstimate r;
  if (M.size() == 0) {
    r.method = "svd";
    return r;
  }
  if (std::min(M.rows(), M.cols()) <= svd_limit) {
    Eigen::BDCSVD<Eigen::MatrixXcd> svd(M);
    r.value = svd.singularValues()(0);
    r.method = "svd";
    return r;
  }
  r.method = "power";
  if (M.squaredNorm() == 0.0) return r;
  constexpr int max_iter = 20000;
  for (int start = 0; start < 10; ++start) {
    Eigen::VectorXcd v(M.cols());
    const double a = 1.3 + 0.71 * start, b = 0.7 + 0.37 * start;
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = cplx(1.0 + 0.37 * std::sin(a * i), 0.21 * std::cos(b * i));
    v.normalize();
    double lam = 0.0;
    for (int it = 1; it <= max_iter; ++it) {
      Eigen::VectorXcd w = M.adjoint() * (M * v);
      const double nl = w.norm();
      ++r.iterations;
      if (nl == 0.0) break; // start orthogonal to the range; try the next one
      v = w / nl;
      r.residual = std::abs(nl - lam) / nl;
      lam = nl;
      if (r.residual <= tol) {
        r.value = std::sqrt(lam);
        r.restarts = start;
        return r;
      }
    }
  }
  r.restarts = 10;
  fail(ErrorCode::convergence, "power iteration did not converge (residual " + std::to_string(r.residual) + ")");
}

double spectral_norm(const Eigen::MatrixXcd& M) { return estimate_norm(M, 1e-13).value; }

} // namespace wavsym
