#include "wavsym/fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cstring>
#include <mutex>

namespace wavsym::fft {

namespace {

std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

void run(std::vector<cplx>& data, const std::vector<int>& dims, int sign) {
  if (data.empty()) return;
  auto* p = reinterpret_cast<fftw_complex*>(data.data());
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    plan = fftw_plan_dft(static_cast<int>(dims.size()), dims.data(), p, p,
                         sign < 0 ? FFTW_FORWARD : FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  if (!plan) fail(ErrorCode::size, "FFTW could not plan the transform");
  fftw_execute(plan);
  std::lock_guard<std::mutex> lock(planner_mutex());
  fftw_destroy_plan(plan);
}

} // namespace

std::size_t good_size(std::size_t n) {
  if (n <= 1) return 1;
  for (std::size_t m = n;; ++m) {
    std::size_t r = m;
    for (std::size_t p : {2u, 3u, 5u, 7u})
      while (r % p == 0) r /= p;
    if (r == 1) return m;
  }
}

void transform(std::vector<cplx>& data, int sign) {
  run(data, {static_cast<int>(data.size())}, sign);
}

void transform_nd(std::vector<cplx>& data, const std::vector<int>& dims, int sign) {
  std::size_t total = 1;
  for (int d : dims) total *= static_cast<std::size_t>(d);
  if (total != data.size()) fail(ErrorCode::precondition, "transform_nd: dims do not match data");
  run(data, dims, sign);
}

void correlate(const cplx* f, std::size_t nf, std::size_t fstride,
               const std::vector<double>& w, long p0, std::size_t step,
               std::size_t count, cplx* out, std::size_t ostride) {
  if (count == 0) return;
  const std::size_t nw = w.size();
  const long last = p0 + static_cast<long>((count - 1) * step);
  // Small problems: direct sums are cheaper than three transforms.
  if (count * nw < 200000) {
    for (std::size_t q = 0; q < count; ++q) {
      const long p = p0 + static_cast<long>(q * step);
      const long m_lo = std::max<long>(0, -p);
      const long m_hi = std::min<long>(static_cast<long>(nw), static_cast<long>(nf) - p);
      cplx s{};
      for (long m = m_lo; m < m_hi; ++m) s += f[static_cast<std::size_t>(p + m) * fstride] * w[m];
      out[q * ostride] = s;
    }
    return;
  }
  // Window of f that can contribute: [p0, last + nw).
  const long a = std::max<long>(0, p0);
  const long b = std::min<long>(static_cast<long>(nf), last + static_cast<long>(nw));
  const long shift = a - p0; // f index a corresponds to lag-relative position shift
  const std::size_t span = static_cast<std::size_t>(std::max<long>(0, b - a));
  const std::size_t reach = std::max<std::size_t>(static_cast<std::size_t>(shift) + span,
                                                  static_cast<std::size_t>(last - p0) + 1);
  const std::size_t L = good_size(reach + nw);
  std::vector<cplx> F(L), W(L);
  for (std::size_t i = 0; i < span; ++i)
    F[i + static_cast<std::size_t>(shift)] = f[(static_cast<std::size_t>(a) + i) * fstride];
  for (std::size_t m = 0; m < nw; ++m) W[m] = w[m];
  transform(F, -1);
  transform(W, -1);
  for (std::size_t i = 0; i < L; ++i) F[i] *= std::conj(W[i]);
  transform(F, +1);
  const double inv = 1.0 / static_cast<double>(L);
  for (std::size_t q = 0; q < count; ++q) out[q * ostride] = F[q * step] * inv;
}

} // namespace wavsym::fft
