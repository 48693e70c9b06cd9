#pragma once

#include "wavsym/common.hpp"

#include <vector>

namespace wavsym::fft {

// Smallest n' >= n of the form 2^a 3^b 5^c 7^d.
std::size_t good_size(std::size_t n);

// Unnormalized in-place DFT. sign = -1: X_m = sum x_k e^{-2 pi i mk/N}.
void transform(std::vector<cplx>& data, int sign);

// Unnormalized in-place multi-dimensional DFT over a row-major array.
void transform_nd(std::vector<cplx>& data, const std::vector<int>& dims, int sign);

// Cross-correlation with a real kernel, sampled at selected lags:
//   out[q] = sum_m f[p0 + q*step + m] * w[m],  q in [0, count)
// f is read with stride fstride and zero-extended outside [0, nf).
void correlate(const cplx* f, std::size_t nf, std::size_t fstride,
               const std::vector<double>& w, long p0, std::size_t step,
               std::size_t count, cplx* out, std::size_t ostride = 1);

} // namespace wavsym::fft
