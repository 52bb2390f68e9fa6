#pragma once

#include <cmath>
#include <complex>
#include <stdexcept>
#include <utility>
#include <vector>

namespace qbp::fft {

/// In-place iterative radix-2 complex FFT. n must be a power of two.
/// Forward transform is unnormalized; inverse divides by n.
inline void fft1d(std::complex<double>* x, int n, bool inverse) {
  if (n <= 0 || (n & (n - 1)) != 0) throw std::invalid_argument("fft1d: size must be a power of two");
  for (int i = 1, j = 0; i < n; ++i) {  // bit-reversal permutation
    int bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(x[i], x[j]);
  }
  constexpr double kTwoPi = 6.283185307179586476925286766559;
  for (int len = 2; len <= n; len <<= 1) {
    const double ang = (inverse ? kTwoPi : -kTwoPi) / len;
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (int i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (int k = 0; k < len / 2; ++k) {
        const std::complex<double> u = x[i + k];
        const std::complex<double> v = x[i + k + len / 2] * w;
        x[i + k] = u + v;
        x[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
  if (inverse) {
    for (int i = 0; i < n; ++i) x[i] /= static_cast<double>(n);
  }
}

/// In-place 2D FFT over a row-major n x n buffer.
inline void fft2d(std::complex<double>* x, int n, bool inverse) {
  std::vector<std::complex<double>> col(static_cast<size_t>(n));
  for (int r = 0; r < n; ++r) fft1d(x + static_cast<size_t>(r) * n, n, inverse);
  for (int c = 0; c < n; ++c) {
    for (int r = 0; r < n; ++r) col[static_cast<size_t>(r)] = x[static_cast<size_t>(r) * n + c];
    fft1d(col.data(), n, inverse);
    for (int r = 0; r < n; ++r) x[static_cast<size_t>(r) * n + c] = col[static_cast<size_t>(r)];
  }
}

}  // namespace qbp::fft
