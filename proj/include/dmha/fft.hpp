// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace dmha {
namespace detail {

inline size_t next_pow2(size_t n) {
  size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

/// Iterative radix-2 FFT in place. Size must be a power of two.
inline void fft_radix2(std::vector<std::complex<double>>& a, bool inverse) {
  const size_t n = a.size();
  if (n == 0 || (n & (n - 1)) != 0) throw std::invalid_argument("fft: size must be a power of two");
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  const double pi = 3.14159265358979323846;
  for (size_t len = 2; len <= n; len <<= 1) {
    const double ang = 2.0 * pi / double(len) * (inverse ? 1.0 : -1.0);
    const std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (size_t k = 0; k < len / 2; ++k) {
        const auto u = a[i + k];
        const auto v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
  if (inverse)
    for (auto& x : a) x /= double(n);
}

/// Full linear convolution via FFT, output length |x| + |k| - 1.
inline std::vector<double> fft_convolve(const std::vector<float>& x, const std::vector<float>& k) {
  if (x.empty() || k.empty()) throw std::invalid_argument("convolve: empty input");
  const size_t out_len = x.size() + k.size() - 1;
  const size_t n = next_pow2(out_len);
  std::vector<std::complex<double>> fx(n), fk(n);
  for (size_t i = 0; i < x.size(); ++i) fx[i] = double(x[i]);
  for (size_t i = 0; i < k.size(); ++i) fk[i] = double(k[i]);
  fft_radix2(fx, false);
  fft_radix2(fk, false);
  for (size_t i = 0; i < n; ++i) fx[i] *= fk[i];
  fft_radix2(fx, true);
  std::vector<double> out(out_len);
  for (size_t i = 0; i < out_len; ++i) out[i] = fx[i].real();
  return out;
}

}  // namespace detail
}  // namespace dmha
