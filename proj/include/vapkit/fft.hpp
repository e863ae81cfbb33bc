// Copyright 2026 The vapkit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <vector>

#include "vapkit/common.hpp"

namespace vapkit {

// In-place iterative radix-2 FFT. Size must be a power of two.
inline void fft_inplace(std::vector<std::complex<double>>& a, bool inverse = false) {
  const std::size_t n = a.size();
  if (n == 0 || (n & (n - 1)) != 0)
    throw NumericError("fft: size must be a power of two, got " + std::to_string(n));
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = (inverse ? 2.0 : -2.0) * M_PI / static_cast<double>(len);
    const std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        std::complex<double> u = a[i + k];
        std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
  if (inverse) {
    for (auto& x : a) x /= static_cast<double>(n);
  }
}

inline std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

// Magnitude spectrum of a real signal, zero-padded to `fft_size`
// (next power of two above the signal length when 0). Returns the
// non-negative-frequency half, fft_size/2 + 1 bins.
template <typename T>
std::vector<double> magnitude_spectrum(const std::vector<T>& x, std::size_t fft_size = 0) {
  if (fft_size == 0) fft_size = next_pow2(x.size());
  std::vector<std::complex<double>> buf(fft_size, {0.0, 0.0});
  for (std::size_t i = 0; i < x.size() && i < fft_size; ++i)
    buf[i] = std::complex<double>(static_cast<double>(x[i]), 0.0);
  fft_inplace(buf);
  std::vector<double> mag(fft_size / 2 + 1);
  for (std::size_t i = 0; i < mag.size(); ++i) mag[i] = std::abs(buf[i]);
  return mag;
}

// Frequency (Hz) of the largest magnitude bin, excluding DC.
template <typename T>
double dominant_frequency(const std::vector<T>& x, double sample_rate,
                          std::size_t fft_size = 0) {
  auto mag = magnitude_spectrum(x, fft_size);
  std::size_t best = 1;
  for (std::size_t i = 2; i < mag.size(); ++i)
    if (mag[i] > mag[best]) best = i;
  const std::size_t n = (mag.size() - 1) * 2;
  return static_cast<double>(best) * sample_rate / static_cast<double>(n);
}

}  // namespace vapkit
