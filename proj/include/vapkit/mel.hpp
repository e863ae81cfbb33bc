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
#include <vector>

#include "vapkit/common.hpp"
#include "vapkit/fft.hpp"

namespace vapkit {

inline constexpr int kMelWindowSamples = 400;  // 25 ms at 16 kHz
inline constexpr int kMelHopSamples = 320;     // 20 ms -> exactly 50 frames/s
inline constexpr int kMelFftSize = 512;
inline constexpr double kMelFloor = 1e-10;

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

// Triangular mel filterbank over the power spectrum, 0 Hz to Nyquist.
struct MelFilterbank {
  int n_bins;
  int sample_rate;
  std::vector<double> center_hz;                // n_bins entries
  std::vector<std::vector<double>> weights;     // n_bins x (fft/2+1)

  explicit MelFilterbank(int bins = 40, int rate = kPipelineRate, int fft_size = kMelFftSize)
      : n_bins(bins), sample_rate(rate) {
    const int n_freq = fft_size / 2 + 1;
    const double mel_lo = hz_to_mel(0.0);
    const double mel_hi = hz_to_mel(rate / 2.0);
    std::vector<double> edges(bins + 2);
    for (int i = 0; i < bins + 2; ++i)
      edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (bins + 1));
    center_hz.assign(edges.begin() + 1, edges.end() - 1);
    weights.assign(bins, std::vector<double>(n_freq, 0.0));
    for (int m = 0; m < bins; ++m) {
      const double f0 = edges[m], f1 = edges[m + 1], f2 = edges[m + 2];
      for (int k = 0; k < n_freq; ++k) {
        const double fk = static_cast<double>(k) * rate / fft_size;
        if (fk > f0 && fk < f1)
          weights[m][k] = (fk - f0) / (f1 - f0);
        else if (fk >= f1 && fk < f2)
          weights[m][k] = (f2 - fk) / (f2 - f1);
      }
    }
  }
};

// Log mel-filterbank energies at the model frame rate. Frame t covers
// samples [t*hop, t*hop + window); the tail is zero-padded, giving
// ceil(n/hop) frames (exactly 50 per second of input).
inline std::vector<float> mel_frontend(const std::vector<float>& samples, int n_bins = 40,
                                       int sample_rate = kPipelineRate) {
  if (sample_rate != kPipelineRate)
    throw DataError("mel_frontend: expects the 16 kHz pipeline rate");
  static thread_local std::vector<std::complex<double>> fft_buf;
  const MelFilterbank& bank = [&]() -> const MelFilterbank& {
    static thread_local MelFilterbank cached(0);
    if (cached.n_bins != n_bins) cached = MelFilterbank(n_bins, sample_rate);
    return cached;
  }();

  std::vector<double> hann(kMelWindowSamples);
  for (int i = 0; i < kMelWindowSamples; ++i)
    hann[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / (kMelWindowSamples - 1));

  const std::size_t n_frames = (samples.size() + kMelHopSamples - 1) / kMelHopSamples;
  std::vector<float> out(n_frames * n_bins);
  const int n_freq = kMelFftSize / 2 + 1;
  std::vector<double> power(n_freq);

  for (std::size_t t = 0; t < n_frames; ++t) {
    fft_buf.assign(kMelFftSize, {0.0, 0.0});
    const std::size_t start = t * kMelHopSamples;
    for (int i = 0; i < kMelWindowSamples; ++i) {
      const std::size_t idx = start + i;
      if (idx < samples.size())
        fft_buf[i] = std::complex<double>(samples[idx] * hann[i], 0.0);
    }
    fft_inplace(fft_buf);
    for (int k = 0; k < n_freq; ++k) power[k] = std::norm(fft_buf[k]);
    for (int m = 0; m < n_bins; ++m) {
      double e = 0.0;
      const auto& w = bank.weights[m];
      for (int k = 0; k < n_freq; ++k) e += w[k] * power[k];
      out[t * n_bins + m] = static_cast<float>(std::log(std::max(e, kMelFloor)));
    }
  }
  return out;
}

}  // namespace vapkit
