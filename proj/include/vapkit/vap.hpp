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

#include <array>
#include <cstdint>
#include <vector>

#include "vapkit/alignment.hpp"
#include "vapkit/common.hpp"

namespace vapkit {

inline constexpr int kVapBins = 4;
inline constexpr int kVapStates = 256;

// Future-activity bin layout. Default edges 0/0.2/0.6/1.2/2.0 s give
// 10/20/30/40 frames per bin at 50 Hz, a 100-frame horizon.
struct BinLayout {
  std::array<double, kVapBins + 1> edges_s = {0.0, 0.2, 0.6, 1.2, 2.0};
  int frame_rate = kFrameRate;

  std::array<int, kVapBins> frames_per_bin() const {
    std::array<int, kVapBins> fpb{};
    for (int b = 0; b < kVapBins; ++b) {
      fpb[b] = static_cast<int>(std::llround((edges_s[b + 1] - edges_s[b]) * frame_rate));
      if (fpb[b] <= 0) throw DataError("bin layout: empty bin");
    }
    return fpb;
  }

  int horizon_frames() const {
    int total = 0;
    for (int f : frames_per_bin()) total += f;
    return total;
  }

  std::array<double, kVapBins> bin_durations_s() const {
    std::array<double, kVapBins> d{};
    for (int b = 0; b < kVapBins; ++b) d[b] = edges_s[b + 1] - edges_s[b];
    return d;
  }

  void validate() const {
    if (edges_s[0] != 0.0) throw DataError("bin layout: edges must start at 0");
    for (int b = 0; b < kVapBins; ++b)
      if (edges_s[b + 1] <= edges_s[b]) throw DataError("bin layout: edges not increasing");
    frames_per_bin();
  }
};

// One per-frame training target: packed 8-bit future-activity state plus a
// validity flag (false when the horizon runs past the end of the session).
struct VapLabel {
  std::uint16_t state = 0;
  bool valid = false;
};

using Bits8 = std::array<std::uint8_t, 8>;

// Bit convention: index 0..3 = speaker 0 bins 1..4, index 4..7 = speaker 1
// bins 1..4. Speaker 0 occupies the high nibble of the packed state and the
// earliest bin is the most significant bit of each nibble.
inline int encode_state(const Bits8& bits) {
  int state = 0;
  for (int i = 0; i < 8; ++i) {
    if (bits[i] > 1) throw DataError("encode_state: bits must be 0 or 1");
    state |= static_cast<int>(bits[i]) << (7 - i);
  }
  return state;
}

inline Bits8 decode_state(int state) {
  if (state < 0 || state >= kVapStates)
    throw DataError("decode_state: state out of range: " + std::to_string(state));
  Bits8 bits{};
  for (int i = 0; i < 8; ++i) bits[i] = static_cast<std::uint8_t>((state >> (7 - i)) & 1);
  return bits;
}

inline int state_bit(int state, int speaker, int bin) {  // bin in 1..4
  return (state >> ((speaker == 0 ? 7 : 3) - (bin - 1))) & 1;
}

// Swapping the two speakers maps a state through this nibble swap.
inline int swap_speakers_state(int state) {
  return ((state & 0x0f) << 4) | ((state >> 4) & 0x0f);
}

// Packs a 100-frame future window (per speaker) into 8 bin bits. A bin is 1
// iff strictly more than 50% of its frames are active.
inline Bits8 activity_to_bits(const std::vector<std::uint8_t>& future0,
                              const std::vector<std::uint8_t>& future1,
                              const BinLayout& layout) {
  const auto fpb = layout.frames_per_bin();
  const int horizon = layout.horizon_frames();
  if (static_cast<int>(future0.size()) != horizon || static_cast<int>(future1.size()) != horizon)
    throw DataError("activity_to_bits: window length must equal the horizon");
  Bits8 bits{};
  const std::vector<std::uint8_t>* futures[2] = {&future0, &future1};
  for (int k = 0; k < 2; ++k) {
    int offset = 0;
    for (int b = 0; b < kVapBins; ++b) {
      int count = 0;
      for (int f = 0; f < fpb[b]; ++f) count += (*futures[k])[offset + f];
      bits[k * kVapBins + b] = (2 * count > fpb[b]) ? 1 : 0;  // strict majority
      offset += fpb[b];
    }
  }
  return bits;
}

// Per-frame labels; the label at frame t is built from frames (t, t+H].
inline std::vector<VapLabel> label_session(const VaTrack& va, const BinLayout& layout) {
  va.validate();
  const int horizon = layout.horizon_frames();
  const std::size_t n = va.n_frames();
  std::vector<VapLabel> labels(n);
  std::vector<std::uint8_t> win0(horizon), win1(horizon);
  for (std::size_t t = 0; t < n; ++t) {
    if (t + static_cast<std::size_t>(horizon) >= n) {
      labels[t].valid = false;
      continue;
    }
    for (int f = 0; f < horizon; ++f) {
      win0[f] = va.speaker[0][t + 1 + f];
      win1[f] = va.speaker[1][t + 1 + f];
    }
    labels[t].state = static_cast<std::uint16_t>(encode_state(activity_to_bits(win0, win1, layout)));
    labels[t].valid = true;
  }
  return labels;
}

// Per-frame model output: distribution over the 256 future-activity states
// plus the two per-speaker voice-activity probabilities.
struct VapDistribution {
  std::array<float, kVapStates> probs{};
  std::array<float, 2> vad{};
};

// Probability that `speaker` talks in the selected future bins: the
// distribution-weighted, duration-weighted mean of those bins' bits.
// The default subset {3,4} is the latter half of the horizon.
inline double p_future(const VapDistribution& dist, int speaker, const std::vector<int>& bins,
                       const BinLayout& layout = BinLayout{}) {
  if (bins.empty()) throw DataError("p_future: empty bin subset");
  const auto durations = layout.bin_durations_s();
  double total_dur = 0.0;
  for (int b : bins) {
    if (b < 1 || b > kVapBins) throw DataError("p_future: bin index out of range");
    total_dur += durations[b - 1];
  }
  // w(s) per state, then expectation under the distribution.
  double p = 0.0;
  for (int s = 0; s < kVapStates; ++s) {
    double w = 0.0;
    for (int b : bins) w += durations[b - 1] * state_bit(s, speaker, b);
    p += static_cast<double>(dist.probs[s]) * (w / total_dur);
  }
  return p;
}

inline const std::vector<int>& latter_half_bins() {
  static const std::vector<int> bins = {3, 4};
  return bins;
}

}  // namespace vapkit
