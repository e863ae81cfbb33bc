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

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "vapkit/common.hpp"

namespace vapkit {

struct Word {
  std::string text;
  double start = 0.0;  // seconds
  double end = 0.0;
};

// Word-level timings for both speakers of one session. Words within one
// speaker are sorted by start and non-overlapping.
struct SessionAlignment {
  std::string session_id;
  double duration_s = 0.0;
  std::vector<Word> words[2];

  double max_word_end() const {
    double m = 0.0;
    for (const auto& ws : words)
      for (const auto& w : ws) m = std::max(m, w.end);
    return m;
  }

  void validate() const {
    for (int k = 0; k < 2; ++k) {
      double prev_end = -1.0;
      double prev_start = -1.0;
      for (const auto& w : words[k]) {
        if (w.start < 0.0) throw DataError("alignment: negative word start");
        if (w.end <= w.start) throw DataError("alignment: word end <= start");
        if (w.start < prev_start) throw DataError("alignment: words out of order");
        if (w.start < prev_end) throw DataError("alignment: overlapping words in one speaker");
        prev_start = w.start;
        prev_end = w.end;
      }
    }
  }
};

// Frame-rate binary voice activity per speaker.
struct VaTrack {
  int frame_rate = kFrameRate;
  std::vector<std::uint8_t> speaker[2];

  std::size_t n_frames() const { return speaker[0].size(); }

  void validate() const {
    if (speaker[0].size() != speaker[1].size())
      throw DataError("va track: speaker sequences differ in length");
  }
};

// Alignment JSON schema:
// {"session_id": str, "duration_s": num,
//  "speakers": [{"speaker": 0|1, "words": [{"w": str, "start": num, "end": num}]}]}
inline SessionAlignment parse_alignment(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open alignment: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("alignment json parse error in " + path.string() + ": " + e.what());
  }

  SessionAlignment al;
  if (!j.contains("session_id") || !j["session_id"].is_string())
    throw DataError("alignment schema: missing session_id");
  al.session_id = j["session_id"].get<std::string>();
  if (!j.contains("duration_s") || !j["duration_s"].is_number())
    throw DataError("alignment schema: missing duration_s");
  al.duration_s = j["duration_s"].get<double>();
  if (!j.contains("speakers") || !j["speakers"].is_array() || j["speakers"].size() != 2)
    throw DataError("alignment schema: speakers must list both speakers");

  bool seen[2] = {false, false};
  for (const auto& sp : j["speakers"]) {
    if (!sp.contains("speaker") || !sp["speaker"].is_number_integer())
      throw DataError("alignment schema: bad speaker id");
    const int k = sp["speaker"].get<int>();
    if (k != 0 && k != 1) throw DataError("alignment schema: speaker must be 0 or 1");
    if (seen[k]) throw DataError("alignment schema: duplicate speaker " + std::to_string(k));
    seen[k] = true;
    if (!sp.contains("words") || !sp["words"].is_array())
      throw DataError("alignment schema: missing words array");
    for (const auto& wj : sp["words"]) {
      if (!wj.contains("w") || !wj.contains("start") || !wj.contains("end") ||
          !wj["start"].is_number() || !wj["end"].is_number())
        throw DataError("alignment schema: bad word entry");
      al.words[k].push_back(
          Word{wj["w"].get<std::string>(), wj["start"].get<double>(), wj["end"].get<double>()});
    }
  }
  al.validate();
  return al;
}

inline nlohmann::json alignment_to_json(const SessionAlignment& al) {
  nlohmann::json j;
  j["session_id"] = al.session_id;
  j["duration_s"] = al.duration_s;
  j["speakers"] = nlohmann::json::array();
  for (int k = 0; k < 2; ++k) {
    nlohmann::json sp;
    sp["speaker"] = k;
    sp["words"] = nlohmann::json::array();
    for (const auto& w : al.words[k])
      sp["words"].push_back({{"w", w.text}, {"start", w.start}, {"end", w.end}});
    j["speakers"].push_back(sp);
  }
  return j;
}

// Merged speech intervals for one speaker; intra-speaker gaps shorter
// than `close_gap_s` are closed first.
inline std::vector<std::pair<double, double>> speaker_intervals(const SessionAlignment& al,
                                                                int speaker,
                                                                double close_gap_s = 0.05) {
  std::vector<std::pair<double, double>> out;
  for (const auto& w : al.words[speaker]) {
    if (!out.empty() && w.start - out.back().second < close_gap_s)
      out.back().second = std::max(out.back().second, w.end);
    else
      out.emplace_back(w.start, w.end);
  }
  return out;
}

// Rasterises word intervals to frame-rate voice activity. Frame f covers
// [f/r, (f+1)/r) and is active iff strictly more than half of it overlaps
// the speaker's (gap-closed) speech intervals.
inline VaTrack va_from_alignment(const SessionAlignment& al, int frame_rate, double duration_s) {
  if (frame_rate <= 0) throw DataError("va_from_alignment: frame_rate must be positive");
  if (duration_s + 1e-9 < al.max_word_end())
    throw DataError("va_from_alignment: duration shorter than last word");
  const std::size_t n_frames =
      static_cast<std::size_t>(std::llround(duration_s * frame_rate));
  const double frame_dur = 1.0 / frame_rate;

  VaTrack va;
  va.frame_rate = frame_rate;
  for (int k = 0; k < 2; ++k) {
    va.speaker[k].assign(n_frames, 0);
    std::vector<double> coverage(n_frames, 0.0);
    for (const auto& [s, e] : speaker_intervals(al, k)) {
      const auto f0 = static_cast<std::size_t>(std::max(0.0, std::floor(s * frame_rate)));
      const auto f1 = static_cast<std::size_t>(
          std::min<double>(static_cast<double>(n_frames), std::ceil(e * frame_rate)));
      for (std::size_t f = f0; f < f1; ++f) {
        const double lo = std::max(s, f * frame_dur);
        const double hi = std::min(e, (f + 1) * frame_dur);
        if (hi > lo) coverage[f] += hi - lo;
      }
    }
    // Strict >50% rule with a small guard so exact-half overlaps stay 0
    // under floating-point roundoff.
    for (std::size_t f = 0; f < n_frames; ++f)
      va.speaker[k][f] = coverage[f] > 0.5 * frame_dur + 1e-9 ? 1 : 0;
  }
  return va;
}

}  // namespace vapkit
