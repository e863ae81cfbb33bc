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
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "vapkit/common.hpp"

namespace vapkit {

// Raw rows of a facial-feature CSV export for one speaker of one session.
// Frame indices may have gaps where the extractor lost the face.
struct RawVisualFrames {
  double source_fps = 60.0;
  std::vector<std::string> feature_names;
  std::vector<std::int64_t> frame_index;        // strictly increasing
  std::vector<std::vector<float>> values;       // one row per present frame
  std::vector<std::int64_t> gaps;               // missing indices inside the span
};

struct VisualNormStats {
  std::vector<double> mean;
  std::vector<double> stddev;

  static VisualNormStats identity(std::size_t dim) {
    return VisualNormStats{std::vector<double>(dim, 0.0), std::vector<double>(dim, 1.0)};
  }
};

// One speaker's visual features resampled to the model frame rate.
struct SpeakerVisualTrack {
  int frame_rate = kFrameRate;
  std::size_t dim = 0;
  std::vector<float> features;  // row-major, n_frames x dim
  bool missing = false;         // no valid source frame at all
  VisualNormStats used_norm;

  std::size_t n_frames() const { return dim == 0 ? 0 : features.size() / dim; }
  const float* row(std::size_t f) const { return features.data() + f * dim; }
};

// CSV format: header `frame,timestamp,<feature columns...>`, one row per
// video frame, files named `<session_id>.spk<k>.csv`.
inline RawVisualFrames parse_visual_csv(const std::filesystem::path& path, double source_fps) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open visual csv: " + path.string());

  RawVisualFrames raw;
  raw.source_fps = source_fps;

  std::string line;
  if (!std::getline(in, line)) throw DataError("visual csv: empty file " + path.string());
  {
    std::stringstream ss(line);
    std::string col;
    std::vector<std::string> cols;
    while (std::getline(ss, col, ',')) cols.push_back(col);
    if (cols.size() < 3 || cols[0] != "frame" || cols[1] != "timestamp")
      throw DataError("visual csv: header must start with frame,timestamp and have features: " +
                      path.string());
    raw.feature_names.assign(cols.begin() + 2, cols.end());
  }

  std::size_t row_no = 1;
  std::int64_t prev_index = -1;
  while (std::getline(in, line)) {
    ++row_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != raw.feature_names.size() + 2)
      throw DataError("visual csv: row " + std::to_string(row_no) + " has " +
                      std::to_string(cells.size()) + " cells, expected " +
                      std::to_string(raw.feature_names.size() + 2));
    const auto parse_num = [&](const std::string& s, std::size_t col_idx) -> double {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(s, &used);
      } catch (...) {
        used = 0;
      }
      if (used != s.size() || s.empty())
        throw DataError("visual csv: non-numeric cell at row " + std::to_string(row_no) +
                        " column " + std::to_string(col_idx + 1) + " (" + s + ")");
      return v;
    };
    const auto idx = static_cast<std::int64_t>(parse_num(cells[0], 0));
    if (idx <= prev_index)
      throw DataError("visual csv: frame indices not increasing at row " +
                      std::to_string(row_no));
    for (std::int64_t miss = prev_index + 1; prev_index >= 0 && miss < idx; ++miss)
      raw.gaps.push_back(miss);
    prev_index = idx;
    raw.frame_index.push_back(idx);
    std::vector<float> vals(raw.feature_names.size());
    for (std::size_t i = 0; i < vals.size(); ++i)
      vals[i] = static_cast<float>(parse_num(cells[i + 2], i + 2));
    raw.values.push_back(std::move(vals));
  }
  return raw;
}

inline VisualNormStats fit_visual_norm(const std::vector<const SpeakerVisualTrack*>& tracks) {
  if (tracks.empty()) throw DataError("visual norm: no tracks");
  const std::size_t dim = tracks[0]->dim;
  VisualNormStats stats;
  stats.mean.assign(dim, 0.0);
  stats.stddev.assign(dim, 0.0);
  std::size_t n = 0;
  for (const auto* t : tracks) {
    if (t->dim != dim) throw DataError("visual norm: inconsistent feature dimension");
    const std::size_t frames = t->n_frames();
    for (std::size_t f = 0; f < frames; ++f)
      for (std::size_t d = 0; d < dim; ++d) stats.mean[d] += t->row(f)[d];
    n += frames;
  }
  if (n == 0) throw DataError("visual norm: no frames");
  for (std::size_t d = 0; d < dim; ++d) stats.mean[d] /= static_cast<double>(n);
  for (const auto* t : tracks) {
    const std::size_t frames = t->n_frames();
    for (std::size_t f = 0; f < frames; ++f)
      for (std::size_t d = 0; d < dim; ++d) {
        const double c = t->row(f)[d] - stats.mean[d];
        stats.stddev[d] += c * c;
      }
  }
  for (std::size_t d = 0; d < dim; ++d)
    stats.stddev[d] = std::max(1e-8, std::sqrt(stats.stddev[d] / static_cast<double>(n)));
  return stats;
}

inline void apply_visual_norm(SpeakerVisualTrack& track, const VisualNormStats& stats) {
  if (stats.mean.size() != track.dim) throw DataError("visual norm: dimension mismatch");
  const std::size_t frames = track.n_frames();
  for (std::size_t f = 0; f < frames; ++f)
    for (std::size_t d = 0; d < track.dim; ++d) {
      float& v = track.features[f * track.dim + d];
      v = static_cast<float>((v - stats.mean[d]) / stats.stddev[d]);
    }
}

// Nearest-neighbour resampling of raw visual rows to the model frame rate.
// Source gaps are filled by holding the last valid frame; leading gaps are
// zero vectors. When `norm` is null, statistics are fitted on this track's
// own data and applied; otherwise the given statistics are applied. Pass
// VisualNormStats::identity(F) to skip normalisation.
inline SpeakerVisualTrack visual_to_track(const RawVisualFrames& raw, int frame_rate,
                                          double duration_s,
                                          const VisualNormStats* norm = nullptr) {
  if (frame_rate <= 0) throw DataError("visual_to_track: frame_rate must be positive");
  SpeakerVisualTrack track;
  track.frame_rate = frame_rate;
  track.dim = raw.feature_names.size();
  const std::size_t n_frames =
      static_cast<std::size_t>(std::llround(duration_s * frame_rate));
  track.features.assign(n_frames * track.dim, 0.0f);
  track.missing = raw.values.empty();
  if (track.missing) return track;

  // Dense source table indexed by video frame, hold-last over gaps.
  const std::int64_t last_idx = raw.frame_index.back();
  std::vector<const float*> dense(static_cast<std::size_t>(last_idx) + 1, nullptr);
  for (std::size_t i = 0; i < raw.frame_index.size(); ++i)
    dense[static_cast<std::size_t>(raw.frame_index[i])] = raw.values[i].data();
  const float* held = nullptr;
  for (auto& p : dense) {
    if (p != nullptr)
      held = p;
    else
      p = held;  // may stay null before the first valid frame
  }

  for (std::size_t f = 0; f < n_frames; ++f) {
    const double t_center = (static_cast<double>(f) + 0.5) / frame_rate;
    auto src = static_cast<std::int64_t>(std::llround(t_center * raw.source_fps - 0.5));
    src = std::clamp<std::int64_t>(src, 0, last_idx);
    const float* rowp = dense[static_cast<std::size_t>(src)];
    if (rowp == nullptr) continue;  // leading gap stays zero
    std::copy(rowp, rowp + track.dim, track.features.begin() + f * track.dim);
  }

  if (norm != nullptr) {
    track.used_norm = *norm;
  } else if (!track.missing) {
    const SpeakerVisualTrack* self = &track;
    track.used_norm = fit_visual_norm({self});
  } else {
    track.used_norm = VisualNormStats::identity(track.dim);
  }
  apply_visual_norm(track, track.used_norm);
  return track;
}

}  // namespace vapkit
