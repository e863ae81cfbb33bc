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

#include "vapkit/alignment.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "vapkit/rng.hpp"
#include "vapkit/visual.hpp"

using namespace vapkit;
namespace fs = std::filesystem;

namespace {

fs::path write_temp(const std::string& name, const std::string& content) {
  fs::path p = fs::temp_directory_path() / ("vapkit_align_" + name);
  std::ofstream os(p);
  os << content;
  return p;
}

SessionAlignment make_alignment(const std::vector<std::pair<double, double>>& w0,
                                const std::vector<std::pair<double, double>>& w1,
                                double duration) {
  SessionAlignment al;
  al.session_id = "t";
  al.duration_s = duration;
  for (auto [s, e] : w0) al.words[0].push_back({"w", s, e});
  for (auto [s, e] : w1) al.words[1].push_back({"w", s, e});
  return al;
}

// Integer-millisecond oracle for the >50% frame coverage rule.
std::vector<std::uint8_t> coverage_oracle_ms(const std::vector<std::pair<int, int>>& words_ms,
                                             int n_frames, int frame_ms, int close_gap_ms) {
  // Close small gaps.
  std::vector<std::pair<int, int>> merged;
  for (auto [s, e] : words_ms) {
    if (!merged.empty() && s - merged.back().second < close_gap_ms)
      merged.back().second = std::max(merged.back().second, e);
    else
      merged.emplace_back(s, e);
  }
  std::vector<std::uint8_t> va(n_frames, 0);
  for (int f = 0; f < n_frames; ++f) {
    const int lo = f * frame_ms, hi = (f + 1) * frame_ms;
    int covered = 0;
    for (auto [s, e] : merged) covered += std::max(0, std::min(e, hi) - std::max(s, lo));
    va[f] = 2 * covered > frame_ms ? 1 : 0;
  }
  return va;
}

}  // namespace

TEST(ParseAlignment, ValidTwoSpeakerFile) {
  const auto p = write_temp("ok.json", R"({
    "session_id": "s01", "duration_s": 3.0,
    "speakers": [
      {"speaker": 0, "words": [{"w": "hi", "start": 0.1, "end": 0.5}]},
      {"speaker": 1, "words": [{"w": "yo", "start": 1.0, "end": 1.4}]}
    ]})");
  SessionAlignment al = parse_alignment(p);
  EXPECT_EQ(al.session_id, "s01");
  EXPECT_EQ(al.words[0].size() + al.words[1].size(), 2u);
  EXPECT_DOUBLE_EQ(al.words[1][0].start, 1.0);
}

TEST(ParseAlignment, EndBeforeStartRejected) {
  const auto p = write_temp("bad_word.json", R"({
    "session_id": "s", "duration_s": 3.0,
    "speakers": [
      {"speaker": 0, "words": [{"w": "x", "start": 0.5, "end": 0.5}]},
      {"speaker": 1, "words": []}
    ]})");
  EXPECT_THROW(parse_alignment(p), DataError);
}

TEST(ParseAlignment, OverlappingWordsRejected) {
  const auto p = write_temp("overlap.json", R"({
    "session_id": "s", "duration_s": 3.0,
    "speakers": [
      {"speaker": 0, "words": [{"w": "a", "start": 0.0, "end": 1.0},
                                {"w": "b", "start": 0.5, "end": 1.5}]},
      {"speaker": 1, "words": []}
    ]})");
  EXPECT_THROW(parse_alignment(p), DataError);
}

TEST(ParseAlignment, NegativeTimeRejected) {
  const auto p = write_temp("neg.json", R"({
    "session_id": "s", "duration_s": 3.0,
    "speakers": [
      {"speaker": 0, "words": [{"w": "a", "start": -0.1, "end": 1.0}]},
      {"speaker": 1, "words": []}
    ]})");
  EXPECT_THROW(parse_alignment(p), DataError);
}

TEST(ParseAlignment, EmptySpeakerIsValid) {
  const auto p = write_temp("empty.json", R"({
    "session_id": "s", "duration_s": 3.0,
    "speakers": [{"speaker": 0, "words": []}, {"speaker": 1, "words": []}]})");
  SessionAlignment al = parse_alignment(p);
  VaTrack va = va_from_alignment(al, 50, 3.0);
  for (int k = 0; k < 2; ++k)
    for (auto v : va.speaker[k]) ASSERT_EQ(v, 0);
}

TEST(ParseAlignment, SchemaViolationRejected) {
  const auto p = write_temp("schema.json", R"({"session_id": "s"})");
  EXPECT_THROW(parse_alignment(p), DataError);
}

TEST(VaFromAlignment, WholeSecondWord) {
  auto al = make_alignment({{0.0, 1.0}}, {}, 2.0);
  VaTrack va = va_from_alignment(al, 50, 2.0);
  ASSERT_EQ(va.n_frames(), 100u);
  for (int f = 0; f < 50; ++f) ASSERT_EQ(va.speaker[0][f], 1) << f;
  for (int f = 50; f < 100; ++f) ASSERT_EQ(va.speaker[0][f], 0) << f;
}

TEST(VaFromAlignment, SmallGapClosed) {
  auto al = make_alignment({{0.0, 0.40}, {0.44, 1.0}}, {}, 2.0);
  VaTrack va = va_from_alignment(al, 50, 2.0);
  for (int f = 0; f < 50; ++f) ASSERT_EQ(va.speaker[0][f], 1) << f;
}

TEST(VaFromAlignment, ExactHalfCoverageIsInactive) {
  // Frame 10 covers [0.20, 0.22); word ends at 0.21 -> exactly 50%.
  auto al = make_alignment({{0.0, 0.21}}, {}, 1.0);
  VaTrack va = va_from_alignment(al, 50, 1.0);
  EXPECT_EQ(va.speaker[0][9], 1);
  EXPECT_EQ(va.speaker[0][10], 0);
}

TEST(VaFromAlignment, MatchesCoverageOracle) {
  Rng rng(77);
  const int frame_ms = 20;
  for (int trial = 0; trial < 200; ++trial) {
    const int n_frames = 100;
    std::vector<std::pair<int, int>> words_ms;
    int t = 0;
    while (true) {
      t += static_cast<int>(rng.uniform_index(300));
      const int dur = 30 + static_cast<int>(rng.uniform_index(400));
      if (t + dur > n_frames * frame_ms) break;
      words_ms.emplace_back(t, t + dur);
      t += dur;
    }
    SessionAlignment al;
    al.session_id = "o";
    al.duration_s = 2.0;
    for (auto [s, e] : words_ms) al.words[0].push_back({"w", s / 1000.0, e / 1000.0});
    VaTrack va = va_from_alignment(al, 50, 2.0);
    auto expect = coverage_oracle_ms(words_ms, n_frames, frame_ms, 50);
    for (int f = 0; f < n_frames; ++f) ASSERT_EQ(va.speaker[0][f], expect[f])
        << "trial " << trial << " frame " << f;
  }
}

TEST(VaFromAlignment, MonotoneUnderAddedWord) {
  Rng rng(78);
  for (int trial = 0; trial < 50; ++trial) {
    auto al = make_alignment({{0.1, 0.4}, {1.0, 1.3}}, {}, 3.0);
    VaTrack before = va_from_alignment(al, 50, 3.0);
    // Add a word in the free region after the existing ones.
    double s = 1.5 + rng.uniform() * 1.0;
    double e = s + 0.05 + rng.uniform() * 0.4;
    al.words[0].push_back({"new", s, std::min(e, 3.0)});
    VaTrack after = va_from_alignment(al, 50, 3.0);
    for (std::size_t f = 0; f < before.n_frames(); ++f)
      ASSERT_LE(before.speaker[0][f], after.speaker[0][f]);
  }
}

TEST(VaFromAlignment, RasterisationReconstructsIsolatedWords) {
  // Isolated words >= 2 frames reconstruct within one frame at both ends.
  auto al = make_alignment({{0.50, 0.90}, {1.52, 1.80}}, {}, 3.0);
  VaTrack va = va_from_alignment(al, 50, 3.0);
  std::vector<std::pair<double, double>> runs;
  int start = -1;
  for (std::size_t f = 0; f <= va.n_frames(); ++f) {
    const bool on = f < va.n_frames() && va.speaker[0][f] == 1;
    if (on && start < 0) start = static_cast<int>(f);
    if (!on && start >= 0) {
      runs.emplace_back(start / 50.0, f / 50.0);
      start = -1;
    }
  }
  ASSERT_EQ(runs.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_NEAR(runs[i].first, al.words[0][i].start, 0.02 + 1e-9);
    EXPECT_NEAR(runs[i].second, al.words[0][i].end, 0.02 + 1e-9);
  }
}

TEST(VaFromAlignment, DurationShorterThanWordsRejected) {
  auto al = make_alignment({{0.0, 2.5}}, {}, 2.0);
  EXPECT_THROW(va_from_alignment(al, 50, 2.0), DataError);
}

// --- visual ingest ---------------------------------------------------------

namespace {

fs::path write_csv(const std::string& name, const std::string& content) {
  return write_temp(name, content);
}

}  // namespace

TEST(VisualCsv, ParsesRowsAndRecordsGaps) {
  const auto p = write_csv("v1.csv",
                           "frame,timestamp,au01,gaze_x\n"
                           "0,0.0,1.0,0.5\n"
                           "1,0.016,1.1,0.6\n"
                           "3,0.05,1.2,0.7\n");
  RawVisualFrames raw = parse_visual_csv(p, 60.0);
  ASSERT_EQ(raw.feature_names.size(), 2u);
  ASSERT_EQ(raw.frame_index.size(), 3u);
  ASSERT_EQ(raw.gaps.size(), 1u);
  EXPECT_EQ(raw.gaps[0], 2);
}

TEST(VisualCsv, NonNumericCellNamesRowAndColumn) {
  const auto p = write_csv("v2.csv",
                           "frame,timestamp,au01\n"
                           "0,0.0,oops\n");
  try {
    parse_visual_csv(p, 60.0);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("row 2"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("column 3"), std::string::npos);
  }
}

TEST(VisualCsv, MissingColumnsRejected) {
  const auto p = write_csv("v3.csv", "frame,au01\n0,1.0\n");
  EXPECT_THROW(parse_visual_csv(p, 60.0), DataError);
}

TEST(VisualTrack, ConstantVectorSurvivesRateChange) {
  std::string csv = "frame,timestamp,a,b\n";
  for (int i = 0; i < 60; ++i)
    csv += std::to_string(i) + "," + std::to_string(i / 60.0) + ",2.5,-1.0\n";
  RawVisualFrames raw = parse_visual_csv(write_csv("v4.csv", csv), 60.0);
  auto ident = VisualNormStats::identity(2);
  SpeakerVisualTrack track = visual_to_track(raw, 50, 1.0, &ident);
  ASSERT_EQ(track.n_frames(), 50u);
  for (std::size_t f = 0; f < 50; ++f) {
    ASSERT_FLOAT_EQ(track.row(f)[0], 2.5f);
    ASSERT_FLOAT_EQ(track.row(f)[1], -1.0f);
  }
}

TEST(VisualTrack, AllMissingGivesZeroTrackWithFlag) {
  RawVisualFrames raw;
  raw.source_fps = 60.0;
  raw.feature_names = {"a", "b", "c"};
  SpeakerVisualTrack track = visual_to_track(raw, 50, 1.0);
  EXPECT_TRUE(track.missing);
  ASSERT_EQ(track.n_frames(), 50u);
  for (std::size_t f = 0; f < 50; ++f)
    for (int d = 0; d < 3; ++d) ASSERT_EQ(track.row(f)[d], 0.0f);
}

TEST(VisualTrack, RampResamplingStaysWithinOneSourceFrame) {
  // Feature f(t) = t sampled at 60 fps, resampled to 50 Hz.
  std::string csv = "frame,timestamp,t\n";
  for (int i = 0; i < 120; ++i) {
    const double t = i / 60.0;
    csv += std::to_string(i) + "," + std::to_string(t) + "," + std::to_string(t) + "\n";
  }
  RawVisualFrames raw = parse_visual_csv(write_csv("v5.csv", csv), 60.0);
  auto ident = VisualNormStats::identity(1);
  SpeakerVisualTrack track = visual_to_track(raw, 50, 2.0, &ident);
  double max_dev = 0.0;
  for (std::size_t f = 0; f < track.n_frames(); ++f) {
    const double ideal = (f + 0.5) / 50.0;
    max_dev = std::max(max_dev, std::abs(track.row(f)[0] - ideal));
  }
  EXPECT_LE(max_dev, 1.0 / 60.0 + 1e-6);
}

TEST(VisualTrack, HoldLastValueOverGaps) {
  const auto p = write_csv("v6.csv",
                           "frame,timestamp,a\n"
                           "0,0.0,5.0\n"
                           "30,0.5,9.0\n");
  RawVisualFrames raw = parse_visual_csv(p, 60.0);
  auto ident = VisualNormStats::identity(1);
  SpeakerVisualTrack track = visual_to_track(raw, 50, 1.0, &ident);
  // Frames that map to source frames 1..29 hold the value 5.0.
  EXPECT_FLOAT_EQ(track.row(10)[0], 5.0f);
  EXPECT_FLOAT_EQ(track.row(30)[0], 9.0f);
}

TEST(VisualNorm, FittedStatsGiveZeroMeanUnitStd) {
  Rng rng(99);
  SpeakerVisualTrack t;
  t.dim = 4;
  const std::size_t frames = 500;
  t.features.resize(frames * t.dim);
  for (auto& v : t.features) v = static_cast<float>(rng.gaussian(3.0, 2.5));
  VisualNormStats stats = fit_visual_norm({&t});
  apply_visual_norm(t, stats);
  for (int d = 0; d < 4; ++d) {
    double mean = 0.0, var = 0.0;
    for (std::size_t f = 0; f < frames; ++f) mean += t.row(f)[d];
    mean /= frames;
    for (std::size_t f = 0; f < frames; ++f) {
      const double c = t.row(f)[d] - mean;
      var += c * c;
    }
    const double sd = std::sqrt(var / frames);
    EXPECT_NEAR(mean, 0.0, 0.01);
    EXPECT_NEAR(sd, 1.0, 0.01);
  }
}
