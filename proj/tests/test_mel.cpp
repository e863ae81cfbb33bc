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

#include "vapkit/mel.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace vapkit;

TEST(MelFrontend, OneSecondGivesFiftyFrames) {
  std::vector<float> x(kPipelineRate, 0.1f);
  auto feats = mel_frontend(x, 40);
  EXPECT_EQ(feats.size(), 50u * 40u);
}

TEST(MelFrontend, SilenceHitsLogFloor) {
  std::vector<float> x(kPipelineRate, 0.0f);
  auto feats = mel_frontend(x, 40);
  const float floor_log = std::log(static_cast<float>(kMelFloor));
  for (float v : feats) ASSERT_FLOAT_EQ(v, floor_log);
}

TEST(MelFrontend, SineLandsInExpectedBin) {
  const double freq = 440.0;
  std::vector<float> x(kPipelineRate);
  for (std::size_t i = 0; i < x.size(); ++i)
    x[i] = static_cast<float>(0.5 * std::sin(2.0 * M_PI * freq * i / kPipelineRate));
  auto feats = mel_frontend(x, 40);

  // Oracle: filter with the largest weight at the FFT bin nearest 440 Hz.
  MelFilterbank bank(40, kPipelineRate);
  const int k440 = static_cast<int>(std::lround(freq * kMelFftSize / kPipelineRate));
  int expected = 0;
  for (int m = 1; m < 40; ++m)
    if (bank.weights[m][k440] > bank.weights[expected][k440]) expected = m;

  // Check a middle frame (away from edge padding).
  const int frame = 25;
  int got = 0;
  for (int m = 1; m < 40; ++m)
    if (feats[frame * 40 + m] > feats[frame * 40 + got]) got = m;
  EXPECT_EQ(got, expected);
}

TEST(MelFrontend, FrameCountCeilsPartialHop) {
  std::vector<float> x(kMelHopSamples * 10 + 1, 0.0f);
  auto feats = mel_frontend(x, 40);
  EXPECT_EQ(feats.size() / 40, 11u);
}

TEST(MelFilterbank, CentersCoverFullBand) {
  MelFilterbank bank(40, kPipelineRate);
  ASSERT_EQ(bank.center_hz.size(), 40u);
  EXPECT_GT(bank.center_hz.front(), 0.0);
  EXPECT_LT(bank.center_hz.back(), kPipelineRate / 2.0);
  for (std::size_t i = 1; i < bank.center_hz.size(); ++i)
    ASSERT_GT(bank.center_hz[i], bank.center_hz[i - 1]);
}
