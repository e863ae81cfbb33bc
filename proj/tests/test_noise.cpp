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

#include "vapkit/noise.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "vapkit/rng.hpp"

using namespace vapkit;

namespace {

// 1 s of sine at the pipeline rate, active in the first half only.
struct SineFixture {
  std::vector<float> channel;
  std::vector<std::uint8_t> va;

  explicit SineFixture(double amp = 0.3, bool active_everywhere = false) {
    channel.resize(kPipelineRate * 2);
    va.assign(100, 0);
    for (int f = 0; f < (active_everywhere ? 100 : 50); ++f) va[f] = 1;
    const std::size_t active_samples = active_everywhere ? channel.size() : channel.size() / 2;
    for (std::size_t i = 0; i < active_samples; ++i)
      channel[i] = static_cast<float>(amp * std::sin(2.0 * M_PI * 220.0 * i / kPipelineRate));
  }
};

NoiseBank white_bank(int n_clips = 3, std::size_t len = 48000, std::uint64_t seed = 5) {
  NoiseBank bank;
  bank.kind = NoiseKind::kBabble;
  Rng rng(seed);
  for (int c = 0; c < n_clips; ++c) {
    std::vector<float> clip(len);
    for (auto& v : clip) v = static_cast<float>(rng.gaussian(0.0, 0.1));
    bank.clips.push_back(std::move(clip));
  }
  return bank;
}

}  // namespace

TEST(SpeechRms, SineActiveEverywhere) {
  SineFixture fx(0.4, true);
  EXPECT_NEAR(speech_rms(fx.channel, fx.va), 0.4 / std::sqrt(2.0), 1e-3);
}

TEST(SpeechRms, SilenceOutsideSpeechIgnored) {
  SineFixture fx(0.4, false);  // sine in first half, zeros elsewhere
  EXPECT_NEAR(speech_rms(fx.channel, fx.va), 0.4 / std::sqrt(2.0), 1e-3);
}

TEST(SpeechRms, NoActiveFramesRejected) {
  SineFixture fx;
  std::fill(fx.va.begin(), fx.va.end(), 0);
  EXPECT_THROW(speech_rms(fx.channel, fx.va), DataError);
}

TEST(NoiseGain, AnalyticCases) {
  EXPECT_NEAR(noise_gain(0.1, 0.1, 0.0), 1.0, 1e-12);
  EXPECT_NEAR(noise_gain(0.1, 0.1, 10.0), std::pow(10.0, -0.5), 1e-9);
  EXPECT_NEAR(noise_gain(0.2, 0.1, -5.0), 2.0 * std::pow(10.0, 0.25), 1e-9);
}

TEST(NoiseGain, ZeroRmsRejected) {
  EXPECT_THROW(noise_gain(0.0, 0.1, 0.0), DataError);
  EXPECT_THROW(noise_gain(0.1, 0.0, 0.0), DataError);
}

TEST(MixChannel, ClosesSnrLoopAtZeroDb) {
  SineFixture fx(0.3, true);
  NoiseBank bank = white_bank();
  MixSpec spec{0.0, NoiseKind::kBabble, 99};
  auto noisy = mix_channel(fx.channel, fx.va, bank, spec, "s1", 0);
  EXPECT_NEAR(measure_snr(fx.channel, noisy, fx.va), 0.0, 0.1);
}

TEST(MixChannel, DerivedGainVerifiedByRemeasurement) {
  // speech_rms 0.2, noise_rms 0.1, -5 dB target: g = 2*10^0.25.
  SineFixture fx(0.2 * std::sqrt(2.0), true);
  NoiseBank bank = white_bank(1);
  MixSpec spec{-5.0, NoiseKind::kBabble, 7};
  ChannelMixInfo info;
  auto noisy = mix_channel(fx.channel, fx.va, bank, spec, "s", 0, &info);
  EXPECT_NEAR(measure_snr(fx.channel, noisy, fx.va), -5.0, 0.1);
  // Same inputs re-derived analytically.
  const double expected_gain =
      noise_gain(speech_rms(fx.channel, fx.va), 0.1, -5.0);
  EXPECT_NEAR(info.applied_gain, expected_gain, expected_gain * 0.05);
}

TEST(MixChannel, CleanSentinelIsIdentity) {
  SineFixture fx;
  NoiseBank bank = white_bank();
  MixSpec spec{kCleanSnrDb, NoiseKind::kMusic, 1};
  ChannelMixInfo info;
  auto out = mix_channel(fx.channel, fx.va, bank, spec, "s", 0, &info);
  EXPECT_EQ(out, fx.channel);
  EXPECT_EQ(info.applied_gain, 0.0);
}

TEST(MixChannel, SameSeedGivesIdenticalBytes) {
  SineFixture fx(0.3, true);
  NoiseBank bank = white_bank();
  MixSpec spec{2.5, NoiseKind::kBabble, 1234};
  ChannelMixInfo a_info, b_info;
  auto a = mix_channel(fx.channel, fx.va, bank, spec, "sess", 0, &a_info);
  auto b = mix_channel(fx.channel, fx.va, bank, spec, "sess", 0, &b_info);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a_info.clip_id, b_info.clip_id);
  EXPECT_EQ(a_info.offset, b_info.offset);
  EXPECT_EQ(a_info.applied_gain, b_info.applied_gain);
}

TEST(MixChannel, GainStrictlyDecreasesWithSnr) {
  SineFixture fx(0.3, true);
  NoiseBank bank = white_bank(1);
  double prev = 1e30;
  for (double snr = -10.0; snr <= 10.0; snr += 2.5) {
    MixSpec spec{snr, NoiseKind::kBabble, 5};
    ChannelMixInfo info;
    mix_channel(fx.channel, fx.va, bank, spec, "s", 0, &info);
    EXPECT_LT(info.applied_gain, prev);
    prev = info.applied_gain;
  }
}

TEST(MixChannel, ScaleCovariance) {
  // Scaling the clean channel by c scales the applied gain by c.
  SineFixture fx(0.3, true);
  NoiseBank bank = white_bank(1);
  MixSpec spec{0.0, NoiseKind::kBabble, 5};
  ChannelMixInfo info1, info2;
  mix_channel(fx.channel, fx.va, bank, spec, "s", 0, &info1);
  auto scaled = fx.channel;
  for (auto& v : scaled) v *= 2.0f;
  mix_channel(scaled, fx.va, bank, spec, "s", 0, &info2);
  EXPECT_NEAR(info2.applied_gain, 2.0 * info1.applied_gain, 1e-5 * info1.applied_gain);
}

TEST(MixSession, IndependentDrawsPerChannel) {
  AudioBuffer audio = AudioBuffer::zeros(2, kPipelineRate, kPipelineRate);
  VaTrack va;
  va.speaker[0].assign(50, 1);
  va.speaker[1].assign(50, 1);
  for (int c = 0; c < 2; ++c)
    for (int i = 0; i < kPipelineRate; ++i)
      audio.channels[c][i] =
          static_cast<float>(0.25 * std::sin(2.0 * M_PI * (150.0 + 80.0 * c) * i / kPipelineRate));
  NoiseBank bank = white_bank(64);
  MixSpec spec{0.0, NoiseKind::kBabble, 21};
  MixMetadata meta;
  mix_session(audio, va, bank, spec, "sess", &meta);
  ASSERT_EQ(meta.channels.size(), 2u);
  EXPECT_NE(meta.channels[0].clip_id, meta.channels[1].clip_id);
  EXPECT_NEAR(meta.snr_db, 0.0, 1e-12);
}

TEST(MixSession, BothChannelsHitTargetSnr) {
  AudioBuffer audio = AudioBuffer::zeros(2, 2 * kPipelineRate, kPipelineRate);
  VaTrack va;
  va.speaker[0].assign(100, 1);
  va.speaker[1].assign(100, 1);
  for (int c = 0; c < 2; ++c)
    for (std::size_t i = 0; i < audio.length(); ++i)
      audio.channels[c][i] =
          static_cast<float>(0.3 * std::sin(2.0 * M_PI * (200.0 + 40.0 * c) * i / kPipelineRate));
  NoiseBank bank = white_bank(4);
  MixSpec spec{0.0, NoiseKind::kMusic, 3};
  AudioBuffer noisy = mix_session(audio, va, bank, spec, "x");
  for (int c = 0; c < 2; ++c)
    EXPECT_NEAR(measure_snr(audio.channels[c], noisy.channels[c], va.speaker[c]), 0.0, 0.1);
}

TEST(MeasureSnr, CleanInputGivesInfinity) {
  SineFixture fx(0.3, true);
  EXPECT_TRUE(std::isinf(measure_snr(fx.channel, fx.channel, fx.va)));
}

TEST(MeasureSnr, DoublingNoiseDropsSixDb) {
  SineFixture fx(0.3, true);
  Rng rng(6);
  std::vector<float> noise(fx.channel.size());
  for (auto& v : noise) v = static_cast<float>(rng.gaussian(0.0, 0.05));
  std::vector<float> noisy1(fx.channel.size()), noisy2(fx.channel.size());
  for (std::size_t i = 0; i < noise.size(); ++i) {
    noisy1[i] = fx.channel[i] + noise[i];
    noisy2[i] = fx.channel[i] + 2.0f * noise[i];
  }
  const double snr1 = measure_snr(fx.channel, noisy1, fx.va);
  const double snr2 = measure_snr(fx.channel, noisy2, fx.va);
  EXPECT_NEAR(snr1 - snr2, 6.02, 0.05);
}

TEST(AugmentCorpus, ZeroProbabilityAllClean) {
  std::vector<std::string> ids;
  for (int i = 0; i < 50; ++i) ids.push_back("s" + std::to_string(i));
  auto assign = augment_corpus(ids, all_noise_kinds(), 0.0, 0.0, 9);
  for (const auto& id : ids) EXPECT_FALSE(assign.is_noisy(id));
}

TEST(AugmentCorpus, ProbabilityOneSingleKind) {
  std::vector<std::string> ids = {"a", "b", "c"};
  auto assign = augment_corpus(ids, {NoiseKind::kMusic}, 1.0, 0.0, 9);
  for (const auto& id : ids) {
    ASSERT_TRUE(assign.is_noisy(id));
    EXPECT_EQ(assign.by_session.at(id)->kind, NoiseKind::kMusic);
  }
}

TEST(AugmentCorpus, QuarterRateAndUniformKinds) {
  std::vector<std::string> ids;
  for (int i = 0; i < 10000; ++i) ids.push_back("sess" + std::to_string(i));
  auto assign = augment_corpus(ids, all_noise_kinds(), 0.25, 0.0, 1234);
  int noisy = 0;
  int per_kind[3] = {0, 0, 0};
  for (const auto& id : ids) {
    if (assign.is_noisy(id)) {
      ++noisy;
      ++per_kind[static_cast<int>(assign.by_session.at(id)->kind)];
    }
  }
  EXPECT_NEAR(noisy / 10000.0, 0.25, 0.01);
  for (int k = 0; k < 3; ++k) EXPECT_NEAR(per_kind[k] / static_cast<double>(noisy), 1.0 / 3, 0.02);
}

TEST(AugmentCorpus, StablePerSessionAcrossCalls) {
  std::vector<std::string> ids = {"s1", "s2", "s3", "s4", "s5", "s6", "s7", "s8"};
  auto a = augment_corpus(ids, all_noise_kinds(), 0.5, 0.0, 77);
  std::vector<std::string> shuffled = {"s8", "s3", "s1", "s5", "s2", "s7", "s6", "s4"};
  auto b = augment_corpus(shuffled, all_noise_kinds(), 0.5, 0.0, 77);
  for (const auto& id : ids) {
    ASSERT_EQ(a.is_noisy(id), b.is_noisy(id));
    if (a.is_noisy(id)) EXPECT_EQ(a.by_session.at(id)->kind, b.by_session.at(id)->kind);
  }
}

TEST(NoiseBankIo, ManifestRoundTrip) {
  NoiseBank bank = white_bank(3, 8000);
  bank.kind = NoiseKind::kMusic;
  bank.split = CorpusSplit::kTest;
  const auto dir = std::filesystem::temp_directory_path() / "vapkit_bank_test";
  std::filesystem::remove_all(dir);
  write_bank(bank, dir);
  NoiseBank loaded = read_bank(dir);
  EXPECT_EQ(loaded.kind, NoiseKind::kMusic);
  EXPECT_EQ(loaded.split, CorpusSplit::kTest);
  ASSERT_EQ(loaded.clips.size(), 3u);
  for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(loaded.clips[c], bank.clips[c]);
}

TEST(SnrClosure, WholeGridWithinTolerance) {
  SineFixture fx(0.3, true);
  NoiseBank bank = white_bank(2);
  for (double snr = -10.0; snr <= 10.0 + 1e-9; snr += 2.5) {
    MixSpec spec{snr, NoiseKind::kBabble, 31};
    auto noisy = mix_channel(fx.channel, fx.va, bank, spec, "grid", 0);
    EXPECT_NEAR(measure_snr(fx.channel, noisy, fx.va), snr, 0.1) << "snr " << snr;
  }
}
