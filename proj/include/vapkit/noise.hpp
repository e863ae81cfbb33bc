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
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "vapkit/alignment.hpp"
#include "vapkit/audio.hpp"
#include "vapkit/common.hpp"
#include "vapkit/rng.hpp"

namespace vapkit {

enum class NoiseKind { kBabble, kMusic, kSpeech };

inline const char* noise_kind_name(NoiseKind k) {
  switch (k) {
    case NoiseKind::kBabble: return "babble";
    case NoiseKind::kMusic: return "music";
    case NoiseKind::kSpeech: return "speech";
  }
  return "?";
}

inline NoiseKind noise_kind_from_name(const std::string& s) {
  if (s == "babble") return NoiseKind::kBabble;
  if (s == "music") return NoiseKind::kMusic;
  if (s == "speech") return NoiseKind::kSpeech;
  throw DataError("unknown noise kind: " + s);
}

inline const std::vector<NoiseKind>& all_noise_kinds() {
  static const std::vector<NoiseKind> kinds = {NoiseKind::kBabble, NoiseKind::kMusic,
                                               NoiseKind::kSpeech};
  return kinds;
}

enum class CorpusSplit { kTrain, kTest };

struct NoiseBank {
  NoiseKind kind = NoiseKind::kBabble;
  CorpusSplit split = CorpusSplit::kTrain;
  std::vector<std::vector<float>> clips;  // mono, pipeline rate
  std::vector<std::string> clip_names;

  void validate() const {
    if (clips.empty()) throw DataError("noise bank is empty");
    for (const auto& c : clips)
      if (c.empty()) throw DataError("noise bank contains an empty clip");
  }
};

struct MixSpec {
  double snr_db = 0.0;  // kCleanSnrDb means no noise
  NoiseKind kind = NoiseKind::kBabble;
  std::uint64_t seed = 0;

  bool is_clean() const { return std::isinf(snr_db) && snr_db > 0; }
};

struct ChannelMixInfo {
  double applied_gain = 0.0;
  std::size_t clip_id = 0;
  std::size_t offset = 0;
};

struct MixMetadata {
  std::string kind;
  double snr_db = 0.0;
  std::uint64_t seed = 0;
  std::vector<ChannelMixInfo> channels;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["kind"] = kind;
    j["snr_db"] = std::isinf(snr_db) ? 1e9 : snr_db;
    j["seed"] = seed;
    j["gain_per_channel"] = nlohmann::json::array();
    j["clip"] = nlohmann::json::array();
    j["offset"] = nlohmann::json::array();
    for (const auto& c : channels) {
      j["gain_per_channel"].push_back(c.applied_gain);
      j["clip"].push_back(c.clip_id);
      j["offset"].push_back(c.offset);
    }
    return j;
  }
};

// RMS of the samples within active voice frames. Each frame covers
// sample_rate / frame_rate consecutive samples.
inline double speech_rms(const std::vector<float>& channel,
                         const std::vector<std::uint8_t>& va, int sample_rate = kPipelineRate,
                         int frame_rate = kFrameRate) {
  const std::size_t spf = static_cast<std::size_t>(sample_rate / frame_rate);
  double acc = 0.0;
  std::size_t n = 0;
  for (std::size_t f = 0; f < va.size(); ++f) {
    if (!va[f]) continue;
    const std::size_t lo = f * spf;
    const std::size_t hi = std::min(channel.size(), (f + 1) * spf);
    for (std::size_t i = lo; i < hi; ++i) acc += static_cast<double>(channel[i]) * channel[i];
    n += hi > lo ? hi - lo : 0;
  }
  if (n == 0) throw DataError("speech_rms: no active speech frames");
  return std::sqrt(acc / static_cast<double>(n));
}

inline double rms(const std::vector<float>& x) {
  double acc = 0.0;
  for (float v : x) acc += static_cast<double>(v) * v;
  return x.empty() ? 0.0 : std::sqrt(acc / static_cast<double>(x.size()));
}

// Gain g so that 20*log10(speech_rms / (g * noise_rms)) equals snr_db.
inline double noise_gain(double speech_rms_amp, double noise_rms_amp, double snr_db) {
  if (speech_rms_amp <= 0.0 || noise_rms_amp <= 0.0)
    throw DataError("noise_gain: rms inputs must be positive");
  return (speech_rms_amp / noise_rms_amp) * std::pow(10.0, -snr_db / 20.0);
}

// Adds one bank clip to a channel at the target speech-referenced SNR.
// The clip is drawn from the seeded stream together with a start offset,
// tiled end-to-end to the channel length, and scaled so that the speech
// RMS over va=1 frames sits snr_db above the RMS of the full tiled noise.
inline std::vector<float> mix_channel(const std::vector<float>& channel,
                                      const std::vector<std::uint8_t>& va, const NoiseBank& bank,
                                      const MixSpec& spec, const std::string& session_id,
                                      int channel_index, ChannelMixInfo* info_out = nullptr) {
  if (spec.is_clean()) {
    if (info_out) *info_out = ChannelMixInfo{0.0, 0, 0};
    return channel;
  }
  bank.validate();
  Rng rng = Rng(spec.seed).derive(session_id).derive("channel", static_cast<std::uint64_t>(channel_index));
  const std::size_t clip_id = static_cast<std::size_t>(rng.uniform_index(bank.clips.size()));
  const auto& clip = bank.clips[clip_id];
  const std::size_t offset = static_cast<std::size_t>(rng.uniform_index(clip.size()));

  std::vector<float> noise(channel.size());
  for (std::size_t i = 0; i < noise.size(); ++i) noise[i] = clip[(offset + i) % clip.size()];

  const double s_rms = speech_rms(channel, va);
  const double n_rms = rms(noise);
  if (n_rms <= 0.0) throw DataError("mix_channel: noise clip is silent");
  const double g = noise_gain(s_rms, n_rms, spec.snr_db);

  std::vector<float> out(channel.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = channel[i] + static_cast<float>(g * noise[i]);
  if (info_out) *info_out = ChannelMixInfo{g, clip_id, offset};
  return out;
}

// Mixes both channels with independent draws (channel-distinct sub-seeds).
inline AudioBuffer mix_session(const AudioBuffer& audio, const VaTrack& va, const NoiseBank& bank,
                               const MixSpec& spec, const std::string& session_id,
                               MixMetadata* meta_out = nullptr) {
  audio.validate();
  if (audio.n_channels() != 2) throw DataError("mix_session: expects 2-channel audio");
  AudioBuffer out = audio;
  MixMetadata meta;
  meta.kind = spec.is_clean() ? "clean" : noise_kind_name(spec.kind);
  meta.snr_db = spec.snr_db;
  meta.seed = spec.seed;
  meta.channels.resize(2);
  for (int c = 0; c < 2; ++c)
    out.channels[c] =
        mix_channel(audio.channels[c], va.speaker[c], bank, spec, session_id, c, &meta.channels[c]);
  if (meta_out) *meta_out = meta;
  return out;
}

// Per-session training augmentation assignment: with probability p_noise a
// session gets one noise kind (uniform over `kinds`) at snr_db, else it
// stays clean. The draw is a pure function of (seed, session_id), so it is
// stable across epochs and folds.
struct AugmentAssignment {
  std::map<std::string, std::optional<MixSpec>> by_session;

  bool is_noisy(const std::string& id) const {
    auto it = by_session.find(id);
    return it != by_session.end() && it->second.has_value();
  }
};

inline AugmentAssignment augment_corpus(const std::vector<std::string>& session_ids,
                                        const std::vector<NoiseKind>& kinds, double p_noise,
                                        double snr_db, std::uint64_t seed) {
  if (p_noise < 0.0 || p_noise > 1.0) throw DataError("augment_corpus: p_noise must be in [0,1]");
  if (p_noise > 0.0 && kinds.empty()) throw DataError("augment_corpus: no noise kinds");
  AugmentAssignment out;
  for (const auto& id : session_ids) {
    Rng rng = Rng(seed).derive("augment").derive(id);
    if (rng.uniform() < p_noise) {
      MixSpec spec;
      spec.snr_db = snr_db;
      spec.kind = kinds[static_cast<std::size_t>(rng.uniform_index(kinds.size()))];
      spec.seed = seed;
      out.by_session[id] = spec;
    } else {
      out.by_session[id] = std::nullopt;
    }
  }
  return out;
}

// Measured SNR of a mixed recording: speech RMS of the clean signal during
// va=1 frames over the RMS of the residual noise across the whole
// recording. Returns +inf when the residual is zero.
inline double measure_snr(const std::vector<float>& clean, const std::vector<float>& noisy,
                          const std::vector<std::uint8_t>& va, int sample_rate = kPipelineRate,
                          int frame_rate = kFrameRate) {
  if (clean.size() != noisy.size()) throw DataError("measure_snr: length mismatch");
  std::vector<float> residual(clean.size());
  for (std::size_t i = 0; i < clean.size(); ++i) residual[i] = noisy[i] - clean[i];
  const double n_rms = rms(residual);
  if (n_rms <= 0.0) return kCleanSnrDb;
  const double s_rms = speech_rms(clean, va, sample_rate, frame_rate);
  return amplitude_to_db(s_rms / n_rms);
}

// Bank manifest: {"kind": ..., "split": ..., "files": [...]}.
inline void write_bank(const NoiseBank& bank, const std::filesystem::path& dir,
                       int sample_rate = kPipelineRate) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["kind"] = noise_kind_name(bank.kind);
  manifest["split"] = bank.split == CorpusSplit::kTrain ? "train" : "test";
  manifest["files"] = nlohmann::json::array();
  for (std::size_t i = 0; i < bank.clips.size(); ++i) {
    const std::string name =
        bank.clip_names.size() == bank.clips.size() ? bank.clip_names[i]
                                                    : "clip" + std::to_string(i) + ".wav";
    AudioBuffer buf;
    buf.sample_rate = sample_rate;
    buf.channels.push_back(bank.clips[i]);
    write_wav(buf, dir / name, WavFormat::kFloat32);
    manifest["files"].push_back(name);
  }
  std::ofstream os(dir / "manifest.json");
  os << manifest.dump(2) << "\n";
}

inline NoiseBank read_bank(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw DataError("cannot open bank manifest in " + dir.string());
  nlohmann::json manifest;
  in >> manifest;
  NoiseBank bank;
  bank.kind = noise_kind_from_name(manifest.at("kind").get<std::string>());
  bank.split = manifest.at("split").get<std::string>() == "train" ? CorpusSplit::kTrain
                                                                  : CorpusSplit::kTest;
  for (const auto& f : manifest.at("files")) {
    AudioBuffer buf = read_wav(dir / f.get<std::string>());
    bank.clips.push_back(buf.channels.at(0));
    bank.clip_names.push_back(f.get<std::string>());
  }
  bank.validate();
  return bank;
}

}  // namespace vapkit
