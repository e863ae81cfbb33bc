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
#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "vapkit/common.hpp"
#include "vapkit/nn.hpp"
#include "vapkit/vap.hpp"

namespace vapkit {

enum class Modality { kAudio, kAudioVideo, kVideo };

inline const char* modality_name(Modality m) {
  switch (m) {
    case Modality::kAudio: return "audio";
    case Modality::kAudioVideo: return "audio+video";
    case Modality::kVideo: return "video";
  }
  return "?";
}

inline Modality modality_from_name(const std::string& s) {
  if (s == "audio" || s == "vap") return Modality::kAudio;
  if (s == "audio+video" || s == "mmvap") return Modality::kAudioVideo;
  if (s == "video" || s == "video-only") return Modality::kVideo;
  throw DataError("unknown modality: " + s);
}

// Desk-scale defaults: a stereo causal transformer small enough to train
// on a laptop CPU in minutes. Channel encoders share weights, which makes
// the trunk symmetric under swapping the two speakers.
struct ModelConfig {
  Modality modality = Modality::kAudio;
  int d_model = 32;
  int n_heads = 4;
  int n_channel_layers = 2;
  int n_cross_layers = 1;
  int mel_bins = 40;
  int visual_dim = 0;  // data-defined; required for video modalities
  double dropout = 0.0;
  int ffn_factor = 2;
  bool use_positional = true;
  BinLayout layout;
  std::uint64_t seed = 1;

  bool uses_audio() const { return modality != Modality::kVideo; }
  bool uses_visual() const { return modality != Modality::kAudio; }

  void validate() const {
    if (d_model < 1 || n_heads < 1 || d_model % n_heads != 0)
      throw DataError("model config: d_model must be a positive multiple of n_heads");
    if (n_channel_layers < 1 || n_cross_layers < 1)
      throw DataError("model config: layer counts must be >= 1");
    if (uses_audio() && mel_bins < 1) throw DataError("model config: mel_bins must be >= 1");
    if (uses_visual() && visual_dim < 1)
      throw DataError("model config: visual_dim required for video modalities");
    if (dropout < 0.0 || dropout >= 1.0) throw DataError("model config: dropout in [0,1)");
    if (ffn_factor < 1) throw DataError("model config: ffn_factor must be >= 1");
    layout.validate();
  }

  nlohmann::json to_json() const {
    return nlohmann::json{{"modality", modality_name(modality)},
                          {"d_model", d_model},
                          {"n_heads", n_heads},
                          {"n_channel_layers", n_channel_layers},
                          {"n_cross_layers", n_cross_layers},
                          {"mel_bins", mel_bins},
                          {"visual_dim", visual_dim},
                          {"dropout", dropout},
                          {"ffn_factor", ffn_factor},
                          {"use_positional", use_positional},
                          {"frame_rate", layout.frame_rate},
                          {"seed", seed}};
  }

  static ModelConfig from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.modality = modality_from_name(j.at("modality").get<std::string>());
    c.d_model = j.at("d_model").get<int>();
    c.n_heads = j.at("n_heads").get<int>();
    c.n_channel_layers = j.at("n_channel_layers").get<int>();
    c.n_cross_layers = j.at("n_cross_layers").get<int>();
    c.mel_bins = j.at("mel_bins").get<int>();
    c.visual_dim = j.at("visual_dim").get<int>();
    c.dropout = j.at("dropout").get<double>();
    c.ffn_factor = j.at("ffn_factor").get<int>();
    c.use_positional = j.at("use_positional").get<bool>();
    c.layout.frame_rate = j.at("frame_rate").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
  }
};

// One 2-channel feature window. Audio features are log-mel (T x mel_bins),
// visual features are T x visual_dim; either may be absent per modality.
template <typename S>
struct ItemInput {
  std::array<Mat<S>, 2> audio;
  std::array<Mat<S>, 2> visual;

  int frames(const ModelConfig& cfg) const {
    return static_cast<int>(cfg.uses_audio() ? audio[0].rows() : visual[0].rows());
  }
};

template <typename S>
struct ItemTargets {
  std::vector<int> state;  // per frame; -1 = invalid (excluded from CE)
  Mat<S> vad;              // T x 2 current-frame voice activity
};

struct LossParts {
  double ce = 0.0;
  double bce = 0.0;
  double total() const { return ce + bce; }
};

// ---------------------------------------------------------------------------
// Stereo causal VAP transformer.
//
// Per channel: input projection (+ sinusoidal positions) -> n_channel_layers
// of causal self-attention blocks; then n_cross_layers where each channel
// attends causally to the other channel's states; per frame the two channel
// states are concatenated and fed to a 256-way state head and a 2-way VAD
// head. Outputs at frame t depend only on inputs at frames <= t.
// ---------------------------------------------------------------------------
template <typename S>
class VapNet {
 public:
  explicit VapNet(const ModelConfig& cfg) : cfg_(cfg) {
    const double init_std = 1.0 / std::sqrt(static_cast<double>(cfg.d_model));
    Rng rng = Rng(cfg.seed).derive("init");
    if (cfg.uses_audio())
      audio_in_.init(reg_, "audio_in", cfg.mel_bins, cfg.d_model, init_std, rng.derive("a"));
    if (cfg.uses_visual())
      vis_in_.init(reg_, "vis_in", cfg.visual_dim, cfg.d_model, init_std, rng.derive("v"));
    if (cfg.modality == Modality::kAudioVideo)
      fuse_.init(reg_, "fuse", 2 * cfg.d_model, cfg.d_model, init_std, rng.derive("f"));
    channel_blocks_.resize(cfg.n_channel_layers);
    for (int l = 0; l < cfg.n_channel_layers; ++l)
      channel_blocks_[l].init(reg_, "ch" + std::to_string(l), cfg.d_model, cfg.n_heads,
                              cfg.ffn_factor, init_std, rng.derive("ch", l));
    cross_blocks_.resize(cfg.n_cross_layers);
    for (int l = 0; l < cfg.n_cross_layers; ++l)
      cross_blocks_[l].init(reg_, "cx" + std::to_string(l), cfg.d_model, cfg.n_heads,
                            cfg.ffn_factor, init_std, rng.derive("cx", l));
    final_ln_.init(reg_, "final_ln", cfg.d_model);
    state_head_.init(reg_, "state_head", 2 * cfg.d_model, kVapStates, init_std, rng.derive("s"));
    vad_head_.init(reg_, "vad_head", 2 * cfg.d_model, 2, init_std, rng.derive("d"));
  }

  const ModelConfig& config() const { return cfg_; }
  ParamRegistry<S>& params() { return reg_; }
  const ParamRegistry<S>& params() const { return reg_; }

  Linear<S>& state_head() { return state_head_; }
  Linear<S>& vad_head() { return vad_head_; }

  struct ItemCache {
    std::array<Mat<S>, 2> concat_in;   // audio+video: [Ea | Ev] pre-fuse
    std::array<std::vector<typename TransformerBlock<S>::Cache>, 2> ch_caches;
    std::array<std::vector<typename TransformerBlock<S>::Cache>, 2> cx_caches;
    std::array<Mat<S>, 2> h_final;     // input to the final LayerNorm
    Mat<S> z;                          // T x 2d concatenated states
    Mat<S> state_logits;               // T x 256
    Mat<S> vad_logits;                 // T x 2
  };

  // `dropout_rng` non-null enables training-time dropout (cfg.dropout > 0).
  void forward_item(const ItemInput<S>& input, ItemCache& cache,
                    Rng* dropout_rng = nullptr) const {
    std::array<Mat<S>, 2> h;
    const int t_len = input.frames(cfg_);
    typename TransformerBlock<S>::DropoutCtx drop{cfg_.dropout, Rng(0)};
    const bool use_drop = dropout_rng != nullptr && cfg_.dropout > 0.0;
    if (use_drop) drop.rng = *dropout_rng;
    auto* dropp = use_drop ? &drop : nullptr;

    Mat<S> pe;
    if (cfg_.use_positional) pe = positional_encoding<S>(t_len, cfg_.d_model);
    for (int k = 0; k < 2; ++k) {
      switch (cfg_.modality) {
        case Modality::kAudio:
          h[k] = audio_in_.forward(input.audio[k]);
          break;
        case Modality::kVideo:
          h[k] = vis_in_.forward(input.visual[k]);
          break;
        case Modality::kAudioVideo: {
          Mat<S> ea = audio_in_.forward(input.audio[k]);
          Mat<S> ev = vis_in_.forward(input.visual[k]);
          cache.concat_in[k].resize(t_len, 2 * cfg_.d_model);
          cache.concat_in[k] << ea, ev;
          h[k] = fuse_.forward(cache.concat_in[k]);
          break;
        }
      }
      if (cfg_.use_positional) h[k] += pe;
    }

    for (int k = 0; k < 2; ++k) cache.ch_caches[k].resize(channel_blocks_.size());
    for (std::size_t l = 0; l < channel_blocks_.size(); ++l)
      for (int k = 0; k < 2; ++k)
        h[k] = channel_blocks_[l].forward(h[k], cache.ch_caches[k][l], dropp);

    for (int k = 0; k < 2; ++k) cache.cx_caches[k].resize(cross_blocks_.size());
    for (std::size_t l = 0; l < cross_blocks_.size(); ++l) {
      // Both channels update from the pre-layer pair of states.
      Mat<S> h0 = cross_blocks_[l].forward_cross(h[0], h[1], cache.cx_caches[0][l], dropp);
      Mat<S> h1 = cross_blocks_[l].forward_cross(h[1], h[0], cache.cx_caches[1][l], dropp);
      h[0] = std::move(h0);
      h[1] = std::move(h1);
    }

    cache.z.resize(t_len, 2 * cfg_.d_model);
    for (int k = 0; k < 2; ++k) {
      cache.h_final[k] = h[k];
      cache.z.middleCols(k * cfg_.d_model, cfg_.d_model) = final_ln_.forward(h[k]);
    }
    cache.state_logits = state_head_.forward(cache.z);
    cache.vad_logits = vad_head_.forward(cache.z);
  }

  // Mean CE over valid frames plus mean BCE over all frames and speakers;
  // optionally emits d(loss)/d(logits) for the backward pass.
  LossParts loss(const ItemCache& cache, const ItemTargets<S>& targets,
                 Mat<S>* dstate_out = nullptr, Mat<S>* dvad_out = nullptr) const {
    const auto& logits = cache.state_logits;
    const int t_len = static_cast<int>(logits.rows());
    if (static_cast<int>(targets.state.size()) != t_len || targets.vad.rows() != t_len)
      throw DataError("loss: target shape mismatch");

    int n_valid = 0;
    for (int t = 0; t < t_len; ++t)
      if (targets.state[t] >= 0) ++n_valid;
    if (n_valid == 0) throw NumericError("loss: no valid frames in window");

    LossParts parts;
    if (dstate_out) dstate_out->setZero(t_len, kVapStates);
    for (int t = 0; t < t_len; ++t) {
      const int label = targets.state[t];
      if (label < 0) continue;
      const S mx = logits.row(t).maxCoeff();
      double denom = 0.0;
      for (int sidx = 0; sidx < kVapStates; ++sidx)
        denom += std::exp(static_cast<double>(logits(t, sidx) - mx));
      const double lse = static_cast<double>(mx) + std::log(denom);
      parts.ce += lse - static_cast<double>(logits(t, label));
      if (dstate_out) {
        for (int sidx = 0; sidx < kVapStates; ++sidx)
          (*dstate_out)(t, sidx) = static_cast<S>(
              std::exp(static_cast<double>(logits(t, sidx) - mx)) / denom / n_valid);
        (*dstate_out)(t, label) -= static_cast<S>(1.0 / n_valid);
      }
    }
    parts.ce /= n_valid;

    const auto& vlog = cache.vad_logits;
    const double n_vad = static_cast<double>(t_len) * 2.0;
    if (dvad_out) dvad_out->setZero(t_len, 2);
    for (int t = 0; t < t_len; ++t) {
      for (int k = 0; k < 2; ++k) {
        const double z = static_cast<double>(vlog(t, k));
        const double y = static_cast<double>(targets.vad(t, k));
        parts.bce += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
        if (dvad_out)
          (*dvad_out)(t, k) = static_cast<S>((1.0 / (1.0 + std::exp(-z)) - y) / n_vad);
      }
    }
    parts.bce /= n_vad;
    return parts;
  }

  void backward_item(const ItemInput<S>& input, const ItemCache& cache, const Mat<S>& dstate,
                     const Mat<S>& dvad, Grads<S>& g) const {
    Mat<S> dz = state_head_.backward(cache.z, dstate, g);
    dz += vad_head_.backward(cache.z, dvad, g);

    std::array<Mat<S>, 2> dh;
    for (int k = 0; k < 2; ++k)
      dh[k] = final_ln_.backward(cache.h_final[k],
                                 Mat<S>(dz.middleCols(k * cfg_.d_model, cfg_.d_model)), g);

    for (int l = static_cast<int>(cross_blocks_.size()) - 1; l >= 0; --l) {
      Mat<S> dh0_other = Mat<S>::Zero(dh[0].rows(), dh[0].cols());
      Mat<S> dh1_other = Mat<S>::Zero(dh[1].rows(), dh[1].cols());
      Mat<S> dh0 = cross_blocks_[l].backward(cache.cx_caches[0][l], dh[0], g, &dh1_other);
      Mat<S> dh1 = cross_blocks_[l].backward(cache.cx_caches[1][l], dh[1], g, &dh0_other);
      dh[0] = dh0 + dh0_other;
      dh[1] = dh1 + dh1_other;
    }

    for (int l = static_cast<int>(channel_blocks_.size()) - 1; l >= 0; --l)
      for (int k = 0; k < 2; ++k)
        dh[k] = channel_blocks_[l].backward(cache.ch_caches[k][l], dh[k], g);

    for (int k = 0; k < 2; ++k) {
      switch (cfg_.modality) {
        case Modality::kAudio:
          audio_in_.backward(input.audio[k], dh[k], g);
          break;
        case Modality::kVideo:
          vis_in_.backward(input.visual[k], dh[k], g);
          break;
        case Modality::kAudioVideo: {
          Mat<S> dc = fuse_.backward(cache.concat_in[k], dh[k], g);
          audio_in_.backward(input.audio[k], Mat<S>(dc.leftCols(cfg_.d_model)), g);
          vis_in_.backward(input.visual[k], Mat<S>(dc.rightCols(cfg_.d_model)), g);
          break;
        }
      }
    }
  }

  // Forward + per-frame distributions, no gradient bookkeeping kept.
  std::vector<VapDistribution> predict_item(const ItemInput<S>& input) const {
    ItemCache cache;
    forward_item(input, cache);
    return logits_to_distributions(cache);
  }

  static std::vector<VapDistribution> logits_to_distributions(const ItemCache& cache) {
    const int t_len = static_cast<int>(cache.state_logits.rows());
    std::vector<VapDistribution> out(static_cast<std::size_t>(t_len));
    for (int t = 0; t < t_len; ++t) {
      const S mx = cache.state_logits.row(t).maxCoeff();
      double denom = 0.0;
      for (int s = 0; s < kVapStates; ++s)
        denom += std::exp(static_cast<double>(cache.state_logits(t, s) - mx));
      for (int s = 0; s < kVapStates; ++s)
        out[t].probs[s] = static_cast<float>(
            std::exp(static_cast<double>(cache.state_logits(t, s) - mx)) / denom);
      for (int k = 0; k < 2; ++k)
        out[t].vad[k] = static_cast<float>(
            1.0 / (1.0 + std::exp(-static_cast<double>(cache.vad_logits(t, k)))));
    }
    return out;
  }

 private:
  ModelConfig cfg_;
  ParamRegistry<S> reg_;
  Linear<S> audio_in_, vis_in_, fuse_;
  std::vector<TransformerBlock<S>> channel_blocks_;
  std::vector<TransformerBlock<S>> cross_blocks_;
  LayerNorm<S> final_ln_;
  Linear<S> state_head_, vad_head_;
};

// Central finite differences over every parameter of a tiny
// double-precision build; returns the maximum relative error.
inline double grad_check(const ModelConfig& cfg, const ItemInput<double>& input,
                         const ItemTargets<double>& targets, double h = 1e-5) {
  VapNet<double> net(cfg);
  auto& reg = net.params();

  VapNet<double>::ItemCache cache;
  net.forward_item(input, cache);
  Mat<double> dstate, dvad;
  net.loss(cache, targets, &dstate, &dvad);
  Grads<double> grads = reg.zero_grads();
  net.backward_item(input, cache, dstate, dvad, grads);

  const auto loss_at = [&]() {
    VapNet<double>::ItemCache c;
    net.forward_item(input, c);
    return net.loss(c, targets).total();
  };

  double max_rel = 0.0;
  for (std::size_t p = 0; p < reg.size(); ++p) {
    auto& value = reg[p].value;
    for (int i = 0; i < value.size(); ++i) {
      double* ptr = value.data() + i;
      const double saved = *ptr;
      *ptr = saved + h;
      const double up = loss_at();
      *ptr = saved - h;
      const double down = loss_at();
      *ptr = saved;
      const double fd = (up - down) / (2.0 * h);
      const double an = grads[p].data()[i];
      const double rel = std::abs(an - fd) / std::max({1e-8, std::abs(an), std::abs(fd)});
      if (std::isnan(an) || std::isnan(fd)) return 1.0;
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

}  // namespace vapkit
