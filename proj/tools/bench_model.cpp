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

// Micro-benchmark: forward/backward cost of one 20 s window, used to size
// the desk-scale default configuration.

#include <chrono>
#include <cstdio>
#include <cstdlib>

#include "vapkit/model.hpp"
#include "vapkit/rng.hpp"

using namespace vapkit;

int main(int argc, char** argv) {
  const int d_model = argc > 1 ? std::atoi(argv[1]) : 32;
  const int t_len = argc > 2 ? std::atoi(argv[2]) : 1000;
  const int reps = argc > 3 ? std::atoi(argv[3]) : 5;

  ModelConfig cfg;
  cfg.modality = Modality::kAudio;
  cfg.d_model = d_model;
  cfg.n_heads = 4;
  cfg.n_channel_layers = 2;
  cfg.n_cross_layers = 1;
  cfg.mel_bins = 40;
  VapNet<float> net(cfg);

  Rng rng(7);
  ItemInput<float> input;
  for (int k = 0; k < 2; ++k) {
    input.audio[k].resize(t_len, cfg.mel_bins);
    for (int t = 0; t < t_len; ++t)
      for (int m = 0; m < cfg.mel_bins; ++m)
        input.audio[k](t, m) = static_cast<float>(rng.gaussian());
  }
  ItemTargets<float> targets;
  targets.state.assign(t_len, 0);
  for (int t = 0; t < t_len; ++t) targets.state[t] = static_cast<int>(rng.uniform_index(256));
  targets.vad = Mat<float>::Zero(t_len, 2);

  // Warm up.
  VapNet<float>::ItemCache cache;
  net.forward_item(input, cache);

  auto t0 = std::chrono::steady_clock::now();
  for (int r = 0; r < reps; ++r) {
    net.forward_item(input, cache);
  }
  auto t1 = std::chrono::steady_clock::now();
  double fwd_ms = std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;

  Grads<float> grads = net.params().zero_grads();
  t0 = std::chrono::steady_clock::now();
  for (int r = 0; r < reps; ++r) {
    net.forward_item(input, cache);
    Mat<float> dstate, dvad;
    net.loss(cache, targets, &dstate, &dvad);
    net.backward_item(input, cache, dstate, dvad, grads);
  }
  t1 = std::chrono::steady_clock::now();
  double step_ms = std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;

  std::printf("d_model=%d T=%d params=%zu fwd=%.1f ms fwd+bwd=%.1f ms\n", d_model, t_len,
              net.params().scalar_count(), fwd_ms, step_ms);
  return 0;
}
