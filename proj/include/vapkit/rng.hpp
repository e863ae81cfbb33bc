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
#include <string>
#include <vector>

#include "vapkit/common.hpp"

namespace vapkit {

// Counter-based generator: each draw is a pure function of (key, counter),
// so parallel evaluation order cannot change any stream. Keys are derived
// from a seed plus string/integer labels, e.g. (seed, session_id, channel).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : key_(mix(seed ^ 0x9e3779b97f4a7c15ull)) {}

  Rng derive(const std::string& label) const {
    return Rng(FromKey{}, mix(key_ ^ fnv1a(label)));
  }
  Rng derive(std::uint64_t index) const {
    return Rng(FromKey{}, mix(key_ ^ mix(index + 0x632be59bd9b4e019ull)));
  }
  Rng derive(const std::string& label, std::uint64_t index) const {
    return derive(label).derive(index);
  }

  std::uint64_t next_u64() { return mix(key_ + (++counter_) * 0xbf58476d1ce4e5b9ull); }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  std::uint64_t uniform_index(std::uint64_t n) {
    // Modulo bias is < 2^-40 for any n this toolkit uses.
    return next_u64() % n;
  }

  // Box-Muller; one value per call, the pair partner is discarded so a
  // stream stays reproducible regardless of how callers interleave draws.
  double gaussian() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  double gaussian(double mean, double sd) { return mean + sd * gaussian(); }

  double lognormal(double mu, double sigma) { return std::exp(gaussian(mu, sigma)); }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_index(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  struct FromKey {};
  Rng(FromKey, std::uint64_t key) : key_(key) {}

  // splitmix64 finalizer.
  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

}  // namespace vapkit
