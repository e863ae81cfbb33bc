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
#include <limits>
#include <stdexcept>
#include <string>

namespace vapkit {

inline constexpr const char* kVersion = "0.1.0";

// Fixed processing rates for the whole pipeline. Corpus audio at other
// rates is resampled on ingest; all feature streams run at kFrameRate.
inline constexpr int kPipelineRate = 16000;  // Hz
inline constexpr int kFrameRate = 50;        // model frames per second
inline constexpr int kSamplesPerFrame = kPipelineRate / kFrameRate;

// Reserved sentinel meaning "no noise added".
inline constexpr double kCleanSnrDb = std::numeric_limits<double>::infinity();

// Error taxonomy. DataError maps to CLI exit code 2, NumericError to 3.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};
struct DataError : Error {
  explicit DataError(const std::string& msg) : Error(msg) {}
};
struct NumericError : Error {
  explicit NumericError(const std::string& msg) : Error(msg) {}
};

inline double db_to_amplitude(double db) { return std::pow(10.0, db / 20.0); }

inline double amplitude_to_db(double amp) { return 20.0 * std::log10(amp); }

// FNV-1a over bytes; used for config hashes embedded in outputs.
inline std::uint64_t fnv1a(const void* data, std::size_t n,
                           std::uint64_t h = 14695981039346656037ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

inline std::uint64_t fnv1a(const std::string& s,
                           std::uint64_t h = 14695981039346656037ull) {
  return fnv1a(s.data(), s.size(), h);
}

}  // namespace vapkit
