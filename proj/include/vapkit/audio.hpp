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
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "vapkit/common.hpp"

namespace vapkit {

// Distinct read failure modes so callers can tell a bad container from a
// bad payload.
struct MalformedWavError : DataError {
  explicit MalformedWavError(const std::string& m) : DataError("malformed wav: " + m) {}
};
struct UnsupportedWavError : DataError {
  explicit UnsupportedWavError(const std::string& m) : DataError("unsupported wav: " + m) {}
};
struct TruncatedWavError : DataError {
  explicit TruncatedWavError(const std::string& m) : DataError("truncated wav: " + m) {}
};

// Per-channel sample store. Samples are dimensionless amplitudes with
// nominal range [-1, 1]; channels always have equal length.
struct AudioBuffer {
  std::vector<std::vector<float>> channels;
  int sample_rate = kPipelineRate;

  int n_channels() const { return static_cast<int>(channels.size()); }
  std::size_t length() const { return channels.empty() ? 0 : channels[0].size(); }
  double duration_s() const {
    return static_cast<double>(length()) / static_cast<double>(sample_rate);
  }

  void validate() const {
    if (sample_rate <= 0) throw DataError("audio: sample_rate must be positive");
    if (channels.empty()) throw DataError("audio: no channels");
    for (const auto& c : channels)
      if (c.size() != channels[0].size())
        throw DataError("audio: channels have unequal length");
  }

  static AudioBuffer zeros(int n_channels, std::size_t n, int rate) {
    AudioBuffer b;
    b.sample_rate = rate;
    b.channels.assign(static_cast<std::size_t>(n_channels), std::vector<float>(n, 0.0f));
    return b;
  }
};

enum class WavFormat { kPcm16, kFloat32 };

namespace detail {

inline std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
inline std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
inline void put_u32(std::string& s, std::uint32_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>((v >> 8) & 0xff));
  s.push_back(static_cast<char>((v >> 16) & 0xff));
  s.push_back(static_cast<char>((v >> 24) & 0xff));
}
inline void put_u16(std::string& s, std::uint16_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>((v >> 8) & 0xff));
}

}  // namespace detail

// Reads RIFF/WAVE, PCM 16-bit or IEEE float32, 1 or 2 channels.
// PCM16 samples are scaled by 1/32768.
inline AudioBuffer read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open wav file: " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw MalformedWavError(path.string());

  std::uint16_t format = 0, n_channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  const unsigned char* data = nullptr;
  std::uint32_t data_size = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* hdr = bytes.data() + pos;
    std::uint32_t chunk_size = detail::read_u32(hdr + 4);
    const unsigned char* body = hdr + 8;
    if (pos + 8 + chunk_size > bytes.size()) {
      if (std::memcmp(hdr, "data", 4) == 0)
        throw TruncatedWavError(path.string() + ": data chunk exceeds file");
      throw MalformedWavError(path.string() + ": chunk exceeds file");
    }
    if (std::memcmp(hdr, "fmt ", 4) == 0) {
      if (chunk_size < 16) throw MalformedWavError(path.string() + ": short fmt chunk");
      format = detail::read_u16(body);
      n_channels = detail::read_u16(body + 2);
      rate = detail::read_u32(body + 4);
      bits = detail::read_u16(body + 14);
      have_fmt = true;
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      data = body;
      data_size = chunk_size;
    }
    pos += 8 + chunk_size + (chunk_size & 1);  // chunks are word-aligned
  }
  if (!have_fmt || data == nullptr) throw MalformedWavError(path.string() + ": missing chunk");
  if (n_channels < 1 || n_channels > 2)
    throw UnsupportedWavError(path.string() + ": " + std::to_string(n_channels) + " channels");
  if (rate == 0) throw MalformedWavError(path.string() + ": zero sample rate");

  const bool is_pcm16 = (format == 1 && bits == 16);
  const bool is_f32 = (format == 3 && bits == 32);
  if (!is_pcm16 && !is_f32)
    throw UnsupportedWavError(path.string() + ": format " + std::to_string(format) + "/" +
                              std::to_string(bits) + " bits");

  const std::uint32_t frame_bytes = n_channels * (bits / 8);
  if (data_size % frame_bytes != 0)
    throw TruncatedWavError(path.string() + ": data size not a whole number of frames");
  const std::size_t n_frames = data_size / frame_bytes;

  AudioBuffer buf = AudioBuffer::zeros(n_channels, n_frames, static_cast<int>(rate));
  for (std::size_t i = 0; i < n_frames; ++i) {
    for (int c = 0; c < n_channels; ++c) {
      const unsigned char* p = data + (i * n_channels + c) * (bits / 8);
      if (is_pcm16) {
        std::int16_t v;
        std::memcpy(&v, p, 2);
        buf.channels[c][i] = static_cast<float>(v) / 32768.0f;
      } else {
        float v;
        std::memcpy(&v, p, 4);
        buf.channels[c][i] = v;
      }
    }
  }
  return buf;
}

struct WavWriteResult {
  std::size_t clipped = 0;  // samples hard-clipped on PCM16 write
};

// Writes PCM16 or IEEE float32, little-endian. Out-of-range samples on
// PCM16 write are hard-clipped and counted in the result, not an error:
// noise mixing can legitimately exceed full scale.
inline WavWriteResult write_wav(const AudioBuffer& buf, const std::filesystem::path& path,
                                WavFormat format = WavFormat::kFloat32) {
  buf.validate();
  const int nc = buf.n_channels();
  const std::size_t n = buf.length();
  const int bytes_per = format == WavFormat::kPcm16 ? 2 : 4;
  const std::uint32_t data_size = static_cast<std::uint32_t>(n * nc * bytes_per);

  std::string out;
  out.reserve(44 + data_size);
  out += "RIFF";
  detail::put_u32(out, 36 + data_size);
  out += "WAVEfmt ";
  detail::put_u32(out, 16);
  detail::put_u16(out, format == WavFormat::kPcm16 ? 1 : 3);
  detail::put_u16(out, static_cast<std::uint16_t>(nc));
  detail::put_u32(out, static_cast<std::uint32_t>(buf.sample_rate));
  detail::put_u32(out, static_cast<std::uint32_t>(buf.sample_rate * nc * bytes_per));
  detail::put_u16(out, static_cast<std::uint16_t>(nc * bytes_per));
  detail::put_u16(out, static_cast<std::uint16_t>(bytes_per * 8));
  out += "data";
  detail::put_u32(out, data_size);

  WavWriteResult result;
  for (std::size_t i = 0; i < n; ++i) {
    for (int c = 0; c < nc; ++c) {
      const float v = buf.channels[c][i];
      if (format == WavFormat::kPcm16) {
        double scaled = std::lround(static_cast<double>(v) * 32768.0);
        if (scaled > 32767.0) {
          scaled = 32767.0;
          ++result.clipped;
        } else if (scaled < -32768.0) {
          scaled = -32768.0;
          ++result.clipped;
        }
        detail::put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(scaled)));
      } else {
        std::uint32_t raw;
        std::memcpy(&raw, &v, 4);
        detail::put_u32(out, raw);
      }
    }
  }

  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open for writing: " + path.string());
  os.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!os) throw DataError("write failed: " + path.string());
  return result;
}

namespace detail {

inline double bessel_i0(double x) {
  double sum = 1.0, term = 1.0;
  const double half_x = x / 2.0;
  for (int k = 1; k < 64; ++k) {
    term *= (half_x / k) * (half_x / k);
    sum += term;
    if (term < 1e-16 * sum) break;
  }
  return sum;
}

inline double sinc(double x) {
  if (std::abs(x) < 1e-12) return 1.0;
  return std::sin(M_PI * x) / (M_PI * x);
}

}  // namespace detail

// Rational-ratio polyphase resampler. Fixed kernel: Kaiser-windowed sinc,
// beta = 7.0 (about 70 dB stop-band), half-width 16 output-Nyquist periods.
// Output length is ceil(n * target / source). Identity rate returns the
// input unchanged.
inline AudioBuffer resample(const AudioBuffer& in, int target_rate) {
  if (target_rate <= 0) throw DataError("resample: target rate must be positive");
  in.validate();
  if (target_rate == in.sample_rate) return in;

  const std::uint64_t g = std::gcd<std::uint64_t>(target_rate, in.sample_rate);
  const std::uint64_t up = target_rate / g;    // L
  const std::uint64_t down = in.sample_rate / g;  // M

  // Cutoff relative to the input Nyquist.
  const double ratio = std::min(1.0, static_cast<double>(up) / static_cast<double>(down));
  const double cutoff = 0.92 * ratio;
  const int half_width = static_cast<int>(std::ceil(16.0 / ratio));
  const double beta = 7.0;
  const double i0_beta = detail::bessel_i0(beta);

  // One tap table per output phase; phase of output n is (n * down) mod up.
  const int n_taps = 2 * half_width + 1;
  std::vector<std::vector<double>> taps(up, std::vector<double>(n_taps));
  for (std::uint64_t p = 0; p < up; ++p) {
    const double frac = static_cast<double>(p) / static_cast<double>(up);
    double sum = 0.0;
    for (int j = -half_width; j <= half_width; ++j) {
      const double u = frac + j;
      const double w = std::abs(u) <= half_width
                           ? detail::bessel_i0(beta * std::sqrt(std::max(
                                 0.0, 1.0 - (u / half_width) * (u / half_width)))) / i0_beta
                           : 0.0;
      taps[p][j + half_width] = cutoff * detail::sinc(cutoff * u) * w;
      sum += taps[p][j + half_width];
    }
    for (auto& t : taps[p]) t /= sum;  // exact unity DC gain per phase
  }

  const std::size_t n_in = in.length();
  const std::size_t n_out = static_cast<std::size_t>(
      (static_cast<std::uint64_t>(n_in) * up + down - 1) / down);
  AudioBuffer out = AudioBuffer::zeros(in.n_channels(), n_out, target_rate);
  for (int c = 0; c < in.n_channels(); ++c) {
    const auto& x = in.channels[c];
    auto& y = out.channels[c];
    for (std::size_t no = 0; no < n_out; ++no) {
      const std::uint64_t num = static_cast<std::uint64_t>(no) * down;
      const std::int64_t i0 = static_cast<std::int64_t>(num / up);
      const auto& t = taps[num % up];
      double acc = 0.0;
      for (int j = -half_width; j <= half_width; ++j) {
        const std::int64_t k = i0 - j;
        if (k >= 0 && k < static_cast<std::int64_t>(n_in))
          acc += t[j + half_width] * static_cast<double>(x[k]);
      }
      y[no] = static_cast<float>(acc);
    }
  }
  return out;
}

}  // namespace vapkit
