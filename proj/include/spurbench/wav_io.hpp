/**
 * Copyright 2026 The spurbench Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "spurbench/waveform.hpp"

namespace spurbench {

enum class WavFormat { pcm16, float32 };

namespace detail {

inline void put_u16(std::vector<std::uint8_t>& b, std::uint16_t v) {
  b.push_back(static_cast<std::uint8_t>(v & 0xFF));
  b.push_back(static_cast<std::uint8_t>(v >> 8));
}

inline void put_u32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

inline std::uint16_t get_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

inline std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::uint32_t f32_bits(float f) {
  std::uint32_t u;
  std::memcpy(&u, &f, 4);
  return u;
}

inline float bits_f32(std::uint32_t u) {
  float f;
  std::memcpy(&f, &u, 4);
  return f;
}

}  // namespace detail

// Serializes a mono waveform as RIFF/WAVE, little endian. pcm16 quantizes
// with clipping; float32 writes IEEE samples verbatim (plus the fact chunk
// non-PCM encodings require).
inline std::vector<std::uint8_t> encode_wav(const Waveform& w, WavFormat fmt = WavFormat::pcm16) {
  require_valid(w, "encode_wav");
  using namespace detail;
  const bool is_float = fmt == WavFormat::float32;
  const std::uint16_t bytes_per_sample = is_float ? 4 : 2;
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(w.samples.size()) * bytes_per_sample;
  const std::uint32_t fact_bytes = is_float ? 12 : 0;

  std::vector<std::uint8_t> b;
  b.reserve(44 + fact_bytes + data_bytes);
  const auto tag = [&b](const char* t) { b.insert(b.end(), t, t + 4); };

  tag("RIFF");
  put_u32(b, 4 + 24 + fact_bytes + 8 + data_bytes);
  tag("WAVE");
  tag("fmt ");
  put_u32(b, 16);
  put_u16(b, is_float ? 3 : 1);  // IEEE float / integer PCM
  put_u16(b, 1);                 // mono
  put_u32(b, static_cast<std::uint32_t>(w.sample_rate));
  put_u32(b, static_cast<std::uint32_t>(w.sample_rate) * bytes_per_sample);
  put_u16(b, bytes_per_sample);
  put_u16(b, is_float ? 32 : 16);
  if (is_float) {
    tag("fact");
    put_u32(b, 4);
    put_u32(b, static_cast<std::uint32_t>(w.samples.size()));
  }
  tag("data");
  put_u32(b, data_bytes);
  for (float s : w.samples) {
    if (is_float) {
      put_u32(b, f32_bits(s));
    } else {
      const double c = std::clamp(static_cast<double>(s), -1.0, 1.0);
      const int q = static_cast<int>(std::lrint(c * 32767.0));
      put_u16(b, static_cast<std::uint16_t>(std::clamp(q, -32768, 32767)));
    }
  }
  return b;
}

inline Waveform decode_wav(const std::vector<std::uint8_t>& bytes) {
  using namespace detail;
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw std::invalid_argument("decode_wav: not a RIFF/WAVE stream");
  }
  std::uint16_t audio_format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  Waveform w;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const char* id = reinterpret_cast<const char*>(bytes.data() + pos);
    const std::uint32_t len = get_u32(bytes.data() + pos + 4);
    const std::size_t body = pos + 8;
    if (body + len > bytes.size()) throw std::invalid_argument("decode_wav: truncated chunk");
    if (std::memcmp(id, "fmt ", 4) == 0) {
      if (len < 16) throw std::invalid_argument("decode_wav: malformed fmt chunk");
      audio_format = get_u16(bytes.data() + body);
      channels = get_u16(bytes.data() + body + 2);
      rate = get_u32(bytes.data() + body + 4);
      bits = get_u16(bytes.data() + body + 14);
      have_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      if (!have_fmt) throw std::invalid_argument("decode_wav: data chunk before fmt");
      if (channels != 1) throw std::invalid_argument("decode_wav: unsupported channel count");
      w.sample_rate = static_cast<int>(rate);
      if (audio_format == 1 && bits == 16) {
        w.samples.resize(len / 2);
        for (std::size_t i = 0; i < w.samples.size(); ++i) {
          const std::int16_t q =
              static_cast<std::int16_t>(get_u16(bytes.data() + body + 2 * i));
          w.samples[i] = static_cast<float>(q) / 32768.0f;
        }
      } else if (audio_format == 3 && bits == 32) {
        w.samples.resize(len / 4);
        for (std::size_t i = 0; i < w.samples.size(); ++i) {
          w.samples[i] = bits_f32(get_u32(bytes.data() + body + 4 * i));
        }
      } else {
        throw std::invalid_argument("decode_wav: unsupported wav encoding");
      }
      return w;
    }
    pos = body + len + (len & 1);  // chunks are word aligned
  }
  throw std::invalid_argument("decode_wav: missing data chunk");
}

inline void write_wav(const std::string& path, const Waveform& w,
                      WavFormat fmt = WavFormat::pcm16) {
  const auto bytes = encode_wav(w, fmt);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("write_wav: cannot open " + path);
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("write_wav: short write to " + path);
}

inline Waveform read_wav(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("read_wav: cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  return decode_wav(bytes);
}

}  // namespace spurbench
