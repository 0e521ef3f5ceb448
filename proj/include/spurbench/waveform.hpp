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
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "spurbench/rng.hpp"

namespace spurbench {

// Mono audio buffer. Samples are nominally in [-1, 1] but nothing enforces
// that until a writer quantizes.
struct Waveform {
  std::vector<float> samples;
  int sample_rate = 0;

  std::size_t size() const { return samples.size(); }
  double duration_s() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate
                           : 0.0;
  }
};

inline void require_valid(const Waveform& w, const char* what) {
  if (w.sample_rate <= 0) throw std::invalid_argument(std::string("invalid sample rate in ") + what);
  if (w.samples.empty()) throw std::invalid_argument(std::string("empty waveform in ") + what);
}

inline float peak_abs(const Waveform& w) {
  float peak = 0.0f;
  for (float s : w.samples) peak = std::max(peak, std::abs(s));
  return peak;
}

// Rescales so the largest absolute sample equals `target`.
inline Waveform peak_normalize(Waveform w, double target = 1.0) {
  require_valid(w, "peak_normalize");
  const float peak = peak_abs(w);
  if (peak <= 0.0f) throw std::invalid_argument("peak_normalize: all-zero waveform");
  const float g = static_cast<float>(target / peak);
  for (float& s : w.samples) s *= g;
  return w;
}

inline Waveform make_sine(double freq_hz, double duration_s, int sample_rate,
                          double amplitude = 1.0) {
  Waveform w;
  w.sample_rate = sample_rate;
  const std::size_t n = static_cast<std::size_t>(std::llround(duration_s * sample_rate));
  w.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    w.samples[i] = static_cast<float>(
        amplitude * std::sin(2.0 * M_PI * freq_hz * static_cast<double>(i) / sample_rate));
  }
  return w;
}

inline Waveform make_noise(double duration_s, int sample_rate, Rng& rng,
                           double amplitude = 0.5) {
  Waveform w;
  w.sample_rate = sample_rate;
  const std::size_t n = static_cast<std::size_t>(std::llround(duration_s * sample_rate));
  w.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    w.samples[i] = static_cast<float>(amplitude * (2.0 * rng.uniform_real() - 1.0));
  }
  return w;
}

}  // namespace spurbench
