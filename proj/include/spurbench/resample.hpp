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

#include <cmath>
#include <stdexcept>

#include "spurbench/waveform.hpp"

namespace spurbench {

namespace detail {

inline double sinc(double x) {
  if (std::abs(x) < 1e-12) return 1.0;
  const double px = M_PI * x;
  return std::sin(px) / px;
}

}  // namespace detail

// Windowed-sinc interpolation. The kernel is low-passed at half the smaller
// of the two rates, so downsampling stays band-limited and upsampling
// reconstructs the original spectrum. 24 kernel zero crossings per side.
inline Waveform resample(const Waveform& in, int out_rate) {
  require_valid(in, "resample");
  if (out_rate <= 0) throw std::invalid_argument("resample: invalid target rate");
  if (in.sample_rate == out_rate) return in;

  const double in_rate = static_cast<double>(in.sample_rate);
  const double step = in_rate / out_rate;           // input samples per output sample
  const double fc = 0.5 * std::min(in_rate, static_cast<double>(out_rate)) / in_rate;
  const int zeros = 24;
  const double support = zeros / (2.0 * fc);        // kernel half width, input samples

  Waveform out;
  out.sample_rate = out_rate;
  const long long n_out =
      std::llround(static_cast<double>(in.samples.size()) * out_rate / in_rate);
  out.samples.resize(static_cast<std::size_t>(std::max(1LL, n_out)));

  const long long n_in = static_cast<long long>(in.samples.size());
  for (long long i = 0; i < static_cast<long long>(out.samples.size()); ++i) {
    const double t = i * step;
    const long long k0 = std::max(0LL, static_cast<long long>(std::ceil(t - support)));
    const long long k1 = std::min(n_in - 1, static_cast<long long>(std::floor(t + support)));
    double acc = 0.0;
    for (long long k = k0; k <= k1; ++k) {
      const double u = k - t;
      const double w = 0.5 + 0.5 * std::cos(M_PI * u / support);  // Hann taper
      acc += in.samples[static_cast<std::size_t>(k)] * (2.0 * fc * detail::sinc(2.0 * fc * u) * w);
    }
    out.samples[static_cast<std::size_t>(i)] = static_cast<float>(acc);
  }
  return out;
}

}  // namespace spurbench
