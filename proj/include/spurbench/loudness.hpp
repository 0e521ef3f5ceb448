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
#include <vector>

#include "spurbench/waveform.hpp"

namespace spurbench {

// Integrated loudness per ITU-R BS.1770 / EBU R128, mono programme.
//
// Pipeline: K-weighting (high shelf + high pass), mean square over 400 ms
// blocks at 75% overlap, absolute gate at -70 LUFS, then a relative gate
// 10 LU below the mean of the absolutely gated blocks. The published filter
// coefficients are tabulated for 48 kHz only; here both biquads are
// re-derived from their analog prototypes for the actual sample rate via the
// bilinear transform, so the meter reads correctly at 16 kHz and anything
// else. Calibration invariant: a full-scale 997 Hz sine measures -3.01 LUFS.

namespace detail {

struct Biquad {
  double b0, b1, b2, a1, a2;  // normalized, a0 == 1

  void apply(std::vector<float>& x) const {
    double z1 = 0.0, z2 = 0.0;
    for (float& s : x) {
      const double in = s;
      const double out = b0 * in + z1;
      z1 = b1 * in - a1 * out + z2;
      z2 = b2 * in - a2 * out;
      s = static_cast<float>(out);
    }
  }
};

// High-shelf section of the K-weighting curve (head response). Analog
// prototype parameters recovered from the published 48 kHz table; pushing
// them back through the bilinear transform (K = tan(pi f0 / fs)) reproduces
// that table to ~1e-14 and generalizes to any rate. The band gain exponent
// is part of the recovered prototype, not a tuning knob.
inline Biquad k_shelf(double fs) {
  const double f0 = 1681.9744509555319;
  const double gain_db = 3.999843853973347;
  const double q = 0.7071752369554193;
  const double k = std::tan(M_PI * f0 / fs);
  const double vh = std::pow(10.0, gain_db / 20.0);
  const double vb = std::pow(vh, 0.4996667741545416);
  const double d = 1.0 + k / q + k * k;
  return Biquad{
      (vh + vb * k / q + k * k) / d,
      2.0 * (k * k - vh) / d,
      (vh - vb * k / q + k * k) / d,
      2.0 * (k * k - 1.0) / d,
      (1.0 - k / q + k * k) / d,
  };
}

// High-pass section (RLB weighting). The published table keeps the
// numerator at exactly {1, -2, 1}; only the poles move with the rate.
inline Biquad k_highpass(double fs) {
  const double f0 = 38.13547087613982;
  const double q = 0.5003270373253953;
  const double k = std::tan(M_PI * f0 / fs);
  const double d = 1.0 + k / q + k * k;
  return Biquad{
      1.0,
      -2.0,
      1.0,
      2.0 * (k * k - 1.0) / d,
      (1.0 - k / q + k * k) / d,
  };
}

}  // namespace detail

struct LoudnessMeasure {
  double lufs;        // integrated loudness
  int blocks_total;   // 400 ms gating blocks
  int blocks_gated;   // blocks surviving both gates
};

// Thrown when every gating block falls below the absolute gate; such a
// signal has no defined integrated loudness.
class GatedSilenceError : public std::runtime_error {
 public:
  explicit GatedSilenceError(const char* what) : std::runtime_error(what) {}
};

inline LoudnessMeasure integrated_loudness(const Waveform& w) {
  require_valid(w, "integrated_loudness");
  const double fs = w.sample_rate;
  const std::size_t block = static_cast<std::size_t>(std::llround(0.400 * fs));
  const std::size_t hop = static_cast<std::size_t>(std::llround(0.100 * fs));
  if (w.samples.size() < block) {
    throw std::invalid_argument("integrated_loudness: signal shorter than one gating block");
  }

  std::vector<float> x = w.samples;
  detail::k_shelf(fs).apply(x);
  detail::k_highpass(fs).apply(x);

  std::vector<double> block_ms;
  for (std::size_t start = 0; start + block <= x.size(); start += hop) {
    double acc = 0.0;
    for (std::size_t i = start; i < start + block; ++i) {
      acc += static_cast<double>(x[i]) * static_cast<double>(x[i]);
    }
    block_ms.push_back(acc / static_cast<double>(block));
  }

  const auto block_lufs = [](double ms) {
    return -0.691 + 10.0 * std::log10(std::max(ms, 1e-30));
  };

  // Absolute gate.
  double sum_abs = 0.0;
  int n_abs = 0;
  for (double ms : block_ms) {
    if (block_lufs(ms) > -70.0) {
      sum_abs += ms;
      ++n_abs;
    }
  }
  if (n_abs == 0) throw GatedSilenceError("integrated_loudness: gated silence");

  // Relative gate, 10 LU below the absolutely gated mean.
  const double rel_threshold = block_lufs(sum_abs / n_abs) - 10.0;
  double sum_rel = 0.0;
  int n_rel = 0;
  for (double ms : block_ms) {
    const double l = block_lufs(ms);
    if (l > -70.0 && l > rel_threshold) {
      sum_rel += ms;
      ++n_rel;
    }
  }
  if (n_rel == 0) throw GatedSilenceError("integrated_loudness: gated silence");

  return LoudnessMeasure{block_lufs(sum_rel / n_rel), static_cast<int>(block_ms.size()), n_rel};
}

}  // namespace spurbench
