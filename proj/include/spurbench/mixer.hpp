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
#include <limits>
#include <stdexcept>

#include "spurbench/loudness.hpp"
#include "spurbench/resample.hpp"
#include "spurbench/waveform.hpp"

namespace spurbench {

struct MixParams {
  double alpha = 1.0;        // background attenuation scale
  double gamma_db = 8.0;     // target FG-over-BG loudness margin, LU
  int sample_rate = 16000;
  double duration_s = 5.0;
  double peak_target = 1.0;  // post-mix peak level
};

// Fixes the length to round(duration * rate): long clips are truncated from
// the start, short clips are tiled (repeated) until the target length.
inline Waveform fit_duration(const Waveform& in, double duration_s) {
  require_valid(in, "fit_duration");
  if (duration_s <= 0.0) throw std::invalid_argument("fit_duration: nonpositive duration");
  const std::size_t target =
      static_cast<std::size_t>(std::llround(duration_s * in.sample_rate));
  if (target == 0) throw std::invalid_argument("fit_duration: nonpositive duration");
  Waveform out;
  out.sample_rate = in.sample_rate;
  out.samples.resize(target);
  const std::size_t n = in.samples.size();
  for (std::size_t i = 0; i < target; ++i) out.samples[i] = in.samples[i % n];
  return out;
}

struct MixResult {
  Waveform mix;
  double fg_lufs;
  double bg_lufs;   // -inf when the background is gated-silent and alpha == 0
  double bg_gain;   // linear gain applied to the fitted background
};

// Loudness-margin mixing: both signals are brought to the common rate and
// duration first, then the background is scaled so its integrated loudness
// sits gamma_db below the foreground (scaled further by alpha), summed, and
// peak-normalized. alpha == 0 reduces to the peak-normalized foreground,
// whatever the background contains.
inline MixResult mix_pair(const Waveform& fg, const Waveform& bg, const MixParams& p = {}) {
  require_valid(fg, "mix_pair foreground");
  require_valid(bg, "mix_pair background");
  if (p.alpha < 0.0) throw std::invalid_argument("mix_pair: negative alpha");

  const Waveform xfg = fit_duration(resample(fg, p.sample_rate), p.duration_s);
  const Waveform xbg = fit_duration(resample(bg, p.sample_rate), p.duration_s);

  double l_fg;
  try {
    l_fg = integrated_loudness(xfg).lufs;
  } catch (const GatedSilenceError&) {
    throw std::invalid_argument("mix_pair: foreground below gate; cannot set margin");
  }

  double l_bg = -std::numeric_limits<double>::infinity();
  double gain = 0.0;
  if (p.alpha > 0.0) {
    try {
      l_bg = integrated_loudness(xbg).lufs;
    } catch (const GatedSilenceError&) {
      throw std::invalid_argument("mix_pair: background below gate; cannot set margin");
    }
    gain = p.alpha * std::pow(10.0, (l_fg - l_bg - p.gamma_db) / 20.0);
  } else {
    try {
      l_bg = integrated_loudness(xbg).lufs;
    } catch (const GatedSilenceError&) {
      // alpha == 0: the background never reaches the sum, leave -inf.
    }
  }

  Waveform mix;
  mix.sample_rate = p.sample_rate;
  mix.samples.resize(xfg.samples.size());
  for (std::size_t i = 0; i < mix.samples.size(); ++i) {
    mix.samples[i] = static_cast<float>(xfg.samples[i] + gain * xbg.samples[i]);
  }
  mix = peak_normalize(std::move(mix), p.peak_target);
  return MixResult{std::move(mix), l_fg, l_bg, gain};
}

}  // namespace spurbench
