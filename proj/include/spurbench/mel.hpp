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
#include <vector>

#include "spurbench/fft.hpp"
#include "spurbench/waveform.hpp"

namespace spurbench {

struct MelParams {
  int n_fft = 1024;
  int hop = 512;
  int n_bands = 128;
  double fmax_hz = 8000.0;   // clamped to Nyquist
  double floor_db = 80.0;    // dynamic range below the spectrogram peak
};

// Band-major log-mel spectrogram. data[band * n_frames + frame].
struct Spectrogram {
  int n_bands = 0;
  int n_frames = 0;
  std::vector<double> data;

  double& at(int band, int frame) { return data[static_cast<std::size_t>(band) * n_frames + frame]; }
  double at(int band, int frame) const {
    return data[static_cast<std::size_t>(band) * n_frames + frame];
  }
};

namespace detail {

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

// Triangular filters on a uniform mel grid, each scaled to unit area so
// wide high-frequency bands do not dominate narrow low ones.
inline std::vector<std::vector<double>> mel_filterbank(int n_bands, int n_fft, int sample_rate,
                                                       double fmax_hz) {
  const double fmax = std::min(fmax_hz, sample_rate / 2.0);
  const double mel_lo = hz_to_mel(0.0);
  const double mel_hi = hz_to_mel(fmax);
  std::vector<double> edges(static_cast<std::size_t>(n_bands) + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) /
                                      static_cast<double>(n_bands + 1));
  }
  const int n_bins = n_fft / 2 + 1;
  std::vector<std::vector<double>> fb(static_cast<std::size_t>(n_bands),
                                      std::vector<double>(static_cast<std::size_t>(n_bins), 0.0));
  for (int b = 0; b < n_bands; ++b) {
    const double lo = edges[b], mid = edges[b + 1], hi = edges[b + 2];
    const double norm = 2.0 / (hi - lo);
    for (int k = 0; k < n_bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate / n_fft;
      double w = 0.0;
      if (f > lo && f < hi) {
        w = f <= mid ? (f - lo) / (mid - lo) : (hi - f) / (hi - mid);
      }
      fb[b][k] = w * norm;
    }
  }
  return fb;
}

}  // namespace detail

// Log-mel power spectrogram: reflect-padded centered frames, periodic Hann
// window, and a dB floor pinned to floor_db below the per-clip peak.
inline Spectrogram mel_spectrogram(const Waveform& w, const MelParams& p = {}) {
  require_valid(w, "mel_spectrogram");
  const int n = static_cast<int>(w.samples.size());
  const int pad = p.n_fft / 2;
  if (n <= pad) {
    throw std::invalid_argument("mel_spectrogram: input too short to pad");
  }

  std::vector<double> window(static_cast<std::size_t>(p.n_fft));
  for (int i = 0; i < p.n_fft; ++i) {
    window[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / p.n_fft);
  }
  const auto fb = detail::mel_filterbank(p.n_bands, p.n_fft, w.sample_rate, p.fmax_hz);

  Spectrogram out;
  out.n_bands = p.n_bands;
  out.n_frames = 1 + n / p.hop;
  out.data.assign(static_cast<std::size_t>(p.n_bands) * out.n_frames, 0.0);

  // Padded sample at virtual index i in [-pad, n + pad).
  const auto sample_at = [&](int i) -> double {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * (n - 1) - i;
    return static_cast<double>(w.samples[i]);
  };

  std::vector<double> frame(static_cast<std::size_t>(p.n_fft));
  for (int t = 0; t < out.n_frames; ++t) {
    const int start = t * p.hop - pad;
    for (int i = 0; i < p.n_fft; ++i) frame[i] = sample_at(start + i) * window[i];
    const auto power = power_spectrum(frame);
    for (int b = 0; b < p.n_bands; ++b) {
      double acc = 0.0;
      for (std::size_t k = 0; k < power.size(); ++k) acc += fb[b][k] * power[k];
      out.at(b, t) = acc;
    }
  }

  double peak_db = -1e300;
  for (double& v : out.data) {
    v = 10.0 * std::log10(std::max(v, 1e-30));
    peak_db = std::max(peak_db, v);
  }
  for (double& v : out.data) v = std::max(v, peak_db - p.floor_db);
  return out;
}

}  // namespace spurbench
