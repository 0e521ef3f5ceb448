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
#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <vector>

#include "spurbench/fft.hpp"
#include "spurbench/mel.hpp"
#include "spurbench/rng.hpp"
#include "spurbench/waveform.hpp"

using namespace spurbench;

namespace {

// O(n^2) reference DFT power spectrum for the FFT oracle.
std::vector<double> dft_power(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<double> out(n / 2 + 1);
  for (std::size_t k = 0; k <= n / 2; ++k) {
    double re = 0.0, im = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double phi = -2.0 * M_PI * static_cast<double>(k * i) / static_cast<double>(n);
      re += x[i] * std::cos(phi);
      im += x[i] * std::sin(phi);
    }
    out[k] = re * re + im * im;
  }
  return out;
}

}  // namespace

TEST_CASE("radix-2 fft matches the direct dft") {
  Rng rng(3);
  std::vector<double> x(256);
  for (double& v : x) v = rng.gaussian();
  const auto fast = power_spectrum(x);
  const auto slow = dft_power(x);
  REQUIRE(fast.size() == slow.size());
  for (std::size_t k = 0; k < fast.size(); ++k) {
    CHECK(fast[k] == Catch::Approx(slow[k]).margin(1e-6).epsilon(1e-9));
  }
  std::vector<std::complex<double>> odd(100);
  CHECK_THROWS_AS(fft_inplace(odd), std::invalid_argument);
}

TEST_CASE("five seconds at 16 kHz yields the canonical frame grid") {
  Rng rng(5);
  const Waveform w = make_noise(5.0, 16000, rng);
  const Spectrogram s = mel_spectrogram(w);
  CHECK(s.n_bands == 128);
  CHECK(s.n_frames == 157);  // 1 + 80000 / 512
  CHECK(s.data.size() == 128u * 157u);
}

TEST_CASE("a pure tone concentrates energy at its mel band") {
  const Waveform w = make_sine(1000.0, 2.0, 16000, 0.9);
  const Spectrogram s = mel_spectrogram(w);

  // Find the band whose filter has the strongest response at 1 kHz by
  // scanning the spectrogram itself at a mid frame.
  const int mid = s.n_frames / 2;
  int best = 0;
  for (int b = 1; b < s.n_bands; ++b) {
    if (s.at(b, mid) > s.at(best, mid)) best = b;
  }
  const auto fb = spurbench::detail::mel_filterbank(128, 1024, 16000, 8000.0);
  int want = 0;
  double want_w = 0.0;
  const int bin_1k = static_cast<int>(std::lround(1000.0 * 1024.0 / 16000.0));
  for (int b = 0; b < 128; ++b) {
    if (fb[b][bin_1k] > want_w) {
      want_w = fb[b][bin_1k];
      want = b;
    }
  }
  CHECK(std::abs(best - want) <= 1);

  // Energy far from the tone sits at the dynamic-range floor.
  double peak = -1e300;
  for (double v : s.data) peak = std::max(peak, v);
  CHECK(s.at(120, mid) == Catch::Approx(peak - 80.0).margin(1e-9));
}

TEST_CASE("gain shifts the log spectrogram additively") {
  Rng rng(9);
  Waveform w = make_noise(1.0, 16000, rng, 0.4);
  Waveform louder = w;
  for (float& s : louder.samples) s *= 2.0f;

  const Spectrogram a = mel_spectrogram(w);
  const Spectrogram b = mel_spectrogram(louder);
  // +6.02 dB everywhere above the floor; both floors move with their peaks,
  // so the difference is constant across the whole array.
  const double expected = 20.0 * std::log10(2.0);
  for (std::size_t i = 0; i < a.data.size(); i += 997) {
    CHECK(b.data[i] - a.data[i] == Catch::Approx(expected).margin(1e-6));
  }
}

TEST_CASE("mel filters are area normalized and cover the range") {
  const auto fb = spurbench::detail::mel_filterbank(128, 1024, 16000, 8000.0);
  REQUIRE(fb.size() == 128);
  // Triangle of height h and base (hi - lo) scaled by 2/(hi - lo) has unit
  // area in continuous frequency; the discrete sum approximates
  // n_fft / sample_rate per filter.
  const double bin_hz = 16000.0 / 1024.0;
  int nonempty = 0;
  for (const auto& filt : fb) {
    double sum = 0.0;
    for (double v : filt) sum += v;
    if (sum > 0.0) {
      ++nonempty;
      CHECK(sum * bin_hz == Catch::Approx(1.0).margin(0.35));
    }
  }
  CHECK(nonempty >= 120);  // narrow low-frequency triangles may miss all bins
}

TEST_CASE("short input is rejected rather than silently padded") {
  Waveform w;
  w.sample_rate = 16000;
  w.samples.assign(512, 0.1f);  // exactly the pad width: still too short
  CHECK_THROWS_AS(mel_spectrogram(w), std::invalid_argument);
  w.samples.assign(513, 0.1f);
  CHECK_NOTHROW(mel_spectrogram(w));
}
