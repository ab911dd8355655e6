// Copyright 2026 The uwssl Authors. All Rights Reserved.
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
#include <numbers>
#include <numeric>
#include <span>
#include <vector>

#include "uwssl/audio/clip.hpp"
#include "uwssl/core/error.hpp"

namespace uwssl::audio {

// Zeroth-order modified Bessel function of the first kind (power series).
inline double bessel_i0(double x) {
  double sum = 1.0, term = 1.0;
  const double q = 0.25 * x * x;
  for (int k = 1; k < 200; ++k) {
    term *= q / (static_cast<double>(k) * static_cast<double>(k));
    sum += term;
    if (term < sum * 1e-17) break;
  }
  return sum;
}

struct ResamplerOptions {
  int taps_per_phase = 64;
  double kaiser_beta = 8.6;
  // Cutoff as a fraction of the lower of the two Nyquist frequencies.
  double rolloff = 0.9;
};

/// Rational-ratio polyphase resampler (windowed sinc, Kaiser window). Output
/// sample n sits at input time n * down / up; each output sample is a dot
/// product of taps_per_phase input samples with one of `up` phase filters.
class PolyphaseResampler {
 public:
  PolyphaseResampler(int up, int down, ResamplerOptions options = {}) : options_(options) {
    require(up > 0 && down > 0, "resampling factors must be positive");
    require(options.taps_per_phase >= 2 && options.taps_per_phase % 2 == 0,
            "taps_per_phase must be even and >= 2");
    const int g = std::gcd(up, down);
    up_ = up / g;
    down_ = down / g;
    build_table();
  }

  int up() const { return up_; }
  int down() const { return down_; }

  std::size_t output_length(std::size_t n) const {
    return static_cast<std::size_t>((static_cast<std::uint64_t>(n) * up_ + down_ - 1) / down_);
  }

  std::vector<double> process(std::span<const double> x) const {
    if (up_ == down_) return {x.begin(), x.end()};
    const std::size_t n_out = output_length(x.size());
    const int taps = options_.taps_per_phase;
    const std::int64_t half = taps / 2;
    const std::int64_t n_in = static_cast<std::int64_t>(x.size());
    std::vector<double> y(n_out, 0.0);
    for (std::size_t n = 0; n < n_out; ++n) {
      const std::uint64_t q = static_cast<std::uint64_t>(n) * down_;
      const std::int64_t base = static_cast<std::int64_t>(q / up_);
      const std::size_t phase = static_cast<std::size_t>(q % up_);
      const double* h = &table_[phase * static_cast<std::size_t>(taps)];
      // tap t multiplies x[base + j] with j = t - half + 1
      const std::int64_t first = base - half + 1;
      double acc = 0.0;
      if (first >= 0 && first + taps <= n_in) {
        const double* xp = x.data() + first;
        for (int t = 0; t < taps; ++t) acc += h[t] * xp[t];
      } else {
        for (int t = 0; t < taps; ++t) {
          const std::int64_t k = first + t;
          if (k >= 0 && k < n_in) acc += h[t] * x[static_cast<std::size_t>(k)];
        }
      }
      y[n] = acc;
    }
    return y;
  }

 private:
  void build_table() {
    const int taps = options_.taps_per_phase;
    const double half = taps / 2.0;
    const double cutoff = options_.rolloff * std::min(1.0, static_cast<double>(up_) / down_);
    const double i0_beta = bessel_i0(options_.kaiser_beta);
    table_.assign(static_cast<std::size_t>(up_) * taps, 0.0);
    for (int p = 0; p < up_; ++p) {
      const double frac = static_cast<double>(p) / up_;
      double sum = 0.0;
      for (int t = 0; t < taps; ++t) {
        const double j = static_cast<double>(t) - half + 1.0;
        const double tau = frac - j;  // distance from output instant to input sample
        const double arg = cutoff * tau;
        const double sinc = arg == 0.0 ? 1.0 : std::sin(std::numbers::pi * arg) / (std::numbers::pi * arg);
        const double r = tau / half;
        const double win = std::abs(r) >= 1.0 ? 0.0
                                              : bessel_i0(options_.kaiser_beta * std::sqrt(1.0 - r * r)) / i0_beta;
        const double h = cutoff * sinc * win;
        table_[static_cast<std::size_t>(p) * taps + t] = h;
        sum += h;
      }
      for (int t = 0; t < taps; ++t) table_[static_cast<std::size_t>(p) * taps + t] /= sum;
    }
  }

  ResamplerOptions options_;
  int up_ = 1;
  int down_ = 1;
  std::vector<double> table_;
};

/// Resamples to target_rate. Equal rates return a bit-identical copy.
inline AudioClip resample(const AudioClip& clip, int target_rate, ResamplerOptions options = {}) {
  require(target_rate > 0, "target_rate must be positive, got ", target_rate);
  require(clip.sample_rate > 0, "clip sample rate must be positive");
  if (target_rate == clip.sample_rate) return clip;
  PolyphaseResampler rs(target_rate, clip.sample_rate, options);
  AudioClip out = with_samples(clip, rs.process(clip.samples));
  out.sample_rate = target_rate;
  return out;
}

}  // namespace uwssl::audio
