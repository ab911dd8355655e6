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

// Mel scale and the triangular filterbank built on it.
//
// Filters are placed on n_mels + 2 breakpoints equally spaced in mel between
// f_min and f_max. Filter k rises from breakpoint k to k+1 and falls back to
// zero at k+2, so each filter's falling edge is the next filter's rising edge.
// Every row is scaled so that its largest sampled weight is exactly 1.

#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "uwssl/core/error.hpp"

namespace uwssl::dsp {

inline double hz_to_mel(double hz) {
  require(hz >= 0.0, "frequency must be non-negative, got ", hz);
  return 2595.0 * std::log10(1.0 + hz / 700.0);
}

inline double mel_to_hz(double mel) {
  require(mel >= 0.0, "mel value must be non-negative, got ", mel);
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

struct MelFilterbank {
  int n_mels = 0;
  int n_fft = 0;
  int sample_rate = 0;
  double f_min = 0.0;
  double f_max = 0.0;
  std::vector<double> breakpoints_hz;  // n_mels + 2 values
  std::vector<double> weights;         // n_mels x (n_fft/2 + 1), row-major
  std::vector<int> first_bin;          // first nonzero bin per row
  std::vector<int> last_bin;           // one past the last nonzero bin per row

  int n_bins() const { return n_fft / 2 + 1; }
  double weight(int row, int bin) const {
    return weights[static_cast<std::size_t>(row) * n_bins() + bin];
  }
  double center_hz(int row) const { return breakpoints_hz[static_cast<std::size_t>(row) + 1]; }
  double bin_hz(int bin) const { return static_cast<double>(bin) * sample_rate / n_fft; }
};

inline MelFilterbank build_filterbank(int n_mels, int n_fft, int sample_rate, double f_min, double f_max) {
  require(n_mels >= 1, "n_mels must be >= 1");
  require(n_fft >= 2 && n_fft % 2 == 0, "n_fft must be even and >= 2");
  require(sample_rate > 0, "sample_rate must be positive");
  require(f_min >= 0.0 && f_min < f_max && f_max <= sample_rate / 2.0,
          "inconsistent frequency bounds: need 0 <= f_min < f_max <= sample_rate/2 (got f_min=", f_min,
          ", f_max=", f_max, ", sample_rate=", sample_rate, ")");

  MelFilterbank fb;
  fb.n_mels = n_mels;
  fb.n_fft = n_fft;
  fb.sample_rate = sample_rate;
  fb.f_min = f_min;
  fb.f_max = f_max;

  const double mel_lo = hz_to_mel(f_min);
  const double mel_hi = hz_to_mel(f_max);
  fb.breakpoints_hz.resize(static_cast<std::size_t>(n_mels) + 2);
  for (int k = 0; k < n_mels + 2; ++k) {
    const double m = mel_lo + (mel_hi - mel_lo) * k / (n_mels + 1);
    fb.breakpoints_hz[k] = k == 0 ? f_min : (k == n_mels + 1 ? f_max : mel_to_hz(m));
  }

  const int bins = fb.n_bins();
  fb.weights.assign(static_cast<std::size_t>(n_mels) * bins, 0.0);
  fb.first_bin.assign(n_mels, 0);
  fb.last_bin.assign(n_mels, 0);
  for (int row = 0; row < n_mels; ++row) {
    const double lo = fb.breakpoints_hz[row];
    const double mid = fb.breakpoints_hz[row + 1];
    const double hi = fb.breakpoints_hz[row + 2];
    double* w = &fb.weights[static_cast<std::size_t>(row) * bins];
    double peak = 0.0;
    for (int b = 0; b < bins; ++b) {
      const double f = fb.bin_hz(b);
      double v = 0.0;
      if (f > lo && f <= mid) {
        v = (f - lo) / (mid - lo);
      } else if (f > mid && f < hi) {
        v = (hi - f) / (hi - mid);
      }
      w[b] = v;
      peak = std::max(peak, v);
    }
    require(peak > 0.0, "mel filter ", row, " covers no FFT bin; use fewer mel bands or a larger n_fft");
    int first = bins, last = 0;
    for (int b = 0; b < bins; ++b) {
      w[b] /= peak;
      if (w[b] > 0.0) {
        first = std::min(first, b);
        last = b + 1;
      }
    }
    fb.first_bin[row] = first;
    fb.last_bin[row] = last;
  }
  return fb;
}

}  // namespace uwssl::dsp
