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

// Causal Butterworth filters as cascades of second-order sections.
//
// An order-N Butterworth response (N even) factors into N/2 biquads whose
// quality factors are 1 / (2 cos(pi (2k+1) / (2N))), k = 0..N/2-1. Each
// section uses the bilinear transform prewarped at the cutoff, so the digital
// response is exactly -3 dB at the cutoff frequency.

#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <vector>

#include "uwssl/core/error.hpp"

namespace uwssl::augment {

struct Biquad {
  double b0 = 1, b1 = 0, b2 = 0, a1 = 0, a2 = 0;  // normalized, a0 = 1

  // Direct form II transposed, zero initial state.
  void process(std::span<double> x) const {
    double s1 = 0.0, s2 = 0.0;
    for (double& v : x) {
      const double in = v;
      const double out = b0 * in + s1;
      s1 = b1 * in - a1 * out + s2;
      s2 = b2 * in - a2 * out;
      v = out;
    }
  }

  std::complex<double> response(double freq_hz, double sample_rate) const {
    const double w = 2.0 * std::numbers::pi * freq_hz / sample_rate;
    const std::complex<double> z1 = std::polar(1.0, -w);
    const std::complex<double> z2 = z1 * z1;
    return (b0 + b1 * z1 + b2 * z2) / (1.0 + a1 * z1 + a2 * z2);
  }
};

enum class FilterType { kLowPass, kHighPass };

inline Biquad design_biquad(FilterType type, double cutoff_hz, double q, double sample_rate) {
  const double w0 = 2.0 * std::numbers::pi * cutoff_hz / sample_rate;
  const double cw = std::cos(w0);
  const double alpha = std::sin(w0) / (2.0 * q);
  const double a0 = 1.0 + alpha;
  Biquad s;
  if (type == FilterType::kLowPass) {
    s.b0 = (1.0 - cw) / 2.0 / a0;
    s.b1 = (1.0 - cw) / a0;
    s.b2 = s.b0;
  } else {
    s.b0 = (1.0 + cw) / 2.0 / a0;
    s.b1 = -(1.0 + cw) / a0;
    s.b2 = s.b0;
  }
  s.a1 = -2.0 * cw / a0;
  s.a2 = (1.0 - alpha) / a0;
  return s;
}

class ButterworthFilter {
 public:
  ButterworthFilter(FilterType type, int order, double cutoff_hz, double sample_rate)
      : type_(type), order_(order), cutoff_hz_(cutoff_hz), sample_rate_(sample_rate) {
    require(order >= 2 && order % 2 == 0, "Butterworth order must be even and >= 2, got ", order);
    require(cutoff_hz > 0.0 && cutoff_hz < sample_rate / 2.0, "cutoff ", cutoff_hz,
            " Hz must lie strictly between 0 and Nyquist (", sample_rate / 2.0, " Hz)");
    for (int k = 0; k < order / 2; ++k) {
      const double q = 1.0 / (2.0 * std::cos(std::numbers::pi * (2 * k + 1) / (2.0 * order)));
      sections_.push_back(design_biquad(type, cutoff_hz, q, sample_rate));
    }
  }

  void process(std::span<double> x) const {
    for (const auto& s : sections_) s.process(x);
  }

  std::vector<double> apply(std::span<const double> x) const {
    std::vector<double> y(x.begin(), x.end());
    process(y);
    return y;
  }

  double magnitude(double freq_hz) const {
    std::complex<double> h = 1.0;
    for (const auto& s : sections_) h *= s.response(freq_hz, sample_rate_);
    return std::abs(h);
  }

  FilterType type() const { return type_; }
  int order() const { return order_; }
  double cutoff_hz() const { return cutoff_hz_; }
  const std::vector<Biquad>& sections() const { return sections_; }

 private:
  FilterType type_;
  int order_;
  double cutoff_hz_;
  double sample_rate_;
  std::vector<Biquad> sections_;
};

inline constexpr int kButterworthOrder = 6;

}  // namespace uwssl::augment
