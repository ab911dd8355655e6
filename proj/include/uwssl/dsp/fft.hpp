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
#include <complex>
#include <memory>
#include <numbers>
#include <span>
#include <vector>

#include "uwssl/core/error.hpp"

namespace uwssl::dsp {

using cplx = std::complex<double>;

inline bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

inline std::size_t next_power_of_two(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

/// In-place iterative radix-2 complex FFT of a fixed power-of-two size.
class ComplexFft {
 public:
  explicit ComplexFft(std::size_t n) : n_(n) {
    require(is_power_of_two(n), "FFT size must be a power of two, got ", n);
    twiddle_.resize(n / 2);
    for (std::size_t k = 0; k < n / 2; ++k) {
      const double a = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
      twiddle_[k] = cplx(std::cos(a), std::sin(a));
    }
    bitrev_.resize(n);
    std::size_t bits = 0;
    while ((std::size_t{1} << bits) < n) ++bits;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t r = 0;
      for (std::size_t b = 0; b < bits; ++b) r |= ((i >> b) & 1U) << (bits - 1 - b);
      bitrev_[i] = r;
    }
  }

  std::size_t size() const { return n_; }

  // Forward transform, e^{-2 pi i k n / N} convention, unnormalized.
  void forward(std::span<cplx> data) const {
    require(data.size() == n_, "FFT input size mismatch");
    for (std::size_t i = 0; i < n_; ++i) {
      if (i < bitrev_[i]) std::swap(data[i], data[bitrev_[i]]);
    }
    for (std::size_t len = 2; len <= n_; len <<= 1) {
      const std::size_t half = len / 2;
      const std::size_t step = n_ / len;
      for (std::size_t start = 0; start < n_; start += len) {
        for (std::size_t k = 0; k < half; ++k) {
          const cplx t = twiddle_[k * step] * data[start + k + half];
          const cplx u = data[start + k];
          data[start + k] = u + t;
          data[start + k + half] = u - t;
        }
      }
    }
  }

  void inverse(std::span<cplx> data) const {
    for (auto& v : data) v = std::conj(v);
    forward(data);
    const double scale = 1.0 / static_cast<double>(n_);
    for (auto& v : data) v = std::conj(v) * scale;
  }

 private:
  std::size_t n_;
  std::vector<cplx> twiddle_;
  std::vector<std::size_t> bitrev_;
};

/// One-sided spectrum (n/2 + 1 bins) of a real signal. Power-of-two sizes use
/// a half-length complex FFT; other sizes fall back to a direct DFT.
class RealFft {
 public:
  explicit RealFft(std::size_t n) : n_(n) {
    require(n >= 2 && n % 2 == 0, "real FFT size must be even and >= 2, got ", n);
    if (is_power_of_two(n)) {
      half_ = std::make_unique<ComplexFft>(n / 2);
      post_.resize(n / 2 + 1);
      for (std::size_t k = 0; k <= n / 2; ++k) {
        const double a = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
        post_[k] = cplx(std::cos(a), std::sin(a));
      }
    }
  }

  std::size_t size() const { return n_; }
  std::size_t bins() const { return n_ / 2 + 1; }

  void forward(std::span<const double> x, std::span<cplx> out) const {
    require(x.size() == n_ && out.size() == bins(), "real FFT size mismatch");
    if (!half_) {
      direct(x, out);
      return;
    }
    const std::size_t m = n_ / 2;
    std::vector<cplx> z(m);
    for (std::size_t k = 0; k < m; ++k) z[k] = cplx(x[2 * k], x[2 * k + 1]);
    half_->forward(z);
    for (std::size_t k = 0; k <= m; ++k) {
      const cplx zk = z[k % m];
      const cplx zc = std::conj(z[(m - k) % m]);
      const cplx even = 0.5 * (zk + zc);
      const cplx odd = cplx(0.0, -0.5) * (zk - zc);
      out[k] = even + post_[k] * odd;
    }
  }

 private:
  void direct(std::span<const double> x, std::span<cplx> out) const {
    for (std::size_t k = 0; k < bins(); ++k) {
      cplx acc = 0.0;
      for (std::size_t t = 0; t < n_; ++t) {
        const double a = -2.0 * std::numbers::pi * static_cast<double>((k * t) % n_) / static_cast<double>(n_);
        acc += x[t] * cplx(std::cos(a), std::sin(a));
      }
      out[k] = acc;
    }
  }

  std::size_t n_;
  std::unique_ptr<ComplexFft> half_;
  std::vector<cplx> post_;
};

/// Linear convolution via zero-padded FFT, truncated to the first out_len
/// samples.
inline std::vector<double> fft_convolve(std::span<const double> a, std::span<const double> b,
                                        std::size_t out_len) {
  if (a.empty() || b.empty()) return std::vector<double>(out_len, 0.0);
  const std::size_t n = next_power_of_two(a.size() + b.size() - 1);
  ComplexFft fft(n);
  std::vector<cplx> fa(n), fb(n);
  for (std::size_t i = 0; i < a.size(); ++i) fa[i] = a[i];
  for (std::size_t i = 0; i < b.size(); ++i) fb[i] = b[i];
  fft.forward(fa);
  fft.forward(fb);
  for (std::size_t i = 0; i < n; ++i) fa[i] *= fb[i];
  fft.inverse(fa);
  std::vector<double> out(out_len, 0.0);
  for (std::size_t i = 0; i < out_len && i < n; ++i) out[i] = fa[i].real();
  return out;
}

}  // namespace uwssl::dsp
