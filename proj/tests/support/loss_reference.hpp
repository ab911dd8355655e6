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


// Loss definitions written as plain loops, used as oracles.

#pragma once

#include <cmath>
#include <numeric>
#include <vector>

#include "uwssl/nn/tensor.hpp"

namespace uwssl::testing {

using Mat = std::vector<std::vector<double>>;

inline Mat to_mat(const nn::Tensor& t) {
  Mat m(t.dim(0), std::vector<double>(t.dim(1)));
  for (std::size_t i = 0; i < t.dim(0); ++i)
    for (std::size_t j = 0; j < t.dim(1); ++j) m[i][j] = t[i * t.dim(1) + j];
  return m;
}

inline nn::Tensor from_mat(const Mat& m) {
  std::vector<double> v;
  for (const auto& r : m) v.insert(v.end(), r.begin(), r.end());
  return nn::Tensor({m.size(), m[0].size()}, v);
}

// Reference evaluations written as plain loops over the definitions.
inline double ref_variance(const Mat& z, double gamma = 1.0, double eps = 1e-4) {
  const std::size_t n = z.size(), d = z[0].size();
  double t = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) m += z[i][j] / n;
    double v = 0.0;
    for (std::size_t i = 0; i < n; ++i) v += (z[i][j] - m) * (z[i][j] - m);
    v /= (n - 1.0);
    t += std::fabs(gamma - std::sqrt(v + eps));
  }
  return t / d;
}

inline double ref_covariance(const Mat& z) {
  const std::size_t n = z.size(), d = z[0].size();
  std::vector<double> m(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) m[j] += z[i][j] / n;
  double t = 0.0;
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t b = 0; b < d; ++b) {
      if (a == b) continue;
      double c = 0.0;
      for (std::size_t i = 0; i < n; ++i) c += (z[i][a] - m[a]) * (z[i][b] - m[b]);
      c /= (n - 1.0);
      t += c * c;
    }
  }
  return t / d;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  return dot(a, b) / std::sqrt(dot(a, a) * dot(b, b));
}

inline double ref_invariance(const Mat& a, const Mat& b) {
  double t = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) t -= cosine(a[i], b[i]);
  return t / a.size();
}

inline double ref_ntxent(const Mat& z, double tau) {
  const std::size_t n = z.size();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = (i + n / 2) % n;
    double den = 0.0;
    for (std::size_t a = 0; a < n; ++a)
      if (a != i) den += std::exp(cosine(z[i], z[a]) / tau);
    total -= std::log(std::exp(cosine(z[i], z[j]) / tau) / den);
  }
  return total;
}

inline double ref_supcon(const Mat& z, const std::vector<int>& y, double tau) {
  const std::size_t n = z.size();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double inner = 0.0;
    int np = 0;
    for (std::size_t p = 0; p < n; ++p) {
      if (p == i || y[p] != y[i]) continue;
      double den = 0.0;
      for (std::size_t a = 0; a < n; ++a)
        if (a != i) den += std::exp(cosine(z[i], z[a]) / tau);
      inner += std::log(std::exp(cosine(z[i], z[p]) / tau) / den);
      ++np;
    }
    total += -inner / np;
  }
  return total;
}

}  // namespace uwssl::testing
