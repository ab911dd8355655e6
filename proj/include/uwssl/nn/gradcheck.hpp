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

// Central finite-difference gradient checking.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "uwssl/nn/tensor.hpp"

namespace uwssl::nn {

struct GradCheckResult {
  double max_rel_error = 0.0;  // worst tensor
  std::size_t worst_input = 0;
  std::size_t checked = 0;  // coordinates perturbed
};

/// Relative error between analytic and numeric gradients of one tensor:
/// ||a - n|| / max(||a||, ||n||, floor). The floor makes gradients that are
/// identically zero (a bias feeding a batch norm) compare absolutely
/// against finite-difference noise.
inline double relative_error(const std::vector<double>& a, const std::vector<double>& n, double floor = 1e-3) {
  double diff = 0.0, na = 0.0, nn = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - n[i]) * (a[i] - n[i]);
    na += a[i] * a[i];
    nn += n[i] * n[i];
  }
  const double denom = std::max({std::sqrt(na), std::sqrt(nn), floor});
  return std::sqrt(diff) / denom;
}

/// Checks d f / d inputs, where f returns a scalar tensor. Every input
/// coordinate is perturbed by +/- h; f must be deterministic.
inline GradCheckResult gradcheck(const std::function<Tensor()>& f, std::vector<Tensor> inputs, double h = 1e-5) {
  for (auto& t : inputs) {
    t.set_requires_grad(true);
    t.zero_grad();
  }
  Tensor out = f();
  require<ShapeError>(out.size() == 1, "gradcheck needs a scalar function");
  out.backward();
  GradCheckResult res;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    auto& t = inputs[k];
    std::vector<double> analytic(t.size(), 0.0);
    if (t.has_grad()) analytic.assign(t.grad().begin(), t.grad().end());
    std::vector<double> numeric(t.size());
    {
      NoGrad ng;
      for (std::size_t i = 0; i < t.size(); ++i) {
        double& v = t.mutable_values()[i];
        const double orig = v;
        v = orig + h;
        const double fp = f().item();
        v = orig - h;
        const double fm = f().item();
        v = orig;
        numeric[i] = (fp - fm) / (2.0 * h);
        ++res.checked;
      }
    }
    const double e = relative_error(analytic, numeric);
    if (e >= res.max_rel_error) {
      res.max_rel_error = e;
      res.worst_input = k;
    }
  }
  return res;
}

}  // namespace uwssl::nn
