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


// VICReg objective on batch embedding matrices Z, Z' of shape [n, d].

#pragma once

#include <cmath>
#include <memory>

#include <nlohmann/json.hpp>

#include "uwssl/nn/ops.hpp"

namespace uwssl::loss {

using nn::Buffer;
using nn::Node;
using nn::Tensor;

struct LossWeights {
  double lambda = 5.0;  // invariance
  double mu = 5.0;      // variance
  double nu = 1.0;      // covariance
  double gamma = 1.0;   // target standard deviation
  double epsilon = 1e-4;
  bool hinge = false;  // max(0, gamma - S) instead of |gamma - S|

  void validate() const {
    require<InvalidArgument>(lambda >= 0.0 && mu >= 0.0 && nu >= 0.0, "loss weights must be non-negative");
    require<InvalidArgument>(gamma > 0.0, "gamma must be positive");
    require<InvalidArgument>(epsilon > 0.0, "epsilon must be positive");
  }
};

inline void to_json(nlohmann::json& j, const LossWeights& w) {
  j = {{"lambda", w.lambda}, {"mu", w.mu}, {"nu", w.nu}, {"gamma", w.gamma}, {"epsilon", w.epsilon}, {"hinge", w.hinge}};
}

namespace detail {

inline void require_batch(const Tensor& z, const char* what) {
  require<ShapeError>(z.rank() == 2, what, " expects an [n, d] batch, got ", nn::shape_str(z.shape()));
  require<InvalidArgument>(z.dim(0) >= 2, what, " needs at least 2 rows, got ", z.dim(0));
}

// Column-centered copy of Z.
inline Buffer centered(const Buffer& z, std::size_t n, std::size_t d) {
  Buffer c(z);
  for (std::size_t j = 0; j < d; ++j) {
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) m += z[i * d + j];
    m /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) c[i * d + j] -= m;
  }
  return c;
}

}  // namespace detail

/// (1/d) sum_j |gamma - sqrt(Var(z^j) + eps)| with the unbiased variance.
/// The kink of |.| gets subgradient 0.
inline Tensor variance_term(const Tensor& z, double gamma = 1.0, double epsilon = 1e-4, bool hinge = false) {
  detail::require_batch(z, "variance_term");
  const std::size_t n = z.dim(0), d = z.dim(1);
  auto xc = std::make_shared<Buffer>(detail::centered(z.values(), n, d));
  auto dterm_dvar = std::make_shared<Buffer>(d);
  double total = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) ss += (*xc)[i * d + j] * (*xc)[i * d + j];
    const double s = std::sqrt(ss / static_cast<double>(n - 1) + epsilon);
    const double gap = gamma - s;
    double slope = 0.0;  // d|gap| / dS
    if (hinge) {
      total += std::max(0.0, gap);
      slope = gap > 0.0 ? -1.0 : 0.0;
    } else {
      total += std::abs(gap);
      slope = gap > 0.0 ? -1.0 : (gap < 0.0 ? 1.0 : 0.0);
    }
    (*dterm_dvar)[j] = slope / (2.0 * s) / static_cast<double>(d);
  }
  total /= static_cast<double>(d);
  return nn::make_result("variance_term", {1}, Buffer{total}, {z}, [xc, dterm_dvar, n, d](Node& self) {
    if (double* g = nn::input_grad(self, 0)) {
      const double up = self.grad[0] * 2.0 / static_cast<double>(n - 1);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) g[i * d + j] += up * (*dterm_dvar)[j] * (*xc)[i * d + j];
      }
    }
  });
}

/// (1/d) sum_{i != j} C_ij^2 with C the unbiased sample covariance.
inline Tensor covariance_term(const Tensor& z) {
  detail::require_batch(z, "covariance_term");
  const std::size_t n = z.dim(0), d = z.dim(1);
  using nn::kernels::RowMat;
  auto xc = std::make_shared<RowMat>(nn::kernels::CMap(detail::centered(z.values(), n, d).data(),
                                                       static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d)));
  auto cov = std::make_shared<RowMat>((xc->transpose() * *xc) / static_cast<double>(n - 1));
  cov->diagonal().setZero();
  const double total = cov->squaredNorm() / static_cast<double>(d);
  return nn::make_result("covariance_term", {1}, Buffer{total}, {z}, [xc, cov, n, d](Node& self) {
    if (double* g = nn::input_grad(self, 0)) {
      const double up = self.grad[0] * 4.0 / (static_cast<double>(d) * static_cast<double>(n - 1));
      nn::kernels::MMap(g, static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d)).noalias() +=
          up * (*xc) * (*cov);
    }
  });
}

/// Batch mean of -cos(Z_i, Z'_i).
inline Tensor invariance_term(const Tensor& a, const Tensor& b) {
  nn::require_same_shape(a, b, "invariance_term");
  require<ShapeError>(a.rank() == 2, "invariance_term expects [n, d] batches, got ", nn::shape_str(a.shape()));
  const std::size_t n = a.dim(0), d = a.dim(1);
  const auto& av = a.values();
  const auto& bv = b.values();
  auto stats = std::make_shared<std::vector<double>>(3 * n);  // |a_i|, |b_i|, cos_i
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double aa = 0.0, bb = 0.0, ab = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      aa += av[i * d + j] * av[i * d + j];
      bb += bv[i * d + j] * bv[i * d + j];
      ab += av[i * d + j] * bv[i * d + j];
    }
    require<InvalidArgument>(aa > 0.0 && bb > 0.0, "invariance_term: row ", i, " has zero norm");
    const double na = std::sqrt(aa), nb = std::sqrt(bb), c = ab / (na * nb);
    (*stats)[3 * i] = na;
    (*stats)[3 * i + 1] = nb;
    (*stats)[3 * i + 2] = c;
    total -= c;
  }
  total /= static_cast<double>(n);
  return nn::make_result("invariance_term", {1}, Buffer{total}, {a, b}, [stats, n, d](Node& self) {
    const auto& av = self.inputs[0]->value;
    const auto& bv = self.inputs[1]->value;
    double* ga = nn::input_grad(self, 0);
    double* gb = nn::input_grad(self, 1);
    const double up = -self.grad[0] / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double na = (*stats)[3 * i], nb = (*stats)[3 * i + 1], c = (*stats)[3 * i + 2];
      for (std::size_t j = 0; j < d; ++j) {
        const double x = av[i * d + j], y = bv[i * d + j];
        if (ga) ga[i * d + j] += up * (y / (na * nb) - c * x / (na * na));
        if (gb) gb[i * d + j] += up * (x / (na * nb) - c * y / (nb * nb));
      }
    }
  });
}

struct VicregResult {
  Tensor total;
  double invariance = 0.0;
  double variance_a = 0.0;
  double variance_b = 0.0;
  double covariance_a = 0.0;
  double covariance_b = 0.0;
};

/// lambda * s(Z, Z') + mu * (v(Z) + v(Z')) + nu * (c(Z) + c(Z')).
inline VicregResult vicreg_loss(const Tensor& a, const Tensor& b, const LossWeights& w = {}) {
  w.validate();
  Tensor inv = invariance_term(a, b);
  Tensor va = variance_term(a, w.gamma, w.epsilon, w.hinge);
  Tensor vb = variance_term(b, w.gamma, w.epsilon, w.hinge);
  Tensor ca = covariance_term(a);
  Tensor cb = covariance_term(b);
  VicregResult r;
  r.invariance = inv.item();
  r.variance_a = va.item();
  r.variance_b = vb.item();
  r.covariance_a = ca.item();
  r.covariance_b = cb.item();
  r.total = nn::add(nn::add(nn::scale(inv, w.lambda), nn::scale(nn::add(va, vb), w.mu)),
                    nn::scale(nn::add(ca, cb), w.nu));
  return r;
}

}  // namespace uwssl::loss
