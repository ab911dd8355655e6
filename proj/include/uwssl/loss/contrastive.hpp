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


// Contrastive objectives: NT-Xent over two stacked views and its labeled
// generalization SupCon. Both share one kernel: for anchor i,
//
//   loss_i = -(1/|P(i)|) sum_{p in P(i)} s_ip / tau + log sum_{a != i} exp(s_ia / tau)
//
// where s is the dot product of (optionally L2-normalized) rows.

#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

#include "uwssl/loss/vicreg.hpp"
#include "uwssl/nn/ops.hpp"

namespace uwssl::loss {

struct ContrastiveResult {
  Tensor total;                    // summed over anchors
  std::vector<double> per_anchor;  // loss_i
  double mean() const {
    double s = 0.0;
    for (double v : per_anchor) s += v;
    return s / static_cast<double>(per_anchor.size());
  }
};

namespace detail {

// positives[i] lists P(i); every list is non-empty and excludes i.
inline ContrastiveResult contrastive(const Tensor& z, const std::vector<std::vector<std::size_t>>& positives,
                                     double tau, bool normalize, const char* op) {
  require<InvalidArgument>(tau > 0.0, op, ": temperature must be positive, got ", tau);
  require<ShapeError>(z.rank() == 2, op, " expects an [n, d] batch, got ", nn::shape_str(z.shape()));
  const std::size_t n = z.dim(0), d = z.dim(1);
  require<InvalidArgument>(n >= 2, op, " needs at least 2 rows");
  using nn::kernels::RowMat;
  const auto& zv = z.values();
  auto u = std::make_shared<RowMat>(nn::kernels::CMap(zv.data(), static_cast<Eigen::Index>(n),
                                                      static_cast<Eigen::Index>(d)));
  auto norms = std::make_shared<std::vector<double>>(n, 1.0);
  if (normalize) {
    for (std::size_t i = 0; i < n; ++i) {
      const double r = u->row(static_cast<Eigen::Index>(i)).norm();
      require<InvalidArgument>(r > 0.0, op, ": row ", i, " has zero norm");
      (*norms)[i] = r;
      u->row(static_cast<Eigen::Index>(i)) /= r;
    }
  }
  const RowMat sim = (*u) * u->transpose();
  // dL/ds_ia, before symmetrization.
  auto gs = std::make_shared<RowMat>(RowMat::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)));
  ContrastiveResult res;
  res.per_anchor.resize(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& pos = positives[i];
    const auto ii = static_cast<Eigen::Index>(i);
    double mx = -INFINITY;
    for (std::size_t a = 0; a < n; ++a) {
      if (a != i) mx = std::max(mx, sim(ii, static_cast<Eigen::Index>(a)) / tau);
    }
    double denom = 0.0;
    for (std::size_t a = 0; a < n; ++a) {
      if (a != i) denom += std::exp(sim(ii, static_cast<Eigen::Index>(a)) / tau - mx);
    }
    const double lse = mx + std::log(denom);
    double li = lse;
    const double inv_p = 1.0 / static_cast<double>(pos.size());
    for (std::size_t p : pos) li -= inv_p * sim(ii, static_cast<Eigen::Index>(p)) / tau;
    res.per_anchor[i] = li;
    total += li;
    for (std::size_t a = 0; a < n; ++a) {
      if (a != i) (*gs)(ii, static_cast<Eigen::Index>(a)) = std::exp(sim(ii, static_cast<Eigen::Index>(a)) / tau - lse) / tau;
    }
    for (std::size_t p : pos) (*gs)(ii, static_cast<Eigen::Index>(p)) -= inv_p / tau;
  }
  res.total = nn::make_result(op, {1}, Buffer{total}, {z}, [u, norms, gs, n, d, normalize](Node& self) {
    double* g = nn::input_grad(self, 0);
    if (!g) return;
    RowMat du = self.grad[0] * (*gs + gs->transpose()) * (*u);
    auto gm = nn::kernels::MMap(g, static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < n; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      if (normalize) {
        const double proj = u->row(ii).dot(du.row(ii));
        gm.row(ii) += (du.row(ii) - proj * u->row(ii)) / (*norms)[i];
      } else {
        gm.row(ii) += du.row(ii);
      }
    }
  });
  return res;
}

}  // namespace detail

/// NT-Xent on 2N rows where row i and row (i + N) mod 2N are the two views
/// of one sample. Cosine similarity.
inline ContrastiveResult ntxent_loss(const Tensor& z, double tau) {
  require<ShapeError>(z.rank() == 2 && z.dim(0) % 2 == 0 && z.dim(0) >= 2,
                      "ntxent_loss expects [2N, d] with N >= 1, got ", nn::shape_str(z.shape()));
  const std::size_t n = z.dim(0), half = n / 2;
  std::vector<std::vector<std::size_t>> pos(n);
  for (std::size_t i = 0; i < n; ++i) pos[i] = {(i + half) % n};
  return detail::contrastive(z, pos, tau, true, "ntxent_loss");
}

/// SupCon: positives of anchor i are the other rows sharing its label.
inline ContrastiveResult supcon_loss(const Tensor& z, const std::vector<int>& labels, double tau,
                                     bool normalize = true) {
  require<ShapeError>(z.rank() == 2 && z.dim(0) == labels.size(), "supcon_loss: ", labels.size(),
                      " labels for batch ", nn::shape_str(z.shape()));
  const std::size_t n = labels.size();
  std::vector<std::vector<std::size_t>> pos(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = 0; p < n; ++p) {
      if (p != i && labels[p] == labels[i]) pos[i].push_back(p);
    }
    require<InvalidArgument>(!pos[i].empty(), "supcon_loss: anchor ", i, " (label ", labels[i],
                             ") has no positive in the batch");
  }
  return detail::contrastive(z, pos, tau, normalize, "supcon_loss");
}

}  // namespace uwssl::loss
