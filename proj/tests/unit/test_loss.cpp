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


#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "support/grad_suite.hpp"
#include "support/loss_reference.hpp"
#include "support/random_tensors.hpp"
#include "uwssl/loss/contrastive.hpp"
#include "uwssl/loss/vicreg.hpp"

namespace {

using uwssl::Rng;
using uwssl::nn::Tensor;
using uwssl::testing::randn;
namespace loss = uwssl::loss;

using namespace uwssl::testing;

TEST(Variance, IdenticalRowsGiveOneMinusSqrtEps) {
  Tensor z = Tensor::full({5, 3}, 0.7);
  EXPECT_NEAR(loss::variance_term(z).item(), 0.99, 1e-15);
}

TEST(Variance, TargetVarianceGivesZero) {
  const double a = std::sqrt((1.0 - 1e-4) / 2.0);
  Tensor z({2, 2}, std::vector<double>{a, -a, -a, a});
  EXPECT_NEAR(loss::variance_term(z).item(), 0.0, 1e-15);
}

TEST(Variance, SingleFeatureHandValue) {
  Tensor z({2, 1}, std::vector<double>{1.0, -1.0});
  EXPECT_NEAR(loss::variance_term(z).item(), std::sqrt(2.0001) - 1.0, 1e-15);
  EXPECT_NEAR(loss::variance_term(z).item(), 0.41425, 1e-5);
}

TEST(Variance, HingeIgnoresExcessSpread) {
  Tensor z({2, 1}, std::vector<double>{1.0, -1.0});
  EXPECT_EQ(loss::variance_term(z, 1.0, 1e-4, true).item(), 0.0);
  Tensor flat = Tensor::full({3, 2}, 1.0);
  EXPECT_NEAR(loss::variance_term(flat, 1.0, 1e-4, true).item(), 0.99, 1e-15);
}

TEST(Variance, RejectsSingleRow) {
  EXPECT_THROW(loss::variance_term(Tensor::zeros({1, 3})), uwssl::InvalidArgument);
  EXPECT_THROW(loss::covariance_term(Tensor::zeros({1, 3})), uwssl::InvalidArgument);
}

TEST(Covariance, CopiedColumnHandValue) {
  const double a = 1.0 / std::sqrt(2.0);
  Tensor z({2, 2}, std::vector<double>{a, a, -a, -a});
  EXPECT_NEAR(loss::covariance_term(z).item(), 1.0, 1e-15);
}

TEST(Covariance, ZeroBatchAndColumnShift) {
  EXPECT_EQ(loss::covariance_term(Tensor::zeros({4, 3})).item(), 0.0);
  Rng rng(5);
  Mat z = to_mat(randn({6, 4}, rng));
  const double base = loss::covariance_term(from_mat(z)).item();
  for (auto& r : z) r[2] += 17.0;
  EXPECT_NEAR(loss::covariance_term(from_mat(z)).item(), base, 1e-12);
}

TEST(Covariance, ZeroExactlyForUncorrelatedColumns) {
  // Columns built from orthogonal zero-mean patterns.
  Tensor diag({4, 3}, std::vector<double>{1, 1, 1, -1, 1, -1, 1, -1, -1, -1, -1, 1});
  EXPECT_NEAR(loss::covariance_term(diag).item(), 0.0, 1e-15);
  Tensor corr({4, 3}, std::vector<double>{1, 1, 1, -1, 1, -1, 1, -1, -1, -1, -1, 0.5});
  EXPECT_GT(loss::covariance_term(corr).item(), 1e-3);
}

TEST(Invariance, SelfOrthogonalAntiParallel) {
  Rng rng(2);
  Tensor z = randn({5, 3}, rng);
  EXPECT_NEAR(loss::invariance_term(z, z).item(), -1.0, 1e-15);
  EXPECT_NEAR(loss::invariance_term(z, uwssl::nn::scale(z, -1.0)).item(), 1.0, 1e-15);
  Tensor a({2, 2}, std::vector<double>{1, 0, 0, 2});
  Tensor b({2, 2}, std::vector<double>{0, 3, -1, 0});
  EXPECT_NEAR(loss::invariance_term(a, b).item(), 0.0, 1e-15);
}

TEST(Invariance, ScaleInvariant) {
  Rng rng(8);
  for (int t = 0; t < 20; ++t) {
    Tensor a = randn({4, 5}, rng), b = randn({4, 5}, rng);
    const double sa = std::exp(rng.uniform(-3.0, 3.0)), sb = std::exp(rng.uniform(-3.0, 3.0));
    EXPECT_NEAR(loss::invariance_term(uwssl::nn::scale(a, sa), uwssl::nn::scale(b, sb)).item(),
                loss::invariance_term(a, b).item(), 1e-13);
  }
}

TEST(Invariance, RejectsZeroRow) {
  Tensor a = Tensor::zeros({2, 2});
  EXPECT_THROW(loss::invariance_term(a, Tensor::full({2, 2}, 1.0)), uwssl::InvalidArgument);
}

TEST(Vicreg, WeightSelection) {
  Rng rng(4);
  Tensor z = randn({4, 3}, rng);
  loss::LossWeights inv_only{1, 0, 0};
  EXPECT_NEAR(loss::vicreg_loss(z, z, inv_only).total.item(), -1.0, 1e-15);
  loss::LossWeights var_only{0, 1, 0};
  Tensor flat = Tensor::full({4, 3}, 2.0);
  EXPECT_NEAR(loss::vicreg_loss(flat, flat, var_only).total.item(), 1.98, 1e-14);
}

TEST(Vicreg, MatchesComponentSumOnSeededBatch) {
  Rng rng(2024);
  Tensor a = randn({4, 3}, rng), b = randn({4, 3}, rng);
  Mat ma = to_mat(a), mb = to_mat(b);
  const double expected = 5.0 * ref_invariance(ma, mb) + 5.0 * (ref_variance(ma) + ref_variance(mb)) +
                          1.0 * (ref_covariance(ma) + ref_covariance(mb));
  auto r = loss::vicreg_loss(a, b, {5, 5, 1});
  EXPECT_NEAR(r.total.item(), expected, 1e-12);
  EXPECT_NEAR(r.invariance, ref_invariance(ma, mb), 1e-14);
  EXPECT_NEAR(r.variance_a, ref_variance(ma), 1e-14);
  EXPECT_NEAR(r.covariance_b, ref_covariance(mb), 1e-14);
}

TEST(Vicreg, ComponentsMatchLoopsOnManyBatches) {
  Rng rng(77);
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 2 + rng.index(10), d = 1 + rng.index(8);
    Tensor a = randn({n, d}, rng, rng.uniform(0.1, 3.0)), b = randn({n, d}, rng);
    Mat ma = to_mat(a), mb = to_mat(b);
    EXPECT_NEAR(loss::variance_term(a).item(), ref_variance(ma), 1e-12);
    EXPECT_NEAR(loss::covariance_term(a).item(), ref_covariance(ma), 1e-10 * std::max(1.0, ref_covariance(ma)));
    EXPECT_NEAR(loss::invariance_term(a, b).item(), ref_invariance(ma, mb), 1e-12);
  }
}

TEST(Vicreg, RowPermutationInvariance) {
  Rng rng(31);
  Tensor z = randn({7, 4}, rng);
  Mat m = to_mat(z);
  std::vector<std::size_t> perm(7);
  std::iota(perm.begin(), perm.end(), 0);
  for (int t = 0; t < 10; ++t) {
    for (std::size_t i = perm.size() - 1; i > 0; --i) std::swap(perm[i], perm[rng.index(i + 1)]);
    Mat p;
    for (auto i : perm) p.push_back(m[i]);
    EXPECT_NEAR(loss::variance_term(from_mat(p)).item(), loss::variance_term(z).item(), 1e-13);
    EXPECT_NEAR(loss::covariance_term(from_mat(p)).item(), loss::covariance_term(z).item(), 1e-13);
  }
}

TEST(NtXent, SinglePairIsZero) {
  Rng rng(1);
  EXPECT_NEAR(loss::ntxent_loss(randn({2, 4}, rng), 0.5).total.item(), 0.0, 1e-15);
}

TEST(NtXent, IdenticalEmbeddings) {
  auto r = loss::ntxent_loss(Tensor::full({4, 3}, 0.3), 0.1);
  EXPECT_NEAR(r.total.item(), 4.0 * std::log(3.0), 1e-12);
  EXPECT_NEAR(r.total.item(), 4.3944, 1e-4);
  EXPECT_NEAR(r.mean(), std::log(3.0), 1e-12);
}

TEST(NtXent, MatchesDoubleLoop) {
  Rng rng(6);
  for (int t = 0; t < 50; ++t) {
    Tensor z = randn({6, 4}, rng);
    const double tau = rng.uniform(0.05, 1.0);
    EXPECT_NEAR(loss::ntxent_loss(z, tau).total.item(), ref_ntxent(to_mat(z), tau), 1e-10);
  }
}

TEST(NtXent, Errors) {
  Rng rng(1);
  EXPECT_THROW(loss::ntxent_loss(randn({4, 2}, rng), 0.0), uwssl::InvalidArgument);
  EXPECT_THROW(loss::ntxent_loss(randn({3, 2}, rng), 0.5), uwssl::ShapeError);
  EXPECT_THROW(loss::ntxent_loss(Tensor::zeros({2, 2}), 0.5), uwssl::InvalidArgument);
}

TEST(SupCon, IdenticalEmbeddingsOneLabel) {
  auto r = loss::supcon_loss(Tensor::full({4, 2}, -1.0), {3, 3, 3, 3}, 0.2);
  EXPECT_NEAR(r.total.item(), 4.0 * std::log(3.0), 1e-12);
}

TEST(SupCon, ReducesToNtXentWithOnePositive) {
  Rng rng(9);
  for (int t = 0; t < 20; ++t) {
    Tensor z = randn({8, 5}, rng);
    std::vector<int> labels{0, 1, 2, 3, 0, 1, 2, 3};
    EXPECT_NEAR(loss::supcon_loss(z, labels, 0.3).total.item(), loss::ntxent_loss(z, 0.3).total.item(), 1e-12);
  }
}

TEST(SupCon, MatchesTripleLoop) {
  Rng rng(10);
  for (int t = 0; t < 50; ++t) {
    Tensor z = randn({6, 4}, rng);
    std::vector<int> labels(6);
    for (int i = 0; i < 3; ++i) labels[2 * i] = labels[2 * i + 1] = static_cast<int>(rng.index(2));
    const double tau = rng.uniform(0.05, 1.0);
    EXPECT_NEAR(loss::supcon_loss(z, labels, tau).total.item(), ref_supcon(to_mat(z), labels, tau), 1e-10);
  }
}

TEST(SupCon, InvariantToReordering) {
  Rng rng(12);
  Mat m = to_mat(randn({6, 3}, rng));
  std::vector<int> labels{0, 0, 1, 1, 2, 2};
  const double base = loss::supcon_loss(from_mat(m), labels, 0.5).total.item();
  std::vector<std::size_t> perm{3, 0, 5, 1, 4, 2};
  Mat pm;
  std::vector<int> pl;
  for (auto i : perm) {
    pm.push_back(m[i]);
    pl.push_back(labels[i]);
  }
  EXPECT_NEAR(loss::supcon_loss(from_mat(pm), pl, 0.5).total.item(), base, 1e-12);
}

TEST(SupCon, EmptyPositiveSetNamesAnchor) {
  Rng rng(1);
  try {
    loss::supcon_loss(randn({3, 2}, rng), {0, 0, 1}, 0.5);
    FAIL() << "expected an error";
  } catch (const uwssl::InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("anchor 2"), std::string::npos) << e.what();
  }
}

TEST(LossGradCheck, EveryCaseAcrossSeeds) {
  for (const auto& c : uwssl::testing::loss_grad_cases()) {
    for (std::uint64_t s = 0; s < 5; ++s) {
      EXPECT_LE(c.run(s), 1e-4) << c.name << " seed " << s;
    }
  }
}

}  // namespace
