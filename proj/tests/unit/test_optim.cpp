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

#include <cmath>
#include <vector>

#include "support/random_tensors.hpp"
#include "uwssl/optim/optimizers.hpp"

namespace {

using uwssl::Rng;
using uwssl::nn::NamedParam;
using uwssl::nn::ParamKind;
using uwssl::nn::Tensor;
namespace optim = uwssl::optim;

NamedParam param(std::vector<double> w, ParamKind kind = ParamKind::kWeight, const char* name = "w") {
  return {name, Tensor({w.size()}, w, true), kind};
}

void set_grad(NamedParam& p, const std::vector<double>& g) {
  auto& buf = p.tensor.mutable_grad();
  buf.assign(g.begin(), g.end());
}

double norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

optim::LarsConfig plain_lars() {
  optim::LarsConfig c;
  c.momentum = 0.0;
  c.weight_decay = 0.0;
  return c;
}

TEST(Lars, HandEvaluatedStep) {
  // |w| = 1, |g| = 2: local = 0.001 * 1 / 2, step = 0.01 * local * g.
  auto p = param({0.6, 0.8});
  const std::vector<double> g{1.2, -1.6};
  set_grad(p, g);
  optim::Lars opt({p}, plain_lars());
  EXPECT_NEAR(opt.local_lr(0), 5e-4, 1e-15);
  opt.step();
  const auto& w = p.tensor.values();
  std::vector<double> dw{w[0] - 0.6, w[1] - 0.8};
  // Differences of O(1) weights carry about 1e-16 of rounding.
  EXPECT_NEAR(dw[0], -5e-6 * g[0], 1e-15);
  EXPECT_NEAR(dw[1], -5e-6 * g[1], 1e-15);
  EXPECT_NEAR(norm(dw), 1e-5, 1e-15);
}

TEST(Lars, ZeroGradientLeavesParameters) {
  auto p = param({0.3, -0.2, 0.1});
  optim::LarsConfig c;
  c.weight_decay = 0.0;
  optim::Lars opt({p}, c);
  for (int i = 0; i < 3; ++i) {
    set_grad(p, {0, 0, 0});
    opt.step();
  }
  EXPECT_EQ(p.tensor.values()[0], 0.3);
  EXPECT_EQ(p.tensor.values()[1], -0.2);
  opt.zero_grad();
  opt.step();
  EXPECT_EQ(p.tensor.values()[2], 0.1);
}

TEST(Lars, GradientScaleInvariance) {
  Rng rng(3);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> w0(7), g(7);
    for (auto& v : w0) v = rng.normal();
    for (auto& v : g) v = rng.normal();
    const double c = std::exp(rng.uniform(-5.0, 5.0));
    std::vector<double> gc(g);
    for (auto& v : gc) v *= c;
    auto p1 = param(w0), p2 = param(w0);
    set_grad(p1, g);
    set_grad(p2, gc);
    optim::LarsConfig cfg;
    cfg.weight_decay = 0.0;
    optim::Lars a({p1}, cfg), b({p2}, cfg);
    a.step();
    b.step();
    std::vector<double> d1(7), d2(7);
    for (std::size_t i = 0; i < 7; ++i) {
      d1[i] = p1.tensor.values()[i] - w0[i];
      d2[i] = p2.tensor.values()[i] - w0[i];
    }
    for (std::size_t i = 0; i < 7; ++i) EXPECT_NEAR(d1[i], d2[i], 1e-9 * norm(d1));
  }
}

TEST(Lars, ExemptParametersUsePlainStepWithoutDecay) {
  auto w = param({1.0, 1.0}, ParamKind::kWeight, "fc.weight");
  auto b = param({1.0, 1.0}, ParamKind::kBias, "fc.bias");
  auto n = param({1.0, 1.0}, ParamKind::kNorm, "ln.scale");
  auto pat = param({1.0, 1.0}, ParamKind::kWeight, "head.special");
  for (auto* p : {&w, &b, &n, &pat}) set_grad(*p, {0.5, -0.5});
  optim::LarsConfig c;
  c.momentum = 0.0;
  c.weight_decay = 0.1;
  c.exempt_patterns = {"special"};
  optim::Lars opt({w, b, n, pat}, c);
  EXPECT_EQ(opt.local_lr(1), 1.0);
  EXPECT_EQ(opt.local_lr(2), 1.0);
  EXPECT_EQ(opt.local_lr(3), 1.0);
  opt.step();
  EXPECT_NEAR(b.tensor.values()[0], 1.0 - 0.01 * 0.5, 1e-15);
  EXPECT_NEAR(n.tensor.values()[1], 1.0 + 0.01 * 0.5, 1e-15);
  EXPECT_NEAR(pat.tensor.values()[0], 1.0 - 0.01 * 0.5, 1e-15);
  // Adapted weight: g = 0.5 +- 0.1, trust ratio on |w| / |g|.
  const std::vector<double> g{0.6, -0.4};
  const double local = 0.001 * std::sqrt(2.0) / norm(g);
  EXPECT_NEAR(w.tensor.values()[0], 1.0 - 0.01 * local * 0.6, 1e-15);
  EXPECT_NEAR(w.tensor.values()[1], 1.0 + 0.01 * local * 0.4, 1e-15);
}

TEST(Lars, MomentumAccumulates) {
  auto p = param({0.0, 0.0});
  optim::LarsConfig c;
  c.weight_decay = 0.0;
  optim::Lars opt({p}, c);  // |w| = 0 gives local rate 1
  set_grad(p, {1.0, 0.0});
  opt.step();
  EXPECT_NEAR(p.tensor.values()[0], -0.01, 1e-15);
  // Second step: |w| > 0 now, so the trust ratio applies.
  set_grad(p, {1.0, 0.0});
  const double local = opt.local_lr(0);
  EXPECT_NEAR(local, 0.001 * 0.01 / 1.0, 1e-15);
  opt.step();
  EXPECT_NEAR(p.tensor.values()[0], -0.01 - (0.9 * 0.01 + 0.01 * local), 1e-15);
}

TEST(Lars, RejectsNonFiniteGradientAndBadConfig) {
  auto p = param({1.0});
  set_grad(p, {NAN});
  optim::Lars opt({p}, plain_lars());
  EXPECT_THROW(opt.step(), uwssl::NonFiniteError);
  optim::LarsConfig bad;
  bad.momentum = 1.0;
  EXPECT_THROW(optim::Lars({p}, bad), uwssl::InvalidArgument);
  bad = {};
  bad.base_lr = 0.0;
  EXPECT_THROW(optim::Lars({p}, bad), uwssl::InvalidArgument);
}

TEST(Adam, FirstStepIsSignStep) {
  for (double scale : {1e-3, 1.0, 1e3}) {
    auto p = param({0.5, -0.5, 2.0});
    set_grad(p, {1.3 * scale, -0.2 * scale, 7.0 * scale});
    optim::Adam opt({p}, {});
    opt.step();
    EXPECT_NEAR(p.tensor.values()[0], 0.5 - 0.0005, 1e-6);
    EXPECT_NEAR(p.tensor.values()[1], -0.5 + 0.0005, 1e-6);
    EXPECT_NEAR(p.tensor.values()[2], 2.0 - 0.0005, 1e-6);
  }
}

TEST(Adam, ZeroGradientAndZeroRate) {
  auto p = param({0.25, -1.5});
  set_grad(p, {0.0, 0.0});
  optim::Adam opt({p}, {});
  opt.step();
  EXPECT_EQ(p.tensor.values()[0], 0.25);
  EXPECT_EQ(p.tensor.values()[1], -1.5);
  Rng rng(2);
  auto q = param({0.123456789, -9.87654321});
  optim::AdamConfig zero;
  zero.lr = 0.0;
  optim::Adam frozen({q}, zero);
  for (int i = 0; i < 50; ++i) {
    set_grad(q, {rng.normal(), rng.normal()});
    frozen.step();
  }
  EXPECT_EQ(q.tensor.values()[0], 0.123456789);
  EXPECT_EQ(q.tensor.values()[1], -9.87654321);
}

TEST(Adam, ConstantGradientDecreasesMonotonically) {
  auto p = param({1.0});
  optim::Adam opt({p}, {});
  double prev = 1.0;
  for (int i = 0; i < 1000; ++i) {
    set_grad(p, {0.7});
    opt.step();
    ASSERT_LT(p.tensor.values()[0], prev) << "step " << i;
    prev = p.tensor.values()[0];
  }
  EXPECT_NEAR(prev, 1.0 - 1000 * 0.0005, 1e-6);
}

// f(w) = 0.5 w'Aw - b'w with A = M'M + I.
struct Quadratic {
  std::size_t n;
  std::vector<double> a, b;
  double value(const std::vector<double>& w) const {
    double f = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double aw = 0.0;
      for (std::size_t j = 0; j < n; ++j) aw += a[i * n + j] * w[j];
      f += 0.5 * w[i] * aw - b[i] * w[i];
    }
    return f;
  }
  std::vector<double> grad(const std::vector<double>& w) const {
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i) {
      g[i] = -b[i];
      for (std::size_t j = 0; j < n; ++j) g[i] += a[i * n + j] * w[j];
    }
    return g;
  }
};

Quadratic random_quadratic(Rng& rng, std::size_t n) {
  Quadratic q{n, std::vector<double>(n * n, 0.0), std::vector<double>(n)};
  std::vector<double> m(n * n);
  for (auto& v : m) v = rng.normal();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t k = 0; k < n; ++k) q.a[i * n + j] += m[k * n + i] * m[k * n + j];
      if (i == j) q.a[i * n + j] += 1.0;
    }
  for (auto& v : q.b) v = rng.normal();
  return q;
}

TEST(Optimizers, OneStepReducesConvexQuadratic) {
  Rng rng(19);
  for (int t = 0; t < 10; ++t) {
    Quadratic q = random_quadratic(rng, 5);
    std::vector<double> w0(5);
    for (auto& v : w0) v = rng.normal();
    const double f0 = q.value(w0);
    {
      auto p = param(w0);
      set_grad(p, q.grad(w0));
      optim::Lars opt({p}, {});
      opt.step();
      std::vector<double> w(p.tensor.values().begin(), p.tensor.values().end());
      EXPECT_LT(q.value(w), f0);
    }
    {
      auto p = param(w0);
      set_grad(p, q.grad(w0));
      optim::AdamConfig c;
      c.lr = 1e-4;
      optim::Adam opt({p}, c);
      opt.step();
      std::vector<double> w(p.tensor.values().begin(), p.tensor.values().end());
      EXPECT_LT(q.value(w), f0);
    }
  }
}

TEST(Plateau, ContinuousImprovementKeepsRate) {
  optim::PlateauScheduler s;
  double lr = 0.01;
  for (double l : {1.0, 0.5, 0.25}) lr = s.step(l, lr);
  EXPECT_EQ(lr, 0.01);
}

TEST(Plateau, FlatLossCutsOnceAfterFourthEpoch) {
  optim::PlateauScheduler s;
  double lr = 0.01;
  bool cut = false;
  std::vector<bool> cuts;
  for (int e = 0; e < 4; ++e) {
    lr = s.step(1.0, lr, &cut);
    cuts.push_back(cut);
  }
  EXPECT_EQ(cuts, (std::vector<bool>{false, false, false, true}));
  EXPECT_DOUBLE_EQ(lr, 0.001);
}

TEST(Plateau, ExactThresholdDoesNotReset) {
  optim::PlateauScheduler s;
  s.step(1.0, 1.0);
  s.step(1.0 - 1e-3, 1.0);
  EXPECT_EQ(s.epochs_since_improvement(), 1u);
  s.step(0.99, 1.0);
  EXPECT_EQ(s.epochs_since_improvement(), 0u);
}

TEST(Plateau, NegativeLossesNeedRealImprovement) {
  optim::PlateauScheduler s;
  s.step(-2.0, 1.0);
  s.step(-1.999, 1.0);  // worse
  EXPECT_EQ(s.epochs_since_improvement(), 1u);
  s.step(-2.1, 1.0);
  EXPECT_EQ(s.epochs_since_improvement(), 0u);
}

TEST(Plateau, RateNeverIncreases) {
  Rng rng(23);
  optim::PlateauScheduler s;
  auto p = param({1.0});
  optim::Lars opt({p}, {});
  double prev = opt.lr();
  for (int e = 0; e < 200; ++e) {
    s.step(rng.uniform(0.0, 2.0) + (e < 50 ? 5.0 - 0.1 * e : 0.0), opt);
    ASSERT_LE(opt.lr(), prev);
    prev = opt.lr();
  }
  EXPECT_LT(prev, 0.01);
  EXPECT_THROW(s.step(NAN, 1.0), uwssl::NonFiniteError);
}

}  // namespace
