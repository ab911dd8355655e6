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

#include <filesystem>
#include <limits>
#include <thread>

#include "support/grad_suite.hpp"
#include "uwssl/nn/checkpoint.hpp"
#include "uwssl/nn/timer.hpp"

using namespace uwssl;
using namespace uwssl::nn;
using uwssl::testing::randn;

namespace {

void zero_all(Module& m) {
  for (auto& p : m.parameters()) {
    if (p.kind == ParamKind::kNorm) continue;
    for (double& v : p.tensor.mutable_values()) v = 0.0;
  }
}

std::vector<double> row_of(const Tensor& t, std::size_t r) {
  const std::size_t c = t.shape().back();
  return {t.values().begin() + static_cast<long>(r * c), t.values().begin() + static_cast<long>((r + 1) * c)};
}

}  // namespace

TEST(Tensor, ShapeChecksAndNonFinite) {
  EXPECT_THROW(Tensor({2, 2}, {1, 2, 3}), ShapeError);
  EXPECT_THROW(Tensor({1}, {std::numeric_limits<double>::infinity()}), NonFiniteError);
  Tensor big({1, 1}, {1e308});
  Tensor w({1, 1}, {10.0});
  EXPECT_THROW(linear(big, w), NonFiniteError);
  EXPECT_THROW(add(Tensor::zeros({2}), Tensor::zeros({3})), ShapeError);
  EXPECT_THROW(linear(Tensor::zeros({2, 3}), Tensor::zeros({4, 2})), ShapeError);
}

TEST(Tensor, FanOutAccumulates) {
  // y = x*x + 3x  ->  dy/dx = 2x + 3
  Tensor x({3}, {1.0, -2.0, 0.5}, true);
  Tensor y = sum(add(mul(x, x), scale(x, 3.0)));
  y.backward();
  EXPECT_DOUBLE_EQ(x.grad()[0], 5.0);
  EXPECT_DOUBLE_EQ(x.grad()[1], -1.0);
  EXPECT_DOUBLE_EQ(x.grad()[2], 4.0);
  // a second backward through a fresh graph accumulates
  sum(x).backward();
  EXPECT_DOUBLE_EQ(x.grad()[0], 6.0);
}

TEST(Tensor, NoGradRecordsNothing) {
  Tensor x({2}, {1.0, 2.0}, true);
  NoGrad ng;
  Tensor y = sum(mul(x, x));
  EXPECT_FALSE(y.requires_grad());
}

TEST(Ops, LinearIdentity) {
  Rng rng(1);
  Tensor x = randn({3, 4}, rng);
  std::vector<double> eye(16, 0.0);
  for (int i = 0; i < 4; ++i) eye[i * 5] = 1.0;
  Tensor y = linear(x, Tensor({4, 4}, eye), Tensor::zeros({4}));
  EXPECT_EQ(y.values(), x.values());
  Linear l(10, 5, rng);
  EXPECT_EQ(parameter_count(l), 55u);
}

TEST(Ops, SoftmaxRowsSumToOne) {
  Rng rng(2);
  Tensor y = softmax(randn({6, 9}, rng, 5.0));
  for (std::size_t r = 0; r < 6; ++r) {
    double s = 0.0;
    for (double v : row_of(y, r)) s += v;
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(Ops, DepthwiseConvMatchesDirectSum) {
  Rng rng(3);
  Tensor x = randn({1, 6, 2}, rng), w = randn({3, 2}, rng), b = randn({2}, rng);
  Tensor y = depthwise_conv1d(x, w, b);
  for (std::size_t t = 0; t < 6; ++t)
    for (std::size_t c = 0; c < 2; ++c) {
      double ref = b[c];
      for (int k = 0; k < 3; ++k) {
        const int src = static_cast<int>(t) + k - 1;
        if (src >= 0 && src < 6) ref += w[static_cast<std::size_t>(k) * 2 + c] * x[static_cast<std::size_t>(src) * 2 + c];
      }
      EXPECT_NEAR(y[t * 2 + c], ref, 1e-14);
    }
}

TEST(Ops, Conv2dMatchesDirectSum) {
  Rng rng(4);
  Tensor x = randn({1, 4, 5, 2}, rng), w = randn({3, 3, 2, 3}, rng), b = randn({3}, rng);
  Tensor y = conv2d(x, w, b, 2, 1);
  ASSERT_EQ(y.shape(), (Shape{1, 2, 3, 3}));
  for (std::size_t oy = 0; oy < 2; ++oy)
    for (std::size_t ox = 0; ox < 3; ++ox)
      for (std::size_t co = 0; co < 3; ++co) {
        double ref = b[co];
        for (int ky = 0; ky < 3; ++ky)
          for (int kx = 0; kx < 3; ++kx) {
            const int iy = static_cast<int>(oy) * 2 + ky - 1, ix = static_cast<int>(ox) * 2 + kx - 1;
            if (iy < 0 || iy >= 4 || ix < 0 || ix >= 5) continue;
            for (std::size_t ci = 0; ci < 2; ++ci)
              ref += x[(static_cast<std::size_t>(iy) * 5 + static_cast<std::size_t>(ix)) * 2 + ci] *
                     w[((static_cast<std::size_t>(ky) * 3 + static_cast<std::size_t>(kx)) * 2 + ci) * 3 + co];
          }
        EXPECT_NEAR(y[(oy * 3 + ox) * 3 + co], ref, 1e-13);
      }
}

TEST(Ops, BatchNormRunningStats) {
  BatchNormState st(1);
  Tensor x({4, 1}, {1.0, 2.0, 3.0, 4.0});
  Tensor g = Tensor::full({1}, 1.0), b = Tensor::zeros({1});
  Tensor y = batch_norm(x, g, b, st, true);
  EXPECT_NEAR(st.running_mean[0], 0.1 * 2.5, 1e-15);
  EXPECT_NEAR(st.running_var[0], 0.9 + 0.1 * (5.0 / 3.0), 1e-15);
  EXPECT_NEAR(y[0], -1.5 / std::sqrt(1.25 + 1e-5), 1e-12);
  Tensor ye = batch_norm(x, g, b, st, false);
  EXPECT_NEAR(ye[0], (1.0 - st.running_mean[0]) / std::sqrt(st.running_var[0] + 1e-5), 1e-12);
}

TEST(GradCheck, EveryCaseAcrossSeeds) {
  for (const auto& c : uwssl::testing::nn_grad_cases()) {
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) worst = std::max(worst, c.run(seed));
    EXPECT_LE(worst, 1e-4) << c.name;
  }
}

TEST(Attention, SingleTokenIsValueProjection) {
  Rng rng(5);
  MultiHeadSelfAttention mhsa(8, 4, rng);
  mhsa.keep_attention = true;
  Tensor x = randn({2, 1, 8}, rng);
  Tensor y = mhsa.attend(x);
  for (double p : mhsa.last_attention) EXPECT_DOUBLE_EQ(p, 1.0);
  // value slice of the packed projection, then the output projection
  Tensor qkv = mhsa.qkv(x);
  std::vector<double> v(16);
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t j = 0; j < 8; ++j) v[b * 8 + j] = qkv[b * 24 + 16 + j];
  Tensor expect = mhsa.out(Tensor({2, 1, 8}, v));
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y[i], expect[i], 1e-13);
}

TEST(Attention, PermutationEquivariantAndRowsNormalized) {
  Rng rng(6);
  MultiHeadSelfAttention mhsa(8, 2, rng);
  mhsa.keep_attention = true;
  const std::size_t T = 5;
  Tensor x = randn({1, T, 8}, rng);
  Tensor y = mhsa(x);
  const std::size_t perm[T] = {3, 0, 4, 1, 2};
  std::vector<double> xp(x.size());
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t j = 0; j < 8; ++j) xp[t * 8 + j] = x[perm[t] * 8 + j];
  for (std::size_t r = 0; r < 2 * T; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < T; ++c) s += mhsa.last_attention[r * T + c];
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
  Tensor yp = mhsa(Tensor({1, T, 8}, xp));
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t j = 0; j < 8; ++j) EXPECT_NEAR(yp[t * 8 + j], y[perm[t] * 8 + j], 1e-12);
}

TEST(Conformer, ZeroWeightsGiveLayerNormOfInput) {
  Rng rng(7);
  EncoderConfig c;
  c.model_dim = 16;
  c.ffn_dim = 32;
  ConformerBlock block(c, rng);
  zero_all(block);
  Tensor x = randn({2, 8, 16}, rng, 3.0, 1.0);
  Tensor y = block(x);
  ASSERT_EQ(y.shape(), x.shape());
  // hand trace: each sub-module ends in a zeroed projection, so only the
  // residual path survives; the final norm has unit scale and zero shift
  for (std::size_t r = 0; r < 16; ++r) {
    const auto xr = row_of(x, r);
    double mu = 0.0, var = 0.0;
    for (double v : xr) mu += v / 16.0;
    for (double v : xr) var += (v - mu) * (v - mu) / 16.0;
    for (std::size_t j = 0; j < 16; ++j) EXPECT_NEAR(y[r * 16 + j], (xr[j] - mu) / std::sqrt(var + 1e-5), 1e-12);
  }
}

TEST(Conformer, ShapePreservedForVariousConfigs) {
  Rng rng(8);
  for (std::size_t heads : {1u, 2u, 4u}) {
    EncoderConfig c;
    c.model_dim = 8;
    c.n_heads = heads;
    c.conv_kernel = 5;
    c.ffn_dim = 10;
    ConformerBlock block(c, rng);
    Tensor x = randn({3, 7, 8}, rng);
    EXPECT_EQ(block(x).shape(), x.shape());
  }
  EncoderConfig bad;
  bad.model_dim = 10;
  bad.n_heads = 4;
  EXPECT_THROW(ConformerEncoder(bad, rng), InvalidArgument);
  bad.n_heads = 2;
  bad.conv_kernel = 4;
  EXPECT_THROW(ConformerEncoder(bad, rng), InvalidArgument);
}

TEST(Encoder, DeskShapesAndDependence) {
  Rng rng(9);
  EncoderConfig c;  // desk defaults
  ConformerEncoder enc(c, rng);
  enc.set_training(false);
  NoGrad ng;
  Tensor x = randn({3, 122, 128}, rng);
  Tensor e = enc.forward(x);
  ASSERT_EQ(e.shape(), (Shape{3, 128}));
  EXPECT_NE(row_of(e, 0), row_of(e, 1));
  // batch independence: row 0 alone equals row 0 in the batch
  Tensor x0({1, 122, 128}, std::vector<double>(x.values().begin(), x.values().begin() + 122 * 128));
  Tensor e0 = enc.forward(x0);
  for (std::size_t j = 0; j < 128; ++j) EXPECT_NEAR(e0[j], e[j], 1e-12);
  EXPECT_THROW(enc.forward(randn({1, 100, 128}, rng)), ShapeError);
  // deterministic forward
  EXPECT_EQ(enc.forward(x).values(), e.values());
}

TEST(Encoder, FlattenHeadAtPaperShape) {
  Rng rng(10);
  EncoderConfig c;
  c.n_frames = 32;
  c.model_dim = 64;
  c.flatten_dim = 2048;
  c.n_blocks = 1;
  c.embedding_dim = 16;
  ASSERT_TRUE(c.uses_flatten());
  ConformerEncoder enc(c, rng);
  EXPECT_EQ(enc.head.in_features(), 2048u);
  NoGrad ng;
  EXPECT_EQ(enc.forward(randn({2, 32, 128}, rng)).shape(), (Shape{2, 16}));
}

TEST(Expander, ZeroWeightsAndShapes) {
  Rng rng(11);
  Expander ex(ExpanderConfig{}, rng);
  EXPECT_EQ(ex(randn({4, 128}, rng)).shape(), (Shape{4, 512}));
  zero_all(ex);
  for (double v : ex(randn({4, 128}, rng)).values()) EXPECT_EQ(v, 0.0);
  EXPECT_THROW(ex(randn({4, 100}, rng)), ShapeError);
}

TEST(Baseline, ShapeAndZeroConvResidual) {
  Rng rng(12);
  BaselineConfig c;
  BaselineEncoder enc(c, rng);
  {
    NoGrad ng;
    EXPECT_EQ(enc.forward(randn({2, 122, 128}, rng)).shape(), (Shape{2, 128}));
  }
  ResidualBlock blk(4, 4, 1, rng);
  zero_all(blk);
  // non-negative input, as after a ReLU
  Tensor x = randn({2, 3, 3, 4}, rng);
  for (double& v : x.mutable_values()) v = std::abs(v);
  Tensor y = blk(x);
  ASSERT_EQ(y.shape(), x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(y[i], x[i], 1e-12);
}

TEST(ParameterCount, ClosedFormConformer) {
  auto closed_form = [](const EncoderConfig& c) {
    const std::size_t d = c.model_dim, f = c.ffn_dim, k = c.conv_kernel;
    const std::size_t ln = 2 * d;
    const std::size_t ffn = ln + (d * f + f) + (f * d + d);
    const std::size_t mhsa = ln + (d * 3 * d + 3 * d) + (d * d + d);
    const std::size_t conv = ln + (d * 2 * d + 2 * d) + (k * d + d) + 2 * d + (d * d + d);
    const std::size_t block = 2 * ffn + mhsa + conv + ln;
    const std::size_t head_in = c.n_frames * d == c.flatten_dim ? c.flatten_dim : d;
    return (c.n_mels * d + d) + c.n_blocks * block + (head_in * c.embedding_dim + c.embedding_dim);
  };
  Rng rng(13);
  EncoderConfig c;
  ConformerEncoder enc(c, rng);
  EXPECT_EQ(parameter_count(enc), closed_form(c));
  EXPECT_EQ(parameter_count(enc), 212800u);
  EncoderConfig c2 = c;
  c2.ffn_dim *= 2;
  ConformerEncoder enc2(c2, rng);
  EXPECT_GT(parameter_count(enc2), parameter_count(enc));
  EXPECT_EQ(parameter_count(enc2), closed_form(c2));
}

TEST(Checkpoint, RoundTripAndMismatch) {
  Rng rng(14);
  auto cfg = uwssl::testing::grad_detail::tiny_encoder(false);
  ConformerEncoder a(cfg, rng), b(cfg, rng);
  {
    NoGrad ng;
    a.forward(randn({2, 5, 6}, rng));  // moves running stats
  }
  const auto path = std::filesystem::temp_directory_path() / "uwssl_ckpt.bin";
  nlohmann::json side = {{"model_dim", 8}};
  save_module(path, a, &side);
  load_module(path, b);
  auto pa = a.parameters(), pb = b.parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(pa[i].tensor.values(), pb[i].tensor.values());
  auto ba = a.buffers(), bb = b.buffers();
  for (std::size_t i = 0; i < ba.size(); ++i) EXPECT_EQ(*ba[i].data, *bb[i].data);
  EXPECT_EQ(read_sidecar(path)["model_dim"], 8);
  auto cfg2 = cfg;
  cfg2.ffn_dim = 13;
  ConformerEncoder c(cfg2, rng);
  EXPECT_THROW(load_module(path, c), IoError);
}

TEST(Timer, ReportsMinimumAndRunningMinimum) {
  int calls = 0;
  const int sleeps_ms[] = {8, 3, 6, 2, 9, 4, 5, 7, 3, 6};
  auto r = inference_timer([&] { std::this_thread::sleep_for(std::chrono::milliseconds(sleeps_ms[calls++])); }, 1);
  ASSERT_EQ(calls, 10);
  ASSERT_EQ(r.pass_ms_per_sample.size(), 10u);
  EXPECT_EQ(r.min_ms_per_sample, *std::min_element(r.pass_ms_per_sample.begin(), r.pass_ms_per_sample.end()));
  double mean = 0.0;
  for (double v : r.pass_ms_per_sample) mean += v / 10.0;
  EXPECT_LT(r.min_ms_per_sample, mean);
  for (std::size_t i = 1; i < r.running_min_ms.size(); ++i) EXPECT_LE(r.running_min_ms[i], r.running_min_ms[i - 1]);
  EXPECT_GE(r.min_ms_per_sample, 2.0);
}

TEST(Timer, OverheadNegligibleAgainstDeskModel) {
  Rng rng(15);
  ConformerEncoder enc(EncoderConfig{}, rng);
  enc.set_training(false);
  Tensor x = randn({1, 122, 128}, rng);
  NoGrad ng;
  const auto model = inference_timer([&] { enc.forward(x); }, 1, 3);
  const auto empty = inference_timer([] {}, 1, 10);
  EXPECT_LT(empty.min_ms_per_sample, 0.01 * model.min_ms_per_sample);
}
