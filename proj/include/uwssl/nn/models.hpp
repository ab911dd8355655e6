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

// Conformer encoder, MLP expander and a small residual CNN baseline.
// All encoders take a batch of log-mel frames shaped [B, T, n_mels].

#pragma once

#include <memory>
#include <string>
#include <vector>

#include "uwssl/nn/module.hpp"

namespace uwssl::nn {

struct EncoderConfig {
  std::size_t n_mels = 128;
  std::size_t n_frames = 122;
  std::size_t n_blocks = 2;
  std::size_t model_dim = 64;
  std::size_t n_heads = 4;
  std::size_t conv_kernel = 31;
  std::size_t ffn_dim = 256;
  std::size_t flatten_dim = 2048;
  std::size_t embedding_dim = 128;

  /// Flatten the block output when it has exactly flatten_dim values,
  /// otherwise mean-pool over time.
  bool uses_flatten() const { return n_frames * model_dim == flatten_dim; }
};

inline void validate(const EncoderConfig& c) {
  require(c.n_mels >= 1 && c.n_frames >= 1 && c.model_dim >= 1 && c.ffn_dim >= 1 && c.embedding_dim >= 1,
          "encoder dims must be >= 1");
  require(c.n_heads >= 1 && c.model_dim % c.n_heads == 0, "model_dim ", c.model_dim, " not divisible by n_heads ",
          c.n_heads);
  require(c.conv_kernel % 2 == 1, "conv_kernel must be odd, got ", c.conv_kernel);
}

enum class Activation { kReLU, kSwish };

struct ExpanderConfig {
  std::size_t input_dim = 128;
  std::size_t hidden_dim = 512;
  std::size_t output_dim = 512;
  Activation activation = Activation::kReLU;
};

struct BaselineConfig {
  std::size_t n_mels = 128;
  std::size_t n_frames = 122;
  std::size_t stem_channels = 16;
  std::vector<std::size_t> stage_channels{16, 32};
  std::size_t embedding_dim = 128;
};

/// Any model mapping [B, T, n_mels] to [B, embedding_dim].
class Encoder : public Module {
 public:
  virtual Tensor forward(const Tensor& x) = 0;
  virtual std::size_t embedding_dim() const = 0;
  virtual std::size_t n_frames() const = 0;
  virtual std::size_t n_mels() const = 0;

 protected:
  void check_input(const Tensor& x) const {
    require<ShapeError>(x.rank() == 3 && x.dim(1) == n_frames() && x.dim(2) == n_mels(), "encoder expects [B, ",
                        n_frames(), ", ", n_mels(), "], got ", shape_str(x.shape()));
  }
};

class FeedForward : public Module {
 public:
  FeedForward(std::size_t dim, std::size_t hidden, Rng& rng) : norm(dim), fc1(dim, hidden, rng), fc2(hidden, dim, rng) {
    register_child("norm", &norm);
    register_child("fc1", &fc1);
    register_child("fc2", &fc2);
  }
  Tensor operator()(const Tensor& x) const { return fc2(swish(fc1(norm(x)))); }

  LayerNorm norm;
  Linear fc1, fc2;
};

class MultiHeadSelfAttention : public Module {
 public:
  MultiHeadSelfAttention(std::size_t dim, std::size_t heads, Rng& rng)
      : heads_(heads), norm(dim), qkv(dim, 3 * dim, rng), out(dim, dim, rng) {
    require(dim % heads == 0, "model dim ", dim, " not divisible by ", heads, " heads");
    register_child("norm", &norm);
    register_child("qkv", &qkv);
    register_child("out", &out);
  }
  /// Attention over x itself (no pre-norm); exposed for testing.
  Tensor attend(const Tensor& x) {
    return out(attention(qkv(x), heads_, keep_attention ? &last_attention : nullptr));
  }
  Tensor operator()(const Tensor& x) { return attend(norm(x)); }

  bool keep_attention = false;
  std::vector<double> last_attention;  // [B, H, T, T] when kept
  std::size_t heads() const { return heads_; }

 private:
  std::size_t heads_;

 public:
  LayerNorm norm;
  Linear qkv, out;
};

class ConvModule : public Module {
 public:
  ConvModule(std::size_t dim, std::size_t kernel, Rng& rng)
      : norm(dim), pw1(dim, 2 * dim, rng), dw(dim, kernel, rng), bn(dim), pw2(dim, dim, rng) {
    register_child("norm", &norm);
    register_child("pw1", &pw1);
    register_child("dw", &dw);
    register_child("bn", &bn);
    register_child("pw2", &pw2);
  }
  Tensor operator()(const Tensor& x) { return pw2(swish(bn(dw(glu(pw1(norm(x))))))); }

  LayerNorm norm;
  Linear pw1;
  DepthwiseConv1d dw;
  BatchNorm bn;
  Linear pw2;
};

/// x + FFN/2 -> + MHSA -> + Conv -> + FFN/2 -> LayerNorm
class ConformerBlock : public Module {
 public:
  ConformerBlock(const EncoderConfig& c, Rng& rng)
      : ff1(c.model_dim, c.ffn_dim, rng),
        mhsa(c.model_dim, c.n_heads, rng),
        conv(c.model_dim, c.conv_kernel, rng),
        ff2(c.model_dim, c.ffn_dim, rng),
        norm(c.model_dim) {
    register_child("ff1", &ff1);
    register_child("mhsa", &mhsa);
    register_child("conv", &conv);
    register_child("ff2", &ff2);
    register_child("norm", &norm);
  }
  Tensor operator()(const Tensor& x) {
    Tensor h = residual_add(x, ff1(x), 0.5);
    h = residual_add(h, mhsa(h));
    h = residual_add(h, conv(h));
    h = residual_add(h, ff2(h), 0.5);
    return norm(h);
  }

  FeedForward ff1;
  MultiHeadSelfAttention mhsa;
  ConvModule conv;
  FeedForward ff2;
  LayerNorm norm;
};

class ConformerEncoder : public Encoder {
 public:
  ConformerEncoder(const EncoderConfig& c, Rng& rng)
      : config_((validate(c), c)),
        frontend(c.n_mels, c.model_dim, rng),
        head(c.uses_flatten() ? c.flatten_dim : c.model_dim, c.embedding_dim, rng) {
    register_child("frontend", &frontend);
    for (std::size_t i = 0; i < c.n_blocks; ++i) {
      blocks.push_back(std::make_unique<ConformerBlock>(c, rng));
      register_child("block" + std::to_string(i), blocks.back().get());
    }
    register_child("head", &head);
  }

  Tensor forward(const Tensor& x) override {
    check_input(x);
    Tensor h = frontend(x);
    for (auto& b : blocks) h = (*b)(h);
    return head(config_.uses_flatten() ? flatten(h) : mean_pool(h));
  }
  std::size_t embedding_dim() const override { return config_.embedding_dim; }
  std::size_t n_frames() const override { return config_.n_frames; }
  std::size_t n_mels() const override { return config_.n_mels; }
  const EncoderConfig& config() const { return config_; }

 private:
  EncoderConfig config_;

 public:
  Linear frontend;
  std::vector<std::unique_ptr<ConformerBlock>> blocks;
  Linear head;
};

class Expander : public Module {
 public:
  Expander(const ExpanderConfig& c, Rng& rng)
      : config_(c), fc1(c.input_dim, c.hidden_dim, rng), fc2(c.hidden_dim, c.output_dim, rng) {
    register_child("fc1", &fc1);
    register_child("fc2", &fc2);
  }
  Tensor operator()(const Tensor& x) const {
    require<ShapeError>(x.shape().back() == config_.input_dim, "expander expects input dim ", config_.input_dim,
                        ", got ", shape_str(x.shape()));
    Tensor h = fc1(x);
    h = config_.activation == Activation::kReLU ? relu(h) : swish(h);
    return fc2(h);
  }
  const ExpanderConfig& config() const { return config_; }

 private:
  ExpanderConfig config_;

 public:
  Linear fc1, fc2;
};

/// conv3x3 -> BN -> ReLU -> conv3x3 -> BN, plus identity or 1x1 projection.
class ResidualBlock : public Module {
 public:
  ResidualBlock(std::size_t in, std::size_t out, std::size_t stride, Rng& rng)
      : conv1(in, out, 3, stride, 1, rng), bn1(out), conv2(out, out, 3, 1, 1, rng), bn2(out) {
    register_child("conv1", &conv1);
    register_child("bn1", &bn1);
    register_child("conv2", &conv2);
    register_child("bn2", &bn2);
    if (stride != 1 || in != out) {
      proj = std::make_unique<Conv2d>(in, out, 1, stride, 0, rng);
      proj_bn = std::make_unique<BatchNorm>(out);
      register_child("proj", proj.get());
      register_child("proj_bn", proj_bn.get());
    }
  }
  Tensor operator()(const Tensor& x) {
    Tensor h = bn2(conv2(relu(bn1(conv1(x)))));
    Tensor skip = proj ? (*proj_bn)((*proj)(x)) : x;
    return relu(add(h, skip));
  }

  Conv2d conv1;
  BatchNorm bn1;
  Conv2d conv2;
  BatchNorm bn2;
  std::unique_ptr<Conv2d> proj;
  std::unique_ptr<BatchNorm> proj_bn;
};

/// Small ResNet over the spectrogram as a one-channel image (H = time,
/// W = mel). Stem stride 2, then stages of two residual blocks; every stage
/// after the first downsamples by 2. Global average pool and a linear head.
class BaselineEncoder : public Encoder {
 public:
  BaselineEncoder(const BaselineConfig& c, Rng& rng)
      : config_(c), stem(1, c.stem_channels, 3, 2, 1, rng), stem_bn(c.stem_channels),
        head(c.stage_channels.empty() ? c.stem_channels : c.stage_channels.back(), c.embedding_dim, rng) {
    register_child("stem", &stem);
    register_child("stem_bn", &stem_bn);
    std::size_t ch = c.stem_channels;
    for (std::size_t s = 0; s < c.stage_channels.size(); ++s) {
      for (std::size_t k = 0; k < 2; ++k) {
        const std::size_t stride = (s > 0 && k == 0) ? 2 : 1;
        blocks.push_back(std::make_unique<ResidualBlock>(ch, c.stage_channels[s], stride, rng));
        register_child("stage" + std::to_string(s) + ".block" + std::to_string(k), blocks.back().get());
        ch = c.stage_channels[s];
      }
    }
    register_child("head", &head);
  }

  Tensor forward(const Tensor& x) override {
    check_input(x);
    Tensor h = reshape(x, {x.dim(0), x.dim(1), x.dim(2), 1});
    h = relu(stem_bn(stem(h)));
    for (auto& b : blocks) h = (*b)(h);
    h = reshape(h, {h.dim(0), h.dim(1) * h.dim(2), h.dim(3)});
    return head(mean_pool(h));
  }
  std::size_t embedding_dim() const override { return config_.embedding_dim; }
  std::size_t n_frames() const override { return config_.n_frames; }
  std::size_t n_mels() const override { return config_.n_mels; }

 private:
  BaselineConfig config_;

 public:
  Conv2d stem;
  BatchNorm stem_bn;
  std::vector<std::unique_ptr<ResidualBlock>> blocks;
  Linear head;
};

}  // namespace uwssl::nn
