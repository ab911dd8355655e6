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

// Module tree with named parameters and basic layers.

#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "uwssl/core/rng.hpp"
#include "uwssl/nn/ops.hpp"

namespace uwssl::nn {

// Biases and normalization parameters are exempt from LARS adaptation and
// weight decay.
enum class ParamKind { kWeight, kBias, kNorm };

struct NamedParam {
  std::string name;
  Tensor tensor;
  ParamKind kind = ParamKind::kWeight;
};

struct NamedBuffer {
  std::string name;
  std::vector<double>* data = nullptr;
};

/// Modules are pinned in memory; children register by address.
class Module {
 public:
  Module() = default;
  Module(const Module&) = delete;
  Module& operator=(const Module&) = delete;
  virtual ~Module() = default;

  void set_training(bool on) {
    training_ = on;
    for (auto& [_, c] : children_) c->set_training(on);
  }
  bool training() const { return training_; }

  std::vector<NamedParam> parameters() const {
    std::vector<NamedParam> out;
    collect_params("", out);
    return out;
  }
  std::vector<NamedBuffer> buffers() const {
    std::vector<NamedBuffer> out;
    collect_buffers("", out);
    return out;
  }
  void zero_grad() const {
    for (auto& p : parameters()) p.tensor.node()->grad.clear();
  }

 protected:
  Tensor register_param(std::string name, Tensor t, ParamKind kind) {
    t.set_requires_grad(true);
    params_.push_back({std::move(name), t, kind});
    return t;
  }
  void register_buffer(std::string name, std::vector<double>* data) { buffers_.push_back({std::move(name), data}); }
  void register_child(std::string name, Module* m) { children_.emplace_back(std::move(name), m); }

 private:
  void collect_params(const std::string& prefix, std::vector<NamedParam>& out) const {
    for (const auto& p : params_) out.push_back({prefix + p.name, p.tensor, p.kind});
    for (const auto& [name, c] : children_) c->collect_params(prefix + name + ".", out);
  }
  void collect_buffers(const std::string& prefix, std::vector<NamedBuffer>& out) const {
    for (const auto& b : buffers_) out.push_back({prefix + b.name, b.data});
    for (const auto& [name, c] : children_) c->collect_buffers(prefix + name + ".", out);
  }

  bool training_ = true;
  std::vector<NamedParam> params_;
  std::vector<NamedBuffer> buffers_;
  std::vector<std::pair<std::string, Module*>> children_;
};

/// Number of scalar trainable parameters.
inline std::size_t parameter_count(const Module& m) {
  std::size_t n = 0;
  for (const auto& p : m.parameters()) n += p.tensor.size();
  return n;
}

/// Kaiming-uniform: U(-b, b) with b = sqrt(6 / fan_in).
inline Tensor kaiming_uniform(Shape shape, std::size_t fan_in, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::vector<double> v(numel(shape));
  for (double& x : v) x = rng.uniform(-bound, bound);
  return Tensor(std::move(shape), std::move(v));
}

class Linear : public Module {
 public:
  Linear(std::size_t in, std::size_t out, Rng& rng, bool bias = true) : in_(in), out_(out) {
    require(in >= 1 && out >= 1, "linear dims must be >= 1");
    weight = register_param("weight", kaiming_uniform({in, out}, in, rng), ParamKind::kWeight);
    if (bias) this->bias = register_param("bias", Tensor::zeros({out}), ParamKind::kBias);
  }
  Tensor operator()(const Tensor& x) const { return linear(x, weight, bias); }
  std::size_t in_features() const { return in_; }
  std::size_t out_features() const { return out_; }

  Tensor weight;
  Tensor bias;

 private:
  std::size_t in_, out_;
};

class LayerNorm : public Module {
 public:
  explicit LayerNorm(std::size_t dim) {
    scale = register_param("scale", Tensor::full({dim}, 1.0), ParamKind::kNorm);
    shift = register_param("shift", Tensor::zeros({dim}), ParamKind::kNorm);
  }
  Tensor operator()(const Tensor& x) const { return layer_norm(x, scale, shift); }

  Tensor scale;
  Tensor shift;
};

class BatchNorm : public Module {
 public:
  explicit BatchNorm(std::size_t channels, double momentum = 0.1) : state(channels) {
    state.momentum = momentum;
    scale = register_param("scale", Tensor::full({channels}, 1.0), ParamKind::kNorm);
    shift = register_param("shift", Tensor::zeros({channels}), ParamKind::kNorm);
    register_buffer("running_mean", &state.running_mean);
    register_buffer("running_var", &state.running_var);
  }
  Tensor operator()(const Tensor& x) { return batch_norm(x, scale, shift, state, training()); }

  Tensor scale;
  Tensor shift;
  BatchNormState state;
};

class DepthwiseConv1d : public Module {
 public:
  DepthwiseConv1d(std::size_t channels, std::size_t kernel, Rng& rng) {
    require(kernel % 2 == 1, "depthwise kernel must be odd, got ", kernel);
    weight = register_param("weight", kaiming_uniform({kernel, channels}, kernel, rng), ParamKind::kWeight);
    bias = register_param("bias", Tensor::zeros({channels}), ParamKind::kBias);
  }
  Tensor operator()(const Tensor& x) const { return depthwise_conv1d(x, weight, bias); }

  Tensor weight;
  Tensor bias;
};

class Conv2d : public Module {
 public:
  Conv2d(std::size_t in, std::size_t out, std::size_t kernel, std::size_t stride, std::size_t pad, Rng& rng)
      : stride_(stride), pad_(pad) {
    weight = register_param("weight", kaiming_uniform({kernel, kernel, in, out}, kernel * kernel * in, rng),
                            ParamKind::kWeight);
    bias = register_param("bias", Tensor::zeros({out}), ParamKind::kBias);
  }
  Tensor operator()(const Tensor& x) const { return conv2d(x, weight, bias, stride_, pad_); }

  Tensor weight;
  Tensor bias;

 private:
  std::size_t stride_, pad_;
};

}  // namespace uwssl::nn
