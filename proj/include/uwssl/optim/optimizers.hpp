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


// First-order optimizers over named parameter tensors, and a plateau
// learning-rate decay.

#pragma once

#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "uwssl/nn/module.hpp"

namespace uwssl::optim {

using nn::NamedParam;
using nn::ParamKind;

class Optimizer {
 public:
  explicit Optimizer(std::vector<NamedParam> params) : params_(std::move(params)) {}
  virtual ~Optimizer() = default;

  /// Applies one update from the gradients currently held by the parameters.
  /// A parameter without a gradient is treated as having a zero gradient.
  virtual void step() = 0;
  virtual double lr() const = 0;
  virtual void set_lr(double lr) = 0;

  void zero_grad() {
    for (auto& p : params_) p.tensor.zero_grad();
  }
  const std::vector<NamedParam>& params() const { return params_; }

 protected:
  // Gradient of parameter k, zero-filled when absent; throws on non-finite.
  std::vector<double> gradient(std::size_t k) const {
    const auto& t = params_[k].tensor;
    std::vector<double> g(t.size(), 0.0);
    if (t.has_grad()) g.assign(t.grad().begin(), t.grad().end());
    for (double v : g) {
      if (!std::isfinite(v)) throw NonFiniteError("non-finite gradient for parameter " + params_[k].name);
    }
    return g;
  }

  std::vector<NamedParam> params_;
};

struct LarsConfig {
  double base_lr = 0.01;
  double trust_coefficient = 0.001;
  double momentum = 0.9;
  double weight_decay = 1e-6;
  bool exempt_bias_and_norm = true;
  std::vector<std::string> exempt_patterns;  // name substrings, also exempt

  void validate() const {
    require<InvalidArgument>(base_lr > 0.0, "LARS base_lr must be positive, got ", base_lr);
    require<InvalidArgument>(trust_coefficient > 0.0, "LARS trust_coefficient must be positive");
    require<InvalidArgument>(momentum >= 0.0 && momentum < 1.0, "LARS momentum must lie in [0, 1), got ", momentum);
    require<InvalidArgument>(weight_decay >= 0.0, "LARS weight_decay must be non-negative");
  }
};

inline void to_json(nlohmann::json& j, const LarsConfig& c) {
  j = {{"base_lr", c.base_lr},
       {"trust_coefficient", c.trust_coefficient},
       {"momentum", c.momentum},
       {"weight_decay", c.weight_decay},
       {"exempt_bias_and_norm", c.exempt_bias_and_norm},
       {"exempt_patterns", c.exempt_patterns}};
}

/// Layer-wise adaptive rate scaling. Per parameter tensor:
///   g = grad + wd * w
///   local = trust * |w| / (|g| + 1e-12), or 1 when exempt or |w| = 0
///   m = momentum * m + lr * local * g;  w -= m
/// Exempt tensors skip weight decay.
class Lars : public Optimizer {
 public:
  Lars(std::vector<NamedParam> params, LarsConfig config) : Optimizer(std::move(params)), cfg_(std::move(config)) {
    cfg_.validate();
    lr_ = cfg_.base_lr;
    for (const auto& p : params_) momentum_.emplace_back(p.tensor.size(), 0.0);
  }

  bool exempt(const NamedParam& p) const {
    if (cfg_.exempt_bias_and_norm && p.kind != ParamKind::kWeight) return true;
    for (const auto& pat : cfg_.exempt_patterns) {
      if (p.name.find(pat) != std::string::npos) return true;
    }
    return false;
  }

  /// Trust ratio used for parameter k on the current gradient.
  double local_lr(std::size_t k) const { return local_lr(k, gradient(k)); }

  void step() override {
    for (std::size_t k = 0; k < params_.size(); ++k) {
      auto g = gradient(k);
      auto& w = params_[k].tensor.mutable_values();
      const bool ex = exempt(params_[k]);
      if (!ex && cfg_.weight_decay > 0.0) {
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += cfg_.weight_decay * w[i];
      }
      const double scale = lr_ * local_lr(k, g);
      auto& m = momentum_[k];
      for (std::size_t i = 0; i < g.size(); ++i) {
        m[i] = cfg_.momentum * m[i] + scale * g[i];
        w[i] -= m[i];
      }
    }
  }

  double lr() const override { return lr_; }
  void set_lr(double lr) override { lr_ = lr; }
  const LarsConfig& config() const { return cfg_; }

 private:
  // g already includes weight decay.
  double local_lr(std::size_t k, const std::vector<double>& g) const {
    if (exempt(params_[k])) return 1.0;
    double ww = 0.0, gg = 0.0;
    const auto& w = params_[k].tensor.values();
    for (std::size_t i = 0; i < w.size(); ++i) {
      ww += w[i] * w[i];
      gg += g[i] * g[i];
    }
    if (ww == 0.0) return 1.0;
    return cfg_.trust_coefficient * std::sqrt(ww) / (std::sqrt(gg) + 1e-12);
  }

  LarsConfig cfg_;
  double lr_;
  std::vector<std::vector<double>> momentum_;
};

struct AdamConfig {
  double lr = 0.0005;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const {
    require<InvalidArgument>(lr >= 0.0, "Adam lr must be non-negative, got ", lr);
    require<InvalidArgument>(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0,
                             "Adam betas must lie in [0, 1)");
    require<InvalidArgument>(eps > 0.0, "Adam eps must be positive");
  }
};

inline void to_json(nlohmann::json& j, const AdamConfig& c) {
  j = {{"lr", c.lr}, {"beta1", c.beta1}, {"beta2", c.beta2}, {"eps", c.eps}};
}

/// Bias-corrected Adam.
class Adam : public Optimizer {
 public:
  Adam(std::vector<NamedParam> params, AdamConfig config) : Optimizer(std::move(params)), cfg_(config) {
    cfg_.validate();
    for (const auto& p : params_) {
      m_.emplace_back(p.tensor.size(), 0.0);
      v_.emplace_back(p.tensor.size(), 0.0);
    }
  }

  void step() override {
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
      const auto g = gradient(k);
      auto& w = params_[k].tensor.mutable_values();
      for (std::size_t i = 0; i < g.size(); ++i) {
        m_[k][i] = cfg_.beta1 * m_[k][i] + (1.0 - cfg_.beta1) * g[i];
        v_[k][i] = cfg_.beta2 * v_[k][i] + (1.0 - cfg_.beta2) * g[i] * g[i];
        const double mh = m_[k][i] / c1, vh = v_[k][i] / c2;
        w[i] -= cfg_.lr * mh / (std::sqrt(vh) + cfg_.eps);
      }
    }
  }

  double lr() const override { return cfg_.lr; }
  void set_lr(double lr) override { cfg_.lr = lr; }
  std::size_t steps() const { return t_; }

 private:
  AdamConfig cfg_;
  std::size_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

struct PlateauConfig {
  double factor = 10.0;
  std::size_t patience = 3;
  double min_relative_improvement = 1e-3;

  void validate() const {
    require<InvalidArgument>(factor > 1.0, "plateau factor must exceed 1, got ", factor);
    require<InvalidArgument>(patience >= 1, "plateau patience must be at least 1");
    require<InvalidArgument>(min_relative_improvement >= 0.0, "min_relative_improvement must be non-negative");
  }
};

inline void to_json(nlohmann::json& j, const PlateauConfig& c) {
  j = {{"factor", c.factor}, {"patience", c.patience}, {"min_relative_improvement", c.min_relative_improvement}};
}

/// Divides the learning rate by `factor` once the monitored loss has failed
/// to beat best - |best| * min_relative_improvement for `patience` epochs.
/// For positive losses the threshold is best * (1 - min_relative_improvement);
/// the |best| form keeps it meaningful for negative losses too.
class PlateauScheduler {
 public:
  explicit PlateauScheduler(PlateauConfig config = {}) : cfg_(config) { cfg_.validate(); }

  /// Returns the learning rate to use next; true in *reduced when it changed.
  double step(double epoch_loss, double lr, bool* reduced = nullptr) {
    require<NonFiniteError>(std::isfinite(epoch_loss), "scheduler received a non-finite epoch loss");
    bool cut = false;
    if (!std::isfinite(best_) || epoch_loss < best_ - std::abs(best_) * cfg_.min_relative_improvement) {
      best_ = epoch_loss;
      since_ = 0;
    } else {
      ++since_;
      if (since_ >= cfg_.patience) {
        lr /= cfg_.factor;
        since_ = 0;
        cut = true;
      }
    }
    if (reduced) *reduced = cut;
    return lr;
  }

  void step(double epoch_loss, Optimizer& opt) { opt.set_lr(step(epoch_loss, opt.lr())); }

  double best() const { return best_; }
  std::size_t epochs_since_improvement() const { return since_; }

 private:
  PlateauConfig cfg_;
  double best_ = std::numeric_limits<double>::infinity();
  std::size_t since_ = 0;
};

}  // namespace uwssl::optim
