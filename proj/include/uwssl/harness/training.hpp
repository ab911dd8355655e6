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


// Self-supervised (or supervised contrastive) pretraining loop.

#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "uwssl/harness/config.hpp"
#include "uwssl/harness/data.hpp"
#include "uwssl/loss/contrastive.hpp"
#include "uwssl/loss/vicreg.hpp"
#include "uwssl/nn/checkpoint.hpp"
#include "uwssl/nn/models.hpp"
#include "uwssl/optim/optimizers.hpp"

namespace uwssl::harness {

/// Encoder followed by the expander used during pretraining.
class SslModel : public nn::Module {
 public:
  explicit SslModel(const ExperimentConfig& c) : SslModel(c, Rng(c.seed, "init")) {}

  nn::Tensor embed(const nn::Tensor& x) { return encoder->forward(x); }
  nn::Tensor operator()(const nn::Tensor& x) { return (*expander)(encoder->forward(x)); }

  std::unique_ptr<nn::Encoder> encoder;
  std::unique_ptr<nn::Expander> expander;

 private:
  SslModel(const ExperimentConfig& c, Rng rng) {
    if (c.encoder.type == "conformer") {
      encoder = std::make_unique<nn::ConformerEncoder>(c.encoder.conformer, rng);
    } else {
      encoder = std::make_unique<nn::BaselineEncoder>(c.encoder.baseline, rng);
    }
    expander = std::make_unique<nn::Expander>(c.expander, rng);
    register_child("encoder", encoder.get());
    register_child("expander", expander.get());
  }
};

inline std::unique_ptr<optim::Optimizer> make_optimizer(const OptimizerConfig& c, std::vector<nn::NamedParam> params) {
  if (c.type == "adam") return std::make_unique<optim::Adam>(std::move(params), c.adam);
  return std::make_unique<optim::Lars>(std::move(params), c.lars);
}

/// One training-log row. Contrastive losses have no components.
struct LogRow {
  std::string kind;  // step | epoch
  std::size_t step = 0;
  std::size_t epoch = 0;
  bool has_components = false;
  double inv = 0.0, var_a = 0.0, var_b = 0.0, cov_a = 0.0, cov_b = 0.0;
  double total = 0.0;
  double lr = 0.0;
};

inline constexpr const char* kLogHeader = "kind,step,epoch,inv,var_a,var_b,cov_a,cov_b,total,lr";

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string format_row(const LogRow& r) {
  std::string s = r.kind + "," + std::to_string(r.step) + "," + std::to_string(r.epoch);
  for (double v : {r.inv, r.var_a, r.var_b, r.cov_a, r.cov_b}) s += "," + (r.has_components ? format_double(v) : "");
  s += "," + format_double(r.total) + "," + format_double(r.lr);
  return s;
}

struct PretrainResult {
  std::vector<LogRow> log;
  std::size_t steps = 0;
  double final_lr = 0.0;
};

using ProgressFn = std::function<void(const LogRow&)>;

/// Trains `model` on windows of the given recordings. Per step: draw one
/// positive pair per anchor window, featurize both views, encode, expand,
/// apply the loss and take an optimizer step. The log is written to
/// `log_path` when it is non-empty.
inline PretrainResult pretrain(const ExperimentConfig& cfg, const Corpus& corpus,
                               const std::vector<std::string>& train_ids, SslModel& model,
                               const std::filesystem::path& log_path = {}, const ProgressFn& progress = {}) {
  const auto windows = corpus.windows(train_ids);
  require(windows.size() >= 2, "pretraining needs at least 2 windows, got ", windows.size());
  dsp::Featurizer fz(cfg.dsp);
  model.set_training(true);
  auto opt = make_optimizer(cfg.optimizer, model.parameters());
  optim::PlateauScheduler sched(cfg.optimizer.plateau_config);

  std::ofstream log;
  if (!log_path.empty()) {
    log.open(log_path, std::ios::trunc);
    require<IoError>(log.good(), "cannot write training log ", log_path.string());
    log << kLogHeader << "\n";
  }
  PretrainResult res;
  auto emit = [&](const LogRow& row) {
    res.log.push_back(row);
    if (log.is_open()) log << format_row(row) << "\n" << std::flush;
    if (progress) progress(row);
  };

  const std::size_t bs = cfg.batch_size;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<std::size_t> order(windows.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng shuffle(cfg.seed, "data-order", epoch);
    std::shuffle(order.begin(), order.end(), shuffle.engine());

    std::size_t n_batches = (order.size() + bs - 1) / bs;
    if (order.size() % bs == 1) --n_batches;  // a 1-row tail has no batch statistics
    if (cfg.max_steps_per_epoch > 0) n_batches = std::min(n_batches, cfg.max_steps_per_epoch);
    LogRow epoch_row;
    epoch_row.kind = "epoch";
    epoch_row.epoch = epoch;
    epoch_row.lr = opt->lr();
    epoch_row.has_components = cfg.loss.type == "vicreg";
    for (std::size_t b = 0; b < n_batches; ++b) {
      const std::size_t lo = b * bs, hi = std::min(order.size(), lo + bs);
      std::vector<audio::AudioClip> view_a, view_b;
      std::vector<int> labels;
      for (std::size_t i = lo; i < hi; ++i) {
        const WindowRef& w = windows[order[i]];
        const auto ctx = corpus.context(w);
        const Rng item(cfg.seed, "augment", epoch * windows.size() + order[i]);
        auto pair = augment::sample_pair(cfg.augmentation, &ctx, corpus.window(w), item);
        view_a.push_back(std::move(pair.view_a));
        view_b.push_back(std::move(pair.view_b));
        labels.push_back(corpus.label(w));
      }
      LogRow row;
      row.kind = "step";
      row.step = res.steps;
      row.epoch = epoch;
      row.lr = opt->lr();
      try {
        opt->zero_grad();
        nn::Tensor xa = feature_batch(fz, view_a, cfg.input_offset_db, cfg.input_scale_db);
        nn::Tensor xb = feature_batch(fz, view_b, cfg.input_offset_db, cfg.input_scale_db);
        nn::Tensor total;
        if (cfg.loss.type == "vicreg") {
          auto r = loss::vicreg_loss(model(xa), model(xb), cfg.loss.weights);
          row.has_components = true;
          row.inv = r.invariance;
          row.var_a = r.variance_a;
          row.var_b = r.variance_b;
          row.cov_a = r.covariance_a;
          row.cov_b = r.covariance_b;
          total = r.total;
        } else {
          // Views stacked as rows [a_0..a_{B-1}, b_0..b_{B-1}].
          nn::Buffer both(xa.values());
          both.insert(both.end(), xb.values().begin(), xb.values().end());
          nn::Tensor x({2 * xa.dim(0), xa.dim(1), xa.dim(2)}, std::move(both));
          nn::Tensor z = model(x);
          if (cfg.loss.type == "ntxent") {
            total = loss::ntxent_loss(z, cfg.loss.temperature).total;
          } else {
            std::vector<int> both_labels(labels);
            both_labels.insert(both_labels.end(), labels.begin(), labels.end());
            for (int l : both_labels) require(l >= 0, "supcon pretraining needs labeled recordings");
            total = loss::supcon_loss(z, both_labels, cfg.loss.temperature, cfg.loss.supcon_normalize).total;
          }
        }
        row.total = total.item();
        total.backward();
        opt->step();
      } catch (const NonFiniteError& e) {
        throw NonFiniteError(uwssl::detail::concat("non-finite value at step ", res.steps, " (epoch ", epoch,
                                                   "): ", e.what()));
      }
      ++res.steps;
      emit(row);
      epoch_row.inv += row.inv / static_cast<double>(n_batches);
      epoch_row.var_a += row.var_a / static_cast<double>(n_batches);
      epoch_row.var_b += row.var_b / static_cast<double>(n_batches);
      epoch_row.cov_a += row.cov_a / static_cast<double>(n_batches);
      epoch_row.cov_b += row.cov_b / static_cast<double>(n_batches);
      epoch_row.total += row.total / static_cast<double>(n_batches);
    }
    epoch_row.step = res.steps;
    emit(epoch_row);
    if (cfg.optimizer.plateau) sched.step(epoch_row.total, *opt);
  }
  res.final_lr = opt->lr();
  model.set_training(false);
  return res;
}

}  // namespace uwssl::harness
