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


// Frozen-feature extraction, embedding statistics and the probe run.

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "uwssl/harness/training.hpp"
#include "uwssl/probe/logreg.hpp"
#include "uwssl/probe/split.hpp"

namespace uwssl::harness {

enum class FeatureSource { kEncoder, kExpander };

inline FeatureSource feature_source(const std::string& s) {
  if (s == "encoder") return FeatureSource::kEncoder;
  if (s == "expander") return FeatureSource::kExpander;
  throw InvalidArgument("feature source must be encoder or expander, got " + s);
}

/// Windows through the model in eval mode, one row per window. With
/// `augmented`, each window is replaced by the first view of a positive
/// pair drawn from the stream (cfg.seed, "stats-view", i).
inline probe::Matrix extract_features(const ExperimentConfig& cfg, SslModel& model, const Corpus& corpus,
                                      const std::vector<WindowRef>& windows, FeatureSource source,
                                      std::size_t batch = 64, bool augmented = false) {
  dsp::Featurizer fz(cfg.dsp);
  nn::NoGrad ng;
  const bool was_training = model.training();
  model.set_training(false);
  const std::size_t dim =
      source == FeatureSource::kEncoder ? model.encoder->embedding_dim() : model.expander->config().output_dim;
  probe::Matrix out(static_cast<Eigen::Index>(windows.size()), static_cast<Eigen::Index>(dim));
  for (std::size_t lo = 0; lo < windows.size(); lo += batch) {
    const std::size_t hi = std::min(windows.size(), lo + batch);
    std::vector<audio::AudioClip> clips;
    for (std::size_t i = lo; i < hi; ++i) {
      if (!augmented) {
        clips.push_back(corpus.window(windows[i]));
        continue;
      }
      const auto ctx = corpus.context(windows[i]);
      const Rng item(cfg.seed, "stats-view", i);
      clips.push_back(augment::sample_pair(cfg.augmentation, &ctx, corpus.window(windows[i]), item).view_a);
    }
    nn::Tensor x = feature_batch(fz, clips, cfg.input_offset_db, cfg.input_scale_db);
    nn::Tensor z = source == FeatureSource::kEncoder ? model.embed(x) : model(x);
    for (std::size_t i = lo; i < hi; ++i) {
      for (std::size_t j = 0; j < dim; ++j) {
        out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = z[(i - lo) * dim + j];
      }
    }
  }
  model.set_training(was_training);
  return out;
}

struct EmbeddingStats {
  double mean_std = 0.0;           // mean over dimensions of the population std
  double mean_abs_offdiag_corr = 0.0;  // over pairs with non-constant dimensions
  std::size_t constant_dims = 0;
};

inline EmbeddingStats embedding_stats(const probe::Matrix& z) {
  require(z.rows() >= 2, "embedding statistics need at least 2 rows");
  const probe::Matrix c = z.rowwise() - z.colwise().mean();
  const double n = static_cast<double>(z.rows());
  const probe::Matrix cov = (c.transpose() * c) / n;
  const auto d = cov.rows();
  EmbeddingStats s;
  std::vector<double> sd(static_cast<std::size_t>(d));
  for (Eigen::Index j = 0; j < d; ++j) {
    sd[static_cast<std::size_t>(j)] = std::sqrt(std::max(0.0, cov(j, j)));
    s.mean_std += sd[static_cast<std::size_t>(j)] / static_cast<double>(d);
  }
  double acc = 0.0;
  std::size_t pairs = 0;
  for (Eigen::Index i = 0; i < d; ++i) {
    if (sd[static_cast<std::size_t>(i)] <= 1e-12) {
      ++s.constant_dims;
      continue;
    }
    for (Eigen::Index j = 0; j < d; ++j) {
      if (i == j || sd[static_cast<std::size_t>(j)] <= 1e-12) continue;
      acc += std::abs(cov(i, j) / (sd[static_cast<std::size_t>(i)] * sd[static_cast<std::size_t>(j)]));
      ++pairs;
    }
  }
  s.mean_abs_offdiag_corr = pairs ? acc / static_cast<double>(pairs) : 0.0;
  return s;
}

inline nlohmann::json to_json(const EmbeddingStats& s) {
  return {{"mean_std", s.mean_std},
          {"mean_abs_offdiag_corr", s.mean_abs_offdiag_corr},
          {"constant_dims", s.constant_dims}};
}

struct ProbeRun {
  probe::Metrics metrics;
  std::size_t train_windows = 0;
  std::size_t test_windows = 0;
  std::size_t feature_dim = 0;
  probe::Split split;
  probe::ProbeModel model;
};

/// Labels of the windows; every window must be labeled.
inline std::vector<int> window_labels(const Corpus& corpus, const std::vector<WindowRef>& windows) {
  std::vector<int> y;
  for (const auto& w : windows) {
    const int l = corpus.label(w);
    require(l >= 0, "probe needs labels; recording ", corpus.recordings[w.recording].entry.recording_id,
            " has none");
    y.push_back(l);
  }
  return y;
}

/// Fits the probe on train-split features and scores the test split.
inline ProbeRun run_probe(const probe::Matrix& train_x, const std::vector<int>& train_y, const probe::Matrix& test_x,
                          const std::vector<int>& test_y, std::size_t n_classes, const probe::ProbeConfig& pc) {
  ProbeRun run;
  run.model = probe::fit_probe(train_x, train_y, n_classes, pc);
  run.metrics = probe::evaluate(run.model, test_x, test_y);
  run.train_windows = static_cast<std::size_t>(train_x.rows());
  run.test_windows = static_cast<std::size_t>(test_x.rows());
  run.feature_dim = static_cast<std::size_t>(train_x.cols());
  return run;
}

inline ProbeRun probe_model(const ExperimentConfig& cfg, SslModel& model, const Corpus& corpus,
                            const probe::Split& split) {
  const auto source = feature_source(cfg.probe.features);
  const auto train_w = corpus.windows(split.train), test_w = corpus.windows(split.test);
  ProbeRun run = run_probe(extract_features(cfg, model, corpus, train_w, source), window_labels(corpus, train_w),
                           extract_features(cfg, model, corpus, test_w, source), window_labels(corpus, test_w),
                           corpus.class_names.size(), cfg.probe.fit);
  run.split = split;
  return run;
}

}  // namespace uwssl::harness
