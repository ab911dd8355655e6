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


// Experiment configuration. JSON in, JSON out; unknown keys are errors.

#pragma once

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "uwssl/augment/family.hpp"
#include "uwssl/core/time.hpp"
#include "uwssl/dsp/featurizer.hpp"
#include "uwssl/loss/vicreg.hpp"
#include "uwssl/nn/models.hpp"
#include "uwssl/optim/optimizers.hpp"
#include "uwssl/probe/logreg.hpp"
#include "uwssl/probe/split.hpp"

namespace uwssl::harness {

using nlohmann::json;

/// Reads one JSON object, remembering which keys were consumed so leftovers
/// can be reported.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    require(j.is_object(), "config ", path_, " must be a JSON object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw InvalidArgument(uwssl::detail::concat("config ", path_, ".", key, ": ", e.what()));
    }
  }

  bool has(const char* key) const { return j_.contains(key); }
  const json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }
  std::string path(const char* key) const { return path_ + "." + key; }

  void finish() const {
    for (const auto& [key, _] : j_.items()) {
      require(seen_.count(key) == 1, "unknown config key ", path_, ".", key);
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

struct SyntheticSpec {
  std::size_t n_classes = 4;
  std::vector<double> fundamentals_hz{100.0, 150.0, 225.0, 340.0};
  // Relative harmonic amplitudes per class; empty selects a per-class decay.
  std::vector<std::vector<double>> harmonics;
  std::size_t n_harmonics = 6;
  double freq_jitter = 0.02;     // fraction, per recording
  double amp_jitter_db = 3.0;    // per recording
  double noise_floor_db = -34.0; // white-noise RMS re full scale
  double signal_peak = 0.5;
  std::size_t recordings_per_class = 4;
  double duration_s = 32.0;
  std::string start = "2017-06-01";
  std::string end = "2018-03-01";
  double train_fraction = 0.75;  // time-wise cutoff position within [start, end)

  /// Harmonic amplitudes of class k.
  std::vector<double> profile(std::size_t k) const {
    if (k < harmonics.size()) return harmonics[k];
    std::vector<double> p(n_harmonics);
    const double decay = 0.45 + 0.12 * static_cast<double>(k % 4);
    for (std::size_t h = 0; h < n_harmonics; ++h) p[h] = std::pow(decay, static_cast<double>(h));
    return p;
  }

  Timestamp start_time() const { return parse_iso8601(start); }
  Timestamp end_time() const { return parse_iso8601(end); }
  Timestamp cutoff() const {
    const auto span = (end_time() - start_time()).count();
    return start_time() + std::chrono::seconds(static_cast<long long>(std::llround(train_fraction * static_cast<double>(span))));
  }

  void validate() const {
    require(n_classes >= 2, "synthetic dataset needs at least 2 classes");
    require(fundamentals_hz.size() == n_classes, "synthetic: ", fundamentals_hz.size(), " fundamentals for ", n_classes,
            " classes");
    std::vector<double> f = fundamentals_hz;
    std::sort(f.begin(), f.end());
    for (std::size_t i = 0; i < f.size(); ++i) {
      require(f[i] > 0.0 && f[i] < 1000.0, "synthetic fundamentals must lie in (0, 1000) Hz, got ", f[i]);
      if (i > 0) require(f[i] >= 1.15 * f[i - 1], "synthetic fundamentals ", f[i - 1], " and ", f[i], " are closer than 15%");
    }
    require(harmonics.empty() || harmonics.size() == n_classes, "synthetic: harmonics must list one profile per class");
    for (const auto& h : harmonics) require(!h.empty(), "synthetic: empty harmonic profile");
    require(n_harmonics >= 1, "synthetic: n_harmonics must be >= 1");
    require(freq_jitter >= 0.0 && freq_jitter < 0.07, "synthetic: freq_jitter must lie in [0, 0.07)");
    require(amp_jitter_db >= 0.0, "synthetic: amp_jitter_db must be >= 0");
    require(signal_peak > 0.0 && signal_peak <= 0.9, "synthetic: signal_peak must lie in (0, 0.9]");
    require(recordings_per_class >= 2, "synthetic: need at least 2 recordings per class");
    require(duration_s > 0.0, "synthetic: duration_s must be positive");
    require(start_time() < end_time(), "synthetic: start must precede end");
    require(train_fraction > 0.0 && train_fraction < 1.0, "synthetic: train_fraction must lie in (0, 1)");
  }
};

struct DataConfig {
  std::string manifest;  // empty: generate the synthetic corpus under <out>/data
  SyntheticSpec synthetic;
};

struct EncoderChoice {
  std::string type = "conformer";  // conformer | baseline
  nn::EncoderConfig conformer;
  nn::BaselineConfig baseline;

  std::size_t embedding_dim() const { return type == "conformer" ? conformer.embedding_dim : baseline.embedding_dim; }
  void set_embedding_dim(std::size_t d) {
    conformer.embedding_dim = d;
    baseline.embedding_dim = d;
  }
};

struct LossConfig {
  std::string type = "vicreg";  // vicreg | ntxent | supcon
  loss::LossWeights weights;
  double temperature = 0.1;
  bool supcon_normalize = true;
};

struct OptimizerConfig {
  std::string type = "lars";  // lars | adam
  optim::LarsConfig lars;
  optim::AdamConfig adam;
  bool plateau = true;
  optim::PlateauConfig plateau_config;
};

struct SplitConfig {
  std::string mode = "time_wise";  // time_wise | random_by_recording
  std::string cutoff;              // ISO date; empty uses the synthetic cutoff
  double test_fraction = 0.2;
  std::uint64_t seed = 0;
  double keep_fraction = 1.0;  // < 1 reduces the train side
  bool stratify = true;
};

struct ProbeSettings {
  probe::ProbeConfig fit;
  std::string features = "encoder";  // encoder | expander
};

struct SweepConfig {
  std::vector<std::array<double, 3>> loss_weights{{1, 1, 1}, {5, 5, 1}, {25, 25, 1}};
  std::vector<std::size_t> embedding_size{32, 64, 128, 256, 512};
  std::vector<double> label_fraction{0.1, 0.25, 0.5, 1.0};
  std::vector<std::string> augmentation_family{"default", "expanded"};
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  dsp::DspConfig dsp;
  std::string augmentation_family = "default";  // default | expanded | custom
  std::vector<augment::AugmentationSpec> augmentation = augment::default_family();
  EncoderChoice encoder;
  nn::ExpanderConfig expander;
  LossConfig loss;
  OptimizerConfig optimizer;
  std::size_t batch_size = 64;
  std::size_t epochs = 10;
  std::size_t max_steps_per_epoch = 0;  // 0: every batch
  // Log-mel inputs enter the encoder as (dB + input_offset_db) / input_scale_db.
  double input_offset_db = 40.0;
  double input_scale_db = 40.0;
  SplitConfig split;
  ProbeSettings probe;
  SweepConfig sweep;
  DataConfig data;

  /// Fills derived fields and checks cross-field consistency.
  void finalize() {
    encoder.conformer.n_mels = static_cast<std::size_t>(dsp.n_mels);
    encoder.conformer.n_frames = static_cast<std::size_t>(dsp.frames_per_window());
    encoder.baseline.n_mels = encoder.conformer.n_mels;
    encoder.baseline.n_frames = encoder.conformer.n_frames;
    expander.input_dim = encoder.embedding_dim();
    if (augmentation_family == "default") augmentation = augment::default_family();
    if (augmentation_family == "expanded") augmentation = augment::expanded_family();
    validate();
  }

  void validate() const {
    require(encoder.type == "conformer" || encoder.type == "baseline", "encoder.type must be conformer or baseline, got ",
            encoder.type);
    if (encoder.type == "conformer") nn::validate(encoder.conformer);
    require(!encoder.baseline.stage_channels.empty() || encoder.type != "baseline", "baseline needs at least one stage");
    require(loss.type == "vicreg" || loss.type == "ntxent" || loss.type == "supcon",
            "loss.type must be vicreg, ntxent or supcon, got ", loss.type);
    loss.weights.validate();
    require(loss.temperature > 0.0, "loss.temperature must be positive");
    require(optimizer.type == "lars" || optimizer.type == "adam", "optimizer.type must be lars or adam, got ",
            optimizer.type);
    optimizer.lars.validate();
    optimizer.adam.validate();
    optimizer.plateau_config.validate();
    require(batch_size >= 2, "batch_size must be at least 2");
    require(epochs >= 1, "epochs must be at least 1");
    require(input_scale_db > 0.0, "input_scale_db must be positive");
    require(augmentation_family == "default" || augmentation_family == "expanded" || augmentation_family == "custom",
            "augmentation_family must be default, expanded or custom");
    require(!augmentation.empty(), "augmentation family is empty");
    for (const auto& s : augmentation) augment::validate(s);
    require(split.mode == "time_wise" || split.mode == "random_by_recording",
            "split.mode must be time_wise or random_by_recording, got ", split.mode);
    require(split.keep_fraction > 0.0 && split.keep_fraction <= 1.0, "split.keep_fraction must lie in (0, 1]");
    require(probe.features == "encoder" || probe.features == "expander", "probe.features must be encoder or expander");
    if (data.manifest.empty()) data.synthetic.validate();
    if (data.manifest.empty() == false && split.mode == "time_wise")
      require(!split.cutoff.empty(), "split.cutoff is required with an external manifest");
  }

  Timestamp cutoff() const { return split.cutoff.empty() ? data.synthetic.cutoff() : parse_iso8601(split.cutoff); }

  probe::SplitSpec split_spec() const {
    probe::BaseSplit base;
    if (split.mode == "time_wise") {
      base = probe::TimeWise{cutoff()};
    } else {
      base = probe::RandomByRecording{split.test_fraction, split.seed};
    }
    if (split.keep_fraction >= 1.0) {
      return std::visit([](const auto& b) -> probe::SplitSpec { return b; }, base);
    }
    return probe::ReducedLabels{base, split.keep_fraction, split.seed, split.stratify};
  }
};

namespace config_detail {

inline const char* activation_name(nn::Activation a) { return a == nn::Activation::kReLU ? "relu" : "swish"; }

inline nn::Activation activation_from(const std::string& s) {
  if (s == "relu") return nn::Activation::kReLU;
  if (s == "swish") return nn::Activation::kSwish;
  throw InvalidArgument("expander.activation must be relu or swish, got " + s);
}

}  // namespace config_detail

inline json to_json(const ExperimentConfig& c) {
  using config_detail::activation_name;
  json j;
  j["seed"] = c.seed;
  j["dsp"] = {{"sample_rate", c.dsp.sample_rate}, {"window_s", c.dsp.window_s}, {"n_fft", c.dsp.n_fft},
              {"hop", c.dsp.hop},                 {"n_mels", c.dsp.n_mels},     {"f_min", c.dsp.f_min},
              {"f_max", c.dsp.f_max},             {"floor_db", c.dsp.floor_db}};
  j["augmentation_family"] = c.augmentation_family;
  if (c.augmentation_family == "custom") {
    j["augmentation"] = json::array();
    for (const auto& s : c.augmentation) j["augmentation"].push_back(augment::to_json(s));
  }
  const auto& ec = c.encoder.conformer;
  const auto& bc = c.encoder.baseline;
  j["encoder"] = {{"type", c.encoder.type},
                  {"conformer",
                   {{"n_blocks", ec.n_blocks},
                    {"model_dim", ec.model_dim},
                    {"n_heads", ec.n_heads},
                    {"conv_kernel", ec.conv_kernel},
                    {"ffn_dim", ec.ffn_dim},
                    {"flatten_dim", ec.flatten_dim}}},
                  {"baseline", {{"stem_channels", bc.stem_channels}, {"stage_channels", bc.stage_channels}}},
                  {"embedding_dim", c.encoder.embedding_dim()}};
  j["expander"] = {{"hidden_dim", c.expander.hidden_dim},
                   {"output_dim", c.expander.output_dim},
                   {"activation", activation_name(c.expander.activation)}};
  j["loss"] = {{"type", c.loss.type},
               {"weights", c.loss.weights},
               {"temperature", c.loss.temperature},
               {"supcon_normalize", c.loss.supcon_normalize}};
  j["optimizer"] = {{"type", c.optimizer.type},
                    {"lars", c.optimizer.lars},
                    {"adam", c.optimizer.adam},
                    {"plateau", c.optimizer.plateau},
                    {"plateau_config", c.optimizer.plateau_config}};
  j["batch_size"] = c.batch_size;
  j["epochs"] = c.epochs;
  j["max_steps_per_epoch"] = c.max_steps_per_epoch;
  j["input_offset_db"] = c.input_offset_db;
  j["input_scale_db"] = c.input_scale_db;
  j["split"] = {{"mode", c.split.mode},         {"cutoff", c.split.cutoff},
                {"test_fraction", c.split.test_fraction}, {"seed", c.split.seed},
                {"keep_fraction", c.split.keep_fraction}, {"stratify", c.split.stratify}};
  j["probe"] = {{"fit", c.probe.fit}, {"features", c.probe.features}};
  j["sweep"] = {{"loss_weights", c.sweep.loss_weights},
                {"embedding_size", c.sweep.embedding_size},
                {"label_fraction", c.sweep.label_fraction},
                {"augmentation_family", c.sweep.augmentation_family}};
  const auto& s = c.data.synthetic;
  j["data"] = {{"manifest", c.data.manifest},
               {"synthetic",
                {{"n_classes", s.n_classes},
                 {"fundamentals_hz", s.fundamentals_hz},
                 {"harmonics", s.harmonics},
                 {"n_harmonics", s.n_harmonics},
                 {"freq_jitter", s.freq_jitter},
                 {"amp_jitter_db", s.amp_jitter_db},
                 {"noise_floor_db", s.noise_floor_db},
                 {"signal_peak", s.signal_peak},
                 {"recordings_per_class", s.recordings_per_class},
                 {"duration_s", s.duration_s},
                 {"start", s.start},
                 {"end", s.end},
                 {"train_fraction", s.train_fraction}}}};
  return j;
}

inline SyntheticSpec synthetic_from_json(const json& j, const std::string& path) {
  SyntheticSpec s;
  ObjectReader r(j, path);
  r.get("n_classes", s.n_classes);
  r.get("fundamentals_hz", s.fundamentals_hz);
  r.get("harmonics", s.harmonics);
  r.get("n_harmonics", s.n_harmonics);
  r.get("freq_jitter", s.freq_jitter);
  r.get("amp_jitter_db", s.amp_jitter_db);
  r.get("noise_floor_db", s.noise_floor_db);
  r.get("signal_peak", s.signal_peak);
  r.get("recordings_per_class", s.recordings_per_class);
  r.get("duration_s", s.duration_s);
  r.get("start", s.start);
  r.get("end", s.end);
  r.get("train_fraction", s.train_fraction);
  r.finish();
  return s;
}

/// Parses a config; missing keys keep their defaults.
inline ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  ObjectReader r(j, "$");
  r.get("seed", c.seed);
  if (const json* d = r.child("dsp")) {
    ObjectReader dr(*d, "$.dsp");
    dr.get("sample_rate", c.dsp.sample_rate);
    dr.get("window_s", c.dsp.window_s);
    dr.get("n_fft", c.dsp.n_fft);
    dr.get("hop", c.dsp.hop);
    dr.get("n_mels", c.dsp.n_mels);
    dr.get("f_min", c.dsp.f_min);
    dr.get("f_max", c.dsp.f_max);
    dr.get("floor_db", c.dsp.floor_db);
    dr.finish();
  }
  r.get("augmentation_family", c.augmentation_family);
  if (const json* a = r.child("augmentation")) {
    require(a->is_array(), "config $.augmentation must be an array");
    c.augmentation.clear();
    for (const auto& s : *a) c.augmentation.push_back(augment::spec_from_json(s));
    if (!j.contains("augmentation_family")) c.augmentation_family = "custom";
    require(c.augmentation_family == "custom", "config $.augmentation lists specs, so augmentation_family must be custom");
  }
  if (const json* e = r.child("encoder")) {
    ObjectReader er(*e, "$.encoder");
    er.get("type", c.encoder.type);
    if (const json* cf = er.child("conformer")) {
      ObjectReader cr(*cf, "$.encoder.conformer");
      auto& ec = c.encoder.conformer;
      cr.get("n_blocks", ec.n_blocks);
      cr.get("model_dim", ec.model_dim);
      cr.get("n_heads", ec.n_heads);
      cr.get("conv_kernel", ec.conv_kernel);
      cr.get("ffn_dim", ec.ffn_dim);
      cr.get("flatten_dim", ec.flatten_dim);
      cr.finish();
    }
    if (const json* bf = er.child("baseline")) {
      ObjectReader br(*bf, "$.encoder.baseline");
      br.get("stem_channels", c.encoder.baseline.stem_channels);
      br.get("stage_channels", c.encoder.baseline.stage_channels);
      br.finish();
    }
    std::size_t emb = c.encoder.embedding_dim();
    er.get("embedding_dim", emb);
    c.encoder.set_embedding_dim(emb);
    er.finish();
  }
  if (const json* x = r.child("expander")) {
    ObjectReader xr(*x, "$.expander");
    xr.get("hidden_dim", c.expander.hidden_dim);
    xr.get("output_dim", c.expander.output_dim);
    std::string act = config_detail::activation_name(c.expander.activation);
    xr.get("activation", act);
    c.expander.activation = config_detail::activation_from(act);
    xr.finish();
  }
  if (const json* l = r.child("loss")) {
    ObjectReader lr(*l, "$.loss");
    lr.get("type", c.loss.type);
    if (const json* w = lr.child("weights")) {
      ObjectReader wr(*w, "$.loss.weights");
      wr.get("lambda", c.loss.weights.lambda);
      wr.get("mu", c.loss.weights.mu);
      wr.get("nu", c.loss.weights.nu);
      wr.get("gamma", c.loss.weights.gamma);
      wr.get("epsilon", c.loss.weights.epsilon);
      wr.get("hinge", c.loss.weights.hinge);
      wr.finish();
    }
    lr.get("temperature", c.loss.temperature);
    lr.get("supcon_normalize", c.loss.supcon_normalize);
    lr.finish();
  }
  if (const json* o = r.child("optimizer")) {
    ObjectReader orr(*o, "$.optimizer");
    orr.get("type", c.optimizer.type);
    if (const json* l = orr.child("lars")) {
      ObjectReader lr(*l, "$.optimizer.lars");
      auto& lc = c.optimizer.lars;
      lr.get("base_lr", lc.base_lr);
      lr.get("trust_coefficient", lc.trust_coefficient);
      lr.get("momentum", lc.momentum);
      lr.get("weight_decay", lc.weight_decay);
      lr.get("exempt_bias_and_norm", lc.exempt_bias_and_norm);
      lr.get("exempt_patterns", lc.exempt_patterns);
      lr.finish();
    }
    if (const json* a = orr.child("adam")) {
      ObjectReader ar(*a, "$.optimizer.adam");
      ar.get("lr", c.optimizer.adam.lr);
      ar.get("beta1", c.optimizer.adam.beta1);
      ar.get("beta2", c.optimizer.adam.beta2);
      ar.get("eps", c.optimizer.adam.eps);
      ar.finish();
    }
    orr.get("plateau", c.optimizer.plateau);
    if (const json* p = orr.child("plateau_config")) {
      ObjectReader pr(*p, "$.optimizer.plateau_config");
      pr.get("factor", c.optimizer.plateau_config.factor);
      pr.get("patience", c.optimizer.plateau_config.patience);
      pr.get("min_relative_improvement", c.optimizer.plateau_config.min_relative_improvement);
      pr.finish();
    }
    orr.finish();
  }
  r.get("batch_size", c.batch_size);
  r.get("epochs", c.epochs);
  r.get("max_steps_per_epoch", c.max_steps_per_epoch);
  r.get("input_offset_db", c.input_offset_db);
  r.get("input_scale_db", c.input_scale_db);
  if (const json* s = r.child("split")) {
    ObjectReader sr(*s, "$.split");
    sr.get("mode", c.split.mode);
    sr.get("cutoff", c.split.cutoff);
    sr.get("test_fraction", c.split.test_fraction);
    sr.get("seed", c.split.seed);
    sr.get("keep_fraction", c.split.keep_fraction);
    sr.get("stratify", c.split.stratify);
    sr.finish();
  }
  if (const json* p = r.child("probe")) {
    ObjectReader pr(*p, "$.probe");
    if (const json* f = pr.child("fit")) {
      ObjectReader fr(*f, "$.probe.fit");
      fr.get("l2", c.probe.fit.l2);
      fr.get("tolerance", c.probe.fit.tolerance);
      fr.get("max_iterations", c.probe.fit.max_iterations);
      fr.finish();
    }
    pr.get("features", c.probe.features);
    pr.finish();
  }
  if (const json* s = r.child("sweep")) {
    ObjectReader sr(*s, "$.sweep");
    sr.get("loss_weights", c.sweep.loss_weights);
    sr.get("embedding_size", c.sweep.embedding_size);
    sr.get("label_fraction", c.sweep.label_fraction);
    sr.get("augmentation_family", c.sweep.augmentation_family);
    sr.finish();
  }
  if (const json* d = r.child("data")) {
    ObjectReader dr(*d, "$.data");
    dr.get("manifest", c.data.manifest);
    if (const json* s = dr.child("synthetic")) c.data.synthetic = synthetic_from_json(*s, "$.data.synthetic");
    dr.finish();
  }
  r.finish();
  c.finalize();
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  require<IoError>(in.good(), "cannot open config: ", path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw InvalidArgument(uwssl::detail::concat("config ", path.string(), " is not valid JSON: ", e.what()));
  }
  return config_from_json(j);
}

}  // namespace uwssl::harness
