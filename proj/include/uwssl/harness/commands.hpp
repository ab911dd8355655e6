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


// Subcommand implementations shared by the CLI and the tests.

#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "uwssl/harness/evaluation.hpp"
#include "uwssl/harness/synthetic.hpp"
#include "uwssl/harness/training.hpp"

namespace uwssl::harness {

namespace fs = std::filesystem;

inline constexpr const char* kCheckpointFile = "checkpoint.bin";
inline constexpr const char* kLogFile = "train_log.csv";
inline constexpr const char* kSummaryFile = "summary.json";
inline constexpr const char* kMetricsFile = "metrics.json";
inline constexpr const char* kSweepFile = "sweep.csv";

inline void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::trunc);
  require<IoError>(out.good(), "cannot write ", path.string());
  out << j.dump(2) << "\n";
  require<IoError>(out.good(), "failed writing ", path.string());
}

inline json read_json(const fs::path& path) {
  std::ifstream in(path);
  require<IoError>(in.good(), "cannot open ", path.string());
  return json::parse(in);
}

inline void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  require<IoError>(!ec && fs::is_directory(dir), "cannot create directory ", dir.string());
}

/// The configured manifest, or the synthetic corpus generated under
/// <out>/data.
inline audio::Manifest prepare_manifest(const ExperimentConfig& cfg, const fs::path& out) {
  if (!cfg.data.manifest.empty()) return audio::read_manifest(cfg.data.manifest);
  return generate_synthetic_dataset(cfg.data.synthetic, cfg.seed, out / "data", cfg.dsp.sample_rate).manifest;
}

/// The split used for pretraining: the configured one without label
/// reduction, since unlabeled data does not shrink with the label budget.
inline probe::SplitSpec pretrain_split_spec(const ExperimentConfig& cfg) {
  ExperimentConfig full = cfg;
  full.split.keep_fraction = 1.0;
  return full.split_spec();
}

inline probe::Split checked_split(const audio::Manifest& m, const probe::SplitSpec& spec) {
  probe::Split s = probe::make_split(m, spec);
  probe::check_split(m, spec, s);
  return s;
}

inline json synth_command(const ExperimentConfig& cfg, const fs::path& out) {
  ensure_dir(out);
  auto ds = generate_synthetic_dataset(cfg.data.synthetic, cfg.seed, out, cfg.dsp.sample_rate);
  return {{"manifest", ds.manifest_path.string()}, {"recordings", ds.manifest.entries.size()}};
}

struct PretrainOutcome {
  PretrainResult result;
  json summary;
};

/// Trains on the train split of `corpus`, then saves the checkpoint, log and
/// a summary with embedding statistics over the training windows.
inline PretrainOutcome pretrain_on(const ExperimentConfig& cfg, const audio::Manifest& manifest, const Corpus& corpus,
                                   SslModel& model, const fs::path& out, const ProgressFn& progress = {}) {
  ensure_dir(out);
  const probe::Split split = checked_split(manifest, pretrain_split_spec(cfg));
  PretrainOutcome o;
  o.result = pretrain(cfg, corpus, split.train, model, out / kLogFile, progress);
  json config_json = to_json(cfg);
  nn::save_module(out / kCheckpointFile, model, &config_json);
  const auto windows = corpus.windows(split.train);
  const auto enc = embedding_stats(extract_features(cfg, model, corpus, windows, FeatureSource::kEncoder));
  const auto exp = embedding_stats(extract_features(cfg, model, corpus, windows, FeatureSource::kExpander));
  const auto exp_views =
      embedding_stats(extract_features(cfg, model, corpus, windows, FeatureSource::kExpander, 64, true));
  const LogRow& last = o.result.log.back();
  o.summary = {{"steps", o.result.steps},
               {"final_lr", o.result.final_lr},
               {"final_epoch_total", last.total},
               {"parameter_count", nn::parameter_count(*model.encoder)},
               {"expander_parameter_count", nn::parameter_count(*model.expander)},
               {"train_recordings", split.train.size()},
               {"train_windows", windows.size()},
               {"encoder_stats", to_json(enc)},
               {"expander_stats", to_json(exp)},
               {"expander_view_stats", to_json(exp_views)}};
  write_json(out / kSummaryFile, o.summary);
  return o;
}

inline PretrainOutcome pretrain_command(const ExperimentConfig& cfg, const fs::path& out,
                                        const ProgressFn& progress = {}) {
  ensure_dir(out);
  const auto manifest = prepare_manifest(cfg, out);
  const Corpus corpus(manifest, cfg.dsp);
  SslModel model(cfg);
  return pretrain_on(cfg, manifest, corpus, model, out, progress);
}

inline json metrics_json(const ProbeRun& run, const Corpus& corpus, bool untrained) {
  json j = probe::to_json(run.metrics, corpus.class_names);
  j["train_windows"] = run.train_windows;
  j["test_windows"] = run.test_windows;
  j["train_recordings"] = run.split.train.size();
  j["test_recordings"] = run.split.test.size();
  j["feature_dim"] = run.feature_dim;
  j["probe_iterations"] = run.model.iterations;
  j["probe_converged"] = run.model.converged;
  j["untrained"] = untrained;
  return j;
}

inline json probe_on(const ExperimentConfig& cfg, const audio::Manifest& manifest, const Corpus& corpus,
                     SslModel& model, const fs::path& out, bool untrained) {
  ensure_dir(out);
  const probe::Split split = checked_split(manifest, cfg.split_spec());
  const ProbeRun run = probe_model(cfg, model, corpus, split);
  json j = metrics_json(run, corpus, untrained);
  write_json(out / kMetricsFile, j);
  return j;
}

/// Probes a saved checkpoint, using the config stored beside it. With
/// `untrained`, `cfg` defines a freshly initialized model instead.
inline json probe_command(const fs::path& checkpoint, const fs::path& out, bool untrained = false,
                          const ExperimentConfig* untrained_cfg = nullptr) {
  ExperimentConfig cfg;
  if (untrained) {
    require(untrained_cfg != nullptr, "an untrained probe needs a config");
    cfg = *untrained_cfg;
  } else {
    cfg = config_from_json(nn::read_sidecar(checkpoint));
  }
  ensure_dir(out);
  const auto manifest = prepare_manifest(cfg, out);
  const Corpus corpus(manifest, cfg.dsp);
  SslModel model(cfg);
  if (!untrained) nn::load_module(checkpoint, model);
  return probe_on(cfg, manifest, corpus, model, out, untrained);
}

// ---- sweeps ----

struct SweepCell {
  std::string value;            // as written in the CSV
  std::vector<double> sort_key; // numeric ordering
  ExperimentConfig cfg;
};

inline std::string format_number(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

inline std::vector<SweepCell> sweep_cells(const ExperimentConfig& base, const std::string& axis) {
  std::vector<SweepCell> cells;
  if (axis == "loss_weights") {
    for (const auto& w : base.sweep.loss_weights) {
      SweepCell c{format_number(w[0]) + ";" + format_number(w[1]) + ";" + format_number(w[2]), {w[0], w[1], w[2]}, base};
      c.cfg.loss.weights.lambda = w[0];
      c.cfg.loss.weights.mu = w[1];
      c.cfg.loss.weights.nu = w[2];
      cells.push_back(std::move(c));
    }
  } else if (axis == "embedding_size") {
    for (auto d : base.sweep.embedding_size) {
      SweepCell c{std::to_string(d), {static_cast<double>(d)}, base};
      c.cfg.encoder.set_embedding_dim(d);
      cells.push_back(std::move(c));
    }
  } else if (axis == "label_fraction") {
    for (double f : base.sweep.label_fraction) {
      SweepCell c{format_number(f), {f}, base};
      c.cfg.split.keep_fraction = f;
      cells.push_back(std::move(c));
    }
  } else if (axis == "augmentation_family") {
    for (const auto& name : base.sweep.augmentation_family) {
      require(name == "default" || name == "expanded", "augmentation_family sweep values must be default or expanded");
      SweepCell c{name, {name == "default" ? 0.0 : 1.0}, base};
      c.cfg.augmentation_family = name;
      cells.push_back(std::move(c));
    }
  } else {
    throw InvalidArgument("unknown sweep axis '" + axis +
                          "'; expected loss_weights, embedding_size, label_fraction or augmentation_family");
  }
  require(!cells.empty(), "sweep axis ", axis, " has no values");
  for (auto& c : cells) c.cfg.finalize();
  std::stable_sort(cells.begin(), cells.end(), [](const SweepCell& a, const SweepCell& b) { return a.sort_key < b.sort_key; });
  return cells;
}

inline constexpr const char* kSweepHeader =
    "axis,value,accuracy,weighted_f1,inv,var,cov,total,parameter_count,train_windows,test_windows,expander_mean_std,"
    "expander_mean_abs_corr";

/// Runs pretrain + probe per axis value with the shared base seed and
/// writes one CSV row per value, sorted by value. Label fractions share a
/// single pretraining run, since pretraining does not see labels.
inline std::vector<std::string> sweep_command(const ExperimentConfig& base, const std::string& axis, const fs::path& out,
                                              const ProgressFn& progress = {}) {
  ensure_dir(out);
  const auto cells = sweep_cells(base, axis);
  const auto manifest = prepare_manifest(base, out);
  const Corpus corpus(manifest, base.dsp);
  std::vector<std::string> rows;
  std::unique_ptr<SslModel> shared;
  PretrainOutcome shared_outcome;
  for (const auto& cell : cells) {
    const fs::path dir = out / (axis + "_" + cell.value);
    PretrainOutcome po;
    SslModel* model = nullptr;
    std::unique_ptr<SslModel> own;
    if (axis == "label_fraction") {
      if (!shared) {
        shared = std::make_unique<SslModel>(cell.cfg);
        shared_outcome = pretrain_on(cell.cfg, manifest, corpus, *shared, out / "pretrain", progress);
      }
      model = shared.get();
      po = shared_outcome;
    } else {
      own = std::make_unique<SslModel>(cell.cfg);
      po = pretrain_on(cell.cfg, manifest, corpus, *own, dir, progress);
      model = own.get();
    }
    const json m = probe_on(cell.cfg, manifest, corpus, *model, dir, false);
    const LogRow& last = po.result.log.back();
    std::string row = axis + "," + cell.value + "," + format_double(m["accuracy"].get<double>()) + "," +
                      format_double(m["weighted_f1"].get<double>()) + ",";
    if (last.has_components) {
      row += format_double(last.inv) + "," + format_double(last.var_a + last.var_b) + "," +
             format_double(last.cov_a + last.cov_b) + ",";
    } else {
      row += ",,,";
    }
    row += format_double(last.total) + "," + std::to_string(po.summary["parameter_count"].get<std::size_t>()) + "," +
           std::to_string(m["train_windows"].get<std::size_t>()) + "," +
           std::to_string(m["test_windows"].get<std::size_t>()) + "," +
           format_double(po.summary["expander_stats"]["mean_std"].get<double>()) + "," +
           format_double(po.summary["expander_stats"]["mean_abs_offdiag_corr"].get<double>());
    rows.push_back(row);
  }
  std::ofstream csv(out / kSweepFile, std::ios::trunc);
  require<IoError>(csv.good(), "cannot write ", (out / kSweepFile).string());
  csv << kSweepHeader << "\n";
  for (const auto& r : rows) csv << r << "\n";
  return rows;
}

// ---- report ----

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(line);
  while (std::getline(is, cur, ',')) out.push_back(cur);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline double parse_or_zero(const std::string& s) { return s.empty() ? 0.0 : std::stod(s); }

/// Writes tidy plot-data CSVs under <run_dir>/report. Deterministic: equal
/// inputs give byte-identical outputs.
inline std::vector<fs::path> report_command(const fs::path& run_dir) {
  require<IoError>(fs::is_directory(run_dir), "run directory not found: ", run_dir.string());
  const fs::path rep = run_dir / "report";
  ensure_dir(rep);
  std::vector<fs::path> written;
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(run_dir)) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), run_dir);
    if (*rel.begin() == "report" || *rel.begin() == "data") continue;
    files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());

  auto tag_of = [&run_dir](const fs::path& p) {
    std::string t = fs::relative(p.parent_path(), run_dir).generic_string();
    if (t == ".") t = "run";
    std::replace(t.begin(), t.end(), '/', '_');
    return t;
  };

  for (const auto& f : files) {
    if (f.filename() == kLogFile) {
      std::ifstream in(f);
      std::string line;
      std::getline(in, line);
      require(line == kLogHeader, "unexpected training log header in ", f.string());
      const std::string tag = tag_of(f);
      std::ofstream loss(rep / ("loss_" + tag + ".csv"), std::ios::trunc);
      std::ofstream epochs(rep / ("epochs_" + tag + ".csv"), std::ios::trunc);
      loss << "step,epoch,inv,var,cov,total\n";
      epochs << "epoch,inv,var,cov,total,lr\n";
      while (std::getline(in, line)) {
        const auto c = split_csv_line(line);
        require(c.size() == 10, "malformed training log row in ", f.string(), ": ", line);
        const bool comps = !c[3].empty();
        const std::string var = comps ? format_double(parse_or_zero(c[4]) + parse_or_zero(c[5])) : "";
        const std::string cov = comps ? format_double(parse_or_zero(c[6]) + parse_or_zero(c[7])) : "";
        if (c[0] == "step") {
          loss << c[1] << "," << c[2] << "," << c[3] << "," << var << "," << cov << "," << c[8] << "\n";
        } else {
          epochs << c[2] << "," << c[3] << "," << var << "," << cov << "," << c[8] << "," << c[9] << "\n";
        }
      }
      written.push_back(rep / ("loss_" + tag + ".csv"));
      written.push_back(rep / ("epochs_" + tag + ".csv"));
    } else if (f.filename() == kMetricsFile) {
      const json m = read_json(f);
      const std::string tag = tag_of(f);
      std::ofstream cm(rep / ("confusion_" + tag + ".csv"), std::ios::trunc);
      const auto& per = m.at("per_class");
      cm << "truth";
      for (const auto& p : per) cm << "," << p.at("class").get<std::string>();
      cm << "\n";
      const auto& conf = m.at("confusion");
      for (std::size_t t = 0; t < conf.size(); ++t) {
        cm << per[t].at("class").get<std::string>();
        for (const auto& v : conf[t]) cm << "," << v.get<std::size_t>();
        cm << "\n";
      }
      written.push_back(rep / ("confusion_" + tag + ".csv"));
    } else if (f.filename() == kSweepFile) {
      std::ifstream in(f);
      std::string header, line;
      std::getline(in, header);
      std::vector<std::pair<std::vector<double>, std::string>> rows;
      while (std::getline(in, line)) {
        const auto c = split_csv_line(line);
        std::vector<double> key;
        if (c[1] == "default" || c[1] == "expanded") {
          key.push_back(c[1] == "default" ? 0.0 : 1.0);
        } else {
          std::istringstream vs(c[1]);
          std::string part;
          while (std::getline(vs, part, ';')) key.push_back(std::stod(part));
        }
        rows.emplace_back(key, c[0] + "," + c[1] + "," + c[2] + "," + c[3]);
      }
      std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
      const std::string tag = tag_of(f);
      std::ofstream sw(rep / ("sweep_" + tag + ".csv"), std::ios::trunc);
      sw << "axis,value,accuracy,weighted_f1\n";
      for (const auto& r : rows) sw << r.second << "\n";
      written.push_back(rep / ("sweep_" + tag + ".csv"));
    }
  }
  require<IoError>(!written.empty(), "no run artifacts (", kLogFile, ", ", kMetricsFile, ", ", kSweepFile, ") under ",
                   run_dir.string());
  return written;
}

}  // namespace uwssl::harness
