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


// Command-line front end: synth, pretrain, probe, sweep, report.

#include <cstdio>
#include <iostream>
#include <string>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include <CLI11.hpp>

#include "uwssl/harness/commands.hpp"

namespace {

using uwssl::harness::ExperimentConfig;

ExperimentConfig load(const std::string& path, const std::int64_t seed) {
  ExperimentConfig cfg = path.empty() ? ExperimentConfig{} : uwssl::harness::load_config(path);
  if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
  cfg.finalize();
  return cfg;
}

void print_row(const uwssl::harness::LogRow& r) {
  if (r.kind == "epoch") {
    std::fprintf(stderr, "epoch %zu  loss %.6f  lr %.3g\n", r.epoch, r.total, r.lr);
  }
}

}  // namespace

int main(int argc, char** argv) {
#if defined(__GLIBC__)
  // Keep freed activation buffers mapped between steps.
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
  CLI::App app{"Self-supervised pretraining and linear probing for underwater audio"};
  app.require_subcommand(1);

  std::string config, out, checkpoint, axis, run_dir;
  std::int64_t seed = -1;
  bool untrained = false;

  auto* synth = app.add_subcommand("synth", "Write the synthetic corpus and its manifest");
  synth->add_option("--config", config, "Experiment config (JSON)")->check(CLI::ExistingFile);
  synth->add_option("--seed", seed, "Override the config seed");
  synth->add_option("--out", out, "Output directory")->required();

  auto* pre = app.add_subcommand("pretrain", "Pretrain an encoder and save a checkpoint");
  pre->add_option("--config", config, "Experiment config (JSON)")->check(CLI::ExistingFile);
  pre->add_option("--seed", seed, "Override the config seed");
  pre->add_option("--out", out, "Output directory")->required();

  auto* prb = app.add_subcommand("probe", "Fit and evaluate a linear probe on frozen embeddings");
  prb->add_option("--checkpoint", checkpoint, "Checkpoint written by pretrain");
  prb->add_flag("--untrained", untrained, "Probe a freshly initialized encoder from --config");
  prb->add_option("--config", config, "Experiment config, with --untrained")->check(CLI::ExistingFile);
  prb->add_option("--seed", seed, "Override the config seed, with --untrained");
  prb->add_option("--out", out, "Output directory")->required();

  auto* swp = app.add_subcommand("sweep", "Pretrain and probe once per value of one axis");
  swp->add_option("--config", config, "Experiment config (JSON)")->check(CLI::ExistingFile);
  swp->add_option("--seed", seed, "Override the config seed");
  swp->add_option("--axis", axis, "loss_weights, embedding_size, label_fraction or augmentation_family")->required();
  swp->add_option("--out", out, "Output directory")->required();

  auto* rep = app.add_subcommand("report", "Write plot-data CSVs for a run directory");
  rep->add_option("--run", run_dir, "Run directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    namespace h = uwssl::harness;
    if (*synth) {
      std::cout << h::synth_command(load(config, seed), out).dump(2) << "\n";
    } else if (*pre) {
      auto o = h::pretrain_command(load(config, seed), out, print_row);
      std::cout << o.summary.dump(2) << "\n";
    } else if (*prb) {
      if (untrained) {
        if (!checkpoint.empty()) throw uwssl::InvalidArgument("--untrained and --checkpoint are exclusive");
        const ExperimentConfig cfg = load(config, seed);
        std::cout << h::probe_command({}, out, true, &cfg).dump(2) << "\n";
      } else {
        if (checkpoint.empty()) throw uwssl::InvalidArgument("probe needs --checkpoint or --untrained");
        std::cout << h::probe_command(checkpoint, out).dump(2) << "\n";
      }
    } else if (*swp) {
      std::cout << h::kSweepHeader << "\n";
      for (const auto& row : h::sweep_command(load(config, seed), axis, out, print_row)) std::cout << row << "\n";
    } else if (*rep) {
      for (const auto& p : h::report_command(run_dir)) std::cout << p.string() << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
