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


// Embeds every 2 s window of a WAV file with a pretrained encoder and prints
// one CSV row per window.
//
//   embed_wav <checkpoint.bin> <input.wav>

#include <cstdio>
#include <exception>

#include "uwssl/harness/commands.hpp"

int main(int argc, char** argv) {
  namespace h = uwssl::harness;
  if (argc != 3) {
    std::fprintf(stderr, "usage: %s <checkpoint.bin> <input.wav>\n", argv[0]);
    return 2;
  }
  try {
    const h::ExperimentConfig cfg = h::config_from_json(uwssl::nn::read_sidecar(argv[1]));
    h::SslModel model(cfg);
    uwssl::nn::load_module(argv[1], model);
    model.set_training(false);

    const auto clip = uwssl::audio::resample(uwssl::audio::load_wav(argv[2]), cfg.dsp.sample_rate);
    const std::size_t len = cfg.dsp.window_samples();
    const uwssl::dsp::Featurizer fz(cfg.dsp);
    uwssl::nn::NoGrad no_grad;
    for (std::size_t start = 0; start + len <= clip.size(); start += len) {
      auto window = uwssl::audio::with_samples(
          clip, std::vector<double>(clip.samples.begin() + static_cast<std::ptrdiff_t>(start),
                                    clip.samples.begin() + static_cast<std::ptrdiff_t>(start + len)));
      const auto x = h::feature_batch(fz, {window}, cfg.input_offset_db, cfg.input_scale_db);
      const auto z = model.embed(x);
      std::printf("%.3f", static_cast<double>(start) / cfg.dsp.sample_rate);
      for (std::size_t j = 0; j < z.size(); ++j) std::printf(",%.6g", z[j]);
      std::printf("\n");
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
