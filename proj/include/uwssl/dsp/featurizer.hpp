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

#pragma once

#include "uwssl/audio/window.hpp"
#include "uwssl/dsp/mel.hpp"
#include "uwssl/dsp/spectrogram.hpp"

namespace uwssl::dsp {

struct DspConfig {
  int sample_rate = 16000;
  double window_s = 2.0;
  int n_fft = 1024;
  int hop = 256;
  int n_mels = 128;
  double f_min = 0.0;
  double f_max = 8000.0;
  double floor_db = -80.0;

  std::size_t window_samples() const { return audio::window_length(sample_rate, window_s); }
  int frames_per_window() const {
    return static_cast<int>(stft_frame_count(window_samples(), static_cast<std::size_t>(n_fft),
                                             static_cast<std::size_t>(hop)));
  }
};

/// Window -> log-mel spectrogram with a shared immutable filterbank.
class Featurizer {
 public:
  explicit Featurizer(DspConfig config)
      : config_(config),
        filterbank_(build_filterbank(config.n_mels, config.n_fft, config.sample_rate, config.f_min, config.f_max)) {}

  MelSpectrogram operator()(const audio::AudioClip& clip) const {
    return mel_spectrogram(clip, filterbank_, config_.n_fft, config_.hop, config_.floor_db);
  }

  const DspConfig& config() const { return config_; }
  const MelFilterbank& filterbank() const { return filterbank_; }

 private:
  DspConfig config_;
  MelFilterbank filterbank_;
};

}  // namespace uwssl::dsp
