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

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "uwssl/core/time.hpp"

namespace uwssl::audio {

/// Mono audio with provenance. Amplitudes are full-scale normalized, so a
/// valid clip lies in [-1, 1].
struct AudioClip {
  std::vector<double> samples;
  int sample_rate = 16000;
  std::string recording_id;
  double offset_s = 0.0;                 // seconds from recording start
  std::optional<Timestamp> timestamp;    // UTC start of the recording

  double duration_s() const {
    return static_cast<double>(samples.size()) / static_cast<double>(sample_rate);
  }
  std::size_t size() const { return samples.size(); }
};

// Same provenance, new samples.
inline AudioClip with_samples(const AudioClip& like, std::vector<double> samples) {
  AudioClip out;
  out.samples = std::move(samples);
  out.sample_rate = like.sample_rate;
  out.recording_id = like.recording_id;
  out.offset_s = like.offset_s;
  out.timestamp = like.timestamp;
  return out;
}

inline double mean_power(const std::vector<double>& x) {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return acc / static_cast<double>(x.size());
}

inline double rms(const std::vector<double>& x) { return std::sqrt(mean_power(x)); }

}  // namespace uwssl::audio
