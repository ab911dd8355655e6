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
#include <vector>

#include "uwssl/audio/clip.hpp"
#include "uwssl/core/error.hpp"

namespace uwssl::audio {

inline std::size_t window_length(int sample_rate, double window_s) {
  return static_cast<std::size_t>(std::llround(window_s * sample_rate));
}

/// Cuts consecutive non-overlapping windows of window_s seconds. The partial
/// remainder is dropped; a clip shorter than one window yields no windows.
inline std::vector<AudioClip> window_fixed(const AudioClip& clip, double window_s) {
  require(window_s > 0.0, "window_s must be positive, got ", window_s);
  const std::size_t len = window_length(clip.sample_rate, window_s);
  require(len > 0, "window shorter than one sample");
  std::vector<AudioClip> out;
  const std::size_t count = clip.samples.size() / len;
  out.reserve(count);
  for (std::size_t w = 0; w < count; ++w) {
    auto first = clip.samples.begin() + static_cast<std::ptrdiff_t>(w * len);
    AudioClip win = with_samples(clip, std::vector<double>(first, first + static_cast<std::ptrdiff_t>(len)));
    win.offset_s = clip.offset_s + static_cast<double>(w * len) / clip.sample_rate;
    out.push_back(std::move(win));
  }
  return out;
}

}  // namespace uwssl::audio
