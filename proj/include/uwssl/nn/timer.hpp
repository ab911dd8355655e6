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

#include <algorithm>
#include <chrono>
#include <limits>
#include <vector>

#include "uwssl/core/error.hpp"

namespace uwssl::nn {

struct TimingResult {
  double min_ms_per_sample = 0.0;
  std::vector<double> pass_ms_per_sample;  // one entry per pass
  std::vector<double> running_min_ms;      // min over the first k passes
};

/// Runs `pass` (one full sweep over n_samples inputs) `passes` times and
/// reports the fastest per-sample time.
template <typename Pass>
TimingResult inference_timer(Pass&& pass, std::size_t n_samples, int passes = 10) {
  require(n_samples >= 1 && passes >= 1, "inference_timer needs at least one sample and one pass");
  using clock = std::chrono::steady_clock;
  TimingResult r;
  double best = std::numeric_limits<double>::infinity();
  for (int p = 0; p < passes; ++p) {
    const auto t0 = clock::now();
    pass();
    const auto t1 = clock::now();
    const double ms = std::chrono::duration<double, std::milli>(t1 - t0).count() / static_cast<double>(n_samples);
    r.pass_ms_per_sample.push_back(ms);
    best = std::min(best, ms);
    r.running_min_ms.push_back(best);
  }
  r.min_ms_per_sample = best;
  return r;
}

}  // namespace uwssl::nn
