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


// Train/test partitions of a manifest at recording granularity.

#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "uwssl/audio/manifest.hpp"
#include "uwssl/core/rng.hpp"

namespace uwssl::probe {

/// Train on recordings strictly before the cutoff, test on the rest.
struct TimeWise {
  Timestamp cutoff;
};

/// Whole recordings drawn at random for the test side.
struct RandomByRecording {
  double test_fraction = 0.2;
  std::uint64_t seed = 0;
};

using BaseSplit = std::variant<TimeWise, RandomByRecording>;

/// A base split whose train side is subsampled by recording. With
/// `stratify`, the fraction is applied within each label so every class
/// keeps at least one recording.
struct ReducedLabels {
  BaseSplit base;
  double keep_fraction = 1.0;
  std::uint64_t seed = 0;
  bool stratify = false;
};

using SplitSpec = std::variant<TimeWise, RandomByRecording, ReducedLabels>;

struct Split {
  std::vector<std::string> train;  // recording ids, manifest order
  std::vector<std::string> test;
};

namespace detail {

// Round half away from zero, clamped to [lo, hi].
inline std::size_t rounded_count(double fraction, std::size_t n, std::size_t lo, std::size_t hi) {
  const auto k = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  return std::clamp(k, lo, hi);
}

// Fisher-Yates on indices with a seeded stream; first k are chosen.
inline std::vector<std::size_t> choose(std::size_t n, std::size_t k, Rng& rng) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = 0; i < k; ++i) std::swap(idx[i], idx[i + rng.index(n - i)]);
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

inline void require_nonempty(const Split& s, const char* mode) {
  require<InvalidArgument>(!s.train.empty(), mode, " split has an empty train side");
  require<InvalidArgument>(!s.test.empty(), mode, " split has an empty test side");
}

inline Split split_base(const audio::Manifest& m, const TimeWise& tw) {
  Split s;
  for (const auto& e : m.entries) {
    require<InvalidArgument>(e.timestamp.has_value(), "time-wise split needs a timestamp on recording ",
                             e.recording_id);
    (*e.timestamp < tw.cutoff ? s.train : s.test).push_back(e.recording_id);
  }
  require_nonempty(s, "time-wise");
  return s;
}

inline Split split_base(const audio::Manifest& m, const RandomByRecording& r) {
  require<InvalidArgument>(r.test_fraction > 0.0 && r.test_fraction < 1.0, "test_fraction must lie in (0, 1), got ",
                           r.test_fraction);
  const std::size_t n = m.entries.size();
  require<InvalidArgument>(n >= 2, "random split needs at least 2 recordings");
  Rng rng(r.seed, "split-random");
  const auto chosen = choose(n, rounded_count(r.test_fraction, n, 1, n - 1), rng);
  std::vector<bool> is_test(n, false);
  for (auto i : chosen) is_test[i] = true;
  Split s;
  for (std::size_t i = 0; i < n; ++i) (is_test[i] ? s.test : s.train).push_back(m.entries[i].recording_id);
  return s;
}

}  // namespace detail

inline Split make_split(const audio::Manifest& m, const SplitSpec& spec) {
  if (const auto* tw = std::get_if<TimeWise>(&spec)) return detail::split_base(m, *tw);
  if (const auto* r = std::get_if<RandomByRecording>(&spec)) return detail::split_base(m, *r);
  const auto& red = std::get<ReducedLabels>(spec);
  require<InvalidArgument>(red.keep_fraction > 0.0 && red.keep_fraction <= 1.0, "keep_fraction must lie in (0, 1], got ",
                           red.keep_fraction);
  Split s = std::visit([&m](const auto& b) { return detail::split_base(m, b); }, red.base);
  Rng rng(red.seed, "split-reduced");
  std::vector<std::string> kept;
  if (red.stratify) {
    std::map<std::string, std::vector<std::size_t>> by_label;
    for (std::size_t i = 0; i < s.train.size(); ++i) {
      const auto& e = m.find(s.train[i]);
      by_label[e.label.value_or("")].push_back(i);
    }
    std::vector<std::size_t> keep_idx;
    for (const auto& [label, idx] : by_label) {
      for (auto j : detail::choose(idx.size(), detail::rounded_count(red.keep_fraction, idx.size(), 1, idx.size()), rng))
        keep_idx.push_back(idx[j]);
    }
    std::sort(keep_idx.begin(), keep_idx.end());
    for (auto i : keep_idx) kept.push_back(s.train[i]);
  } else {
    const std::size_t n = s.train.size();
    for (auto i : detail::choose(n, detail::rounded_count(red.keep_fraction, n, 1, n), rng)) kept.push_back(s.train[i]);
  }
  s.train = std::move(kept);
  return s;
}

/// Checks the partition invariants; throws on violation.
inline void check_split(const audio::Manifest& m, const SplitSpec& spec, const Split& s) {
  std::set<std::string> train(s.train.begin(), s.train.end());
  for (const auto& id : s.test) {
    require(train.count(id) == 0, "recording ", id, " appears on both sides of the split");
  }
  const TimeWise* tw = std::get_if<TimeWise>(&spec);
  if (const auto* red = std::get_if<ReducedLabels>(&spec)) tw = std::get_if<TimeWise>(&red->base);
  if (tw) {
    for (const auto& id : s.train) require(*m.find(id).timestamp < tw->cutoff, "train recording ", id, " is not before the cutoff");
    for (const auto& id : s.test) require(!(*m.find(id).timestamp < tw->cutoff), "test recording ", id, " is before the cutoff");
  }
}

}  // namespace uwssl::probe
