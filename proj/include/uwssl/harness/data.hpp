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


// Corpus loading, window indexing and batched log-mel features.

#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "uwssl/audio/manifest.hpp"
#include "uwssl/audio/resample.hpp"
#include "uwssl/audio/wav.hpp"
#include "uwssl/augment/family.hpp"
#include "uwssl/dsp/featurizer.hpp"
#include "uwssl/nn/tensor.hpp"

namespace uwssl::harness {

struct Recording {
  audio::ManifestEntry entry;
  audio::AudioClip clip;
  int label = -1;  // index into Corpus::class_names, -1 when unlabeled
};

/// One fixed-length window of a recording.
struct WindowRef {
  std::size_t recording = 0;
  std::size_t start = 0;  // sample offset
};

class Corpus {
 public:
  Corpus(const audio::Manifest& manifest, const dsp::DspConfig& dsp) : dsp_(dsp) {
    std::map<std::string, int> labels;
    for (const auto& e : manifest.entries) {
      if (e.label) labels.emplace(*e.label, 0);
    }
    for (auto& [name, idx] : labels) {
      idx = static_cast<int>(class_names.size());
      class_names.push_back(name);
    }
    for (const auto& e : manifest.entries) {
      Recording r;
      r.entry = e;
      r.clip = audio::resample(audio::load_wav(manifest.resolve(e)), dsp.sample_rate);
      r.clip.recording_id = e.recording_id;
      r.clip.timestamp = e.timestamp;
      r.label = e.label ? labels.at(*e.label) : -1;
      recordings.push_back(std::move(r));
    }
  }

  /// Consecutive non-overlapping windows of the listed recordings, in
  /// manifest order. The partial tail of each recording is dropped.
  std::vector<WindowRef> windows(const std::vector<std::string>& ids) const {
    std::vector<WindowRef> out;
    const std::size_t len = dsp_.window_samples();
    for (std::size_t r = 0; r < recordings.size(); ++r) {
      if (std::find(ids.begin(), ids.end(), recordings[r].entry.recording_id) == ids.end()) continue;
      const std::size_t n = recordings[r].clip.size();
      for (std::size_t s = 0; s + len <= n; s += len) out.push_back({r, s});
    }
    return out;
  }

  audio::AudioClip window(const WindowRef& w) const {
    const auto& src = recordings[w.recording].clip;
    const std::size_t len = dsp_.window_samples();
    auto first = src.samples.begin() + static_cast<std::ptrdiff_t>(w.start);
    audio::AudioClip c = audio::with_samples(src, std::vector<double>(first, first + static_cast<std::ptrdiff_t>(len)));
    c.offset_s = static_cast<double>(w.start) / src.sample_rate;
    return c;
  }

  augment::RecordingContext context(const WindowRef& w) const {
    const auto& src = recordings[w.recording].clip;
    return {src.samples, src.sample_rate, static_cast<double>(w.start) / src.sample_rate};
  }

  int label(const WindowRef& w) const { return recordings[w.recording].label; }
  const dsp::DspConfig& dsp() const { return dsp_; }

  std::vector<Recording> recordings;
  std::vector<std::string> class_names;

 private:
  dsp::DspConfig dsp_;
};

/// Stacks log-mel features of the clips into [B, T, n_mels], mapping each
/// dB value v to (v + offset_db) / scale_db.
inline nn::Tensor feature_batch(const dsp::Featurizer& fz, const std::vector<audio::AudioClip>& clips,
                                double offset_db, double scale_db) {
  require(!clips.empty(), "feature_batch needs at least one clip");
  const auto t_frames = static_cast<std::size_t>(fz.config().frames_per_window());
  const auto m_mels = static_cast<std::size_t>(fz.config().n_mels);
  nn::Buffer v(clips.size() * t_frames * m_mels);
  for (std::size_t b = 0; b < clips.size(); ++b) {
    const auto spec = fz(clips[b]);
    require<ShapeError>(static_cast<std::size_t>(spec.n_frames) == t_frames, "window ", clips[b].recording_id, "@",
                        clips[b].offset_s, " gives ", spec.n_frames, " frames, expected ", t_frames);
    for (std::size_t t = 0; t < t_frames; ++t) {
      for (std::size_t m = 0; m < m_mels; ++m) {
        v[(b * t_frames + t) * m_mels + m] =
            (spec.at(static_cast<int>(m), static_cast<int>(t)) + offset_db) / scale_db;
      }
    }
  }
  return nn::Tensor({clips.size(), t_frames, m_mels}, std::move(v));
}

}  // namespace uwssl::harness
