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


// Desk-scale stand-in corpus: harmonic tones with per-class fundamentals in
// white noise, written as 16-bit WAV files plus a manifest.

#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <string>
#include <vector>

#include "uwssl/audio/manifest.hpp"
#include "uwssl/audio/wav.hpp"
#include "uwssl/core/rng.hpp"
#include "uwssl/harness/config.hpp"

namespace uwssl::harness {

struct SyntheticRecording {
  std::string recording_id;
  std::size_t class_index = 0;
  double fundamental_hz = 0.0;  // realized, after jitter
  double gain_db = 0.0;
};

struct SyntheticDataset {
  audio::Manifest manifest;
  std::vector<SyntheticRecording> recordings;
  std::filesystem::path manifest_path;
};

inline std::string class_label(std::size_t k) { return "class" + std::to_string(k); }

/// Samples of one recording. Pure function of (spec, seed, class, index).
inline std::vector<double> synthesize_recording(const SyntheticSpec& spec, std::uint64_t seed, std::size_t k,
                                                std::size_t r, int sample_rate, SyntheticRecording* info) {
  Rng rng(seed, "synthetic", k * 100003 + r);
  const double f0 = spec.fundamentals_hz[k] * (1.0 + rng.uniform(-spec.freq_jitter, spec.freq_jitter));
  const double gain_db = -rng.uniform(0.0, spec.amp_jitter_db);
  const auto profile = spec.profile(k);
  double amp_sum = 0.0;
  for (double a : profile) amp_sum += std::abs(a);
  const double depth = 0.3;
  const double scale = spec.signal_peak / ((1.0 + depth) * amp_sum) * std::pow(10.0, gain_db / 20.0);
  std::vector<double> phase(profile.size());
  for (auto& p : phase) p = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double am_rate = rng.uniform(0.1, 0.5), am_phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double noise_sd = std::pow(10.0, spec.noise_floor_db / 20.0);
  const auto n = static_cast<std::size_t>(std::llround(spec.duration_s * sample_rate));
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sample_rate;
    double s = 0.0;
    for (std::size_t h = 0; h < profile.size(); ++h) {
      const double f = f0 * static_cast<double>(h + 1);
      if (f >= 0.5 * sample_rate) break;
      s += profile[h] * std::sin(2.0 * std::numbers::pi * f * t + phase[h]);
    }
    const double env = 1.0 + depth * std::sin(2.0 * std::numbers::pi * am_rate * t + am_phase);
    x[i] = scale * env * s + noise_sd * rng.normal();
  }
  if (info) {
    info->class_index = k;
    info->fundamental_hz = f0;
    info->gain_db = gain_db;
  }
  return x;
}

/// Recording r of class k is stamped at slot r * K + k of an even grid over
/// [start, end), so each class spans the whole date range.
inline Timestamp synthetic_timestamp(const SyntheticSpec& spec, std::size_t k, std::size_t r) {
  const auto span = static_cast<double>((spec.end_time() - spec.start_time()).count());
  const double slots = static_cast<double>(spec.n_classes * spec.recordings_per_class);
  const double pos = (static_cast<double>(r * spec.n_classes + k) + 0.5) / slots;
  return spec.start_time() + std::chrono::seconds(static_cast<long long>(std::floor(pos * span)));
}

inline SyntheticDataset generate_synthetic_dataset(const SyntheticSpec& spec, std::uint64_t seed,
                                                   const std::filesystem::path& dir, int sample_rate = 16000) {
  spec.validate();
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  require<IoError>(!ec && std::filesystem::is_directory(dir), "cannot create dataset directory ", dir.string());
  SyntheticDataset ds;
  ds.manifest.base_dir = dir;
  nlohmann::json meta = nlohmann::json::array();
  for (std::size_t r = 0; r < spec.recordings_per_class; ++r) {
    for (std::size_t k = 0; k < spec.n_classes; ++k) {
      SyntheticRecording info;
      audio::AudioClip clip;
      clip.sample_rate = sample_rate;
      clip.samples = synthesize_recording(spec, seed, k, r, sample_rate, &info);
      info.recording_id = "c" + std::to_string(k) + "_r" + std::to_string(r);
      audio::ManifestEntry e;
      e.recording_id = info.recording_id;
      e.path = info.recording_id + ".wav";
      e.label = class_label(k);
      e.timestamp = synthetic_timestamp(spec, k, r);
      e.duration_s = clip.duration_s();
      audio::write_wav(dir / e.path, clip);
      ds.manifest.entries.push_back(e);
      ds.recordings.push_back(info);
      meta.push_back({{"recording_id", info.recording_id},
                      {"class", info.class_index},
                      {"fundamental_hz", info.fundamental_hz},
                      {"gain_db", info.gain_db}});
    }
  }
  ds.manifest_path = dir / "manifest.jsonl";
  audio::write_manifest(ds.manifest_path, ds.manifest);
  std::ofstream out(dir / "synthetic.json");
  out << meta.dump(2) << "\n";
  require<IoError>(out.good(), "cannot write ", (dir / "synthetic.json").string());
  return ds;
}

}  // namespace uwssl::harness
