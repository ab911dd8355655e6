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

// Augmentation specs, their JSON form, and positive-pair sampling.
//
// JSON form of a spec (one object per family member):
//   {"kind": "Identity"}
//   {"kind": "GaussianNoise", "snr_db": [0.3, 0.5]}
//   {"kind": "LowPass", "cutoff_hz": [100, 1000]}
//   {"kind": "MixUp", "sigma_s": 50, "cutoff_hz": 1000}
//   {"kind": "Gain", "gain_db": [-6, 6]}
//   {"kind": "PolarityInversion"}
//   {"kind": "PitchShift", "semitones": [-2, 2]}
//   {"kind": "Reverb", "rt60_s": [0.1, 0.4]}
// Omitted parameters take the defaults shown.

#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "uwssl/augment/ops.hpp"

namespace uwssl::augment {

enum class AugmentationKind { kIdentity, kGaussianNoise, kLowPass, kMixUp, kGain, kPolarityInversion, kPitchShift, kReverb };

inline const char* to_string(AugmentationKind k) {
  switch (k) {
    case AugmentationKind::kIdentity: return "Identity";
    case AugmentationKind::kGaussianNoise: return "GaussianNoise";
    case AugmentationKind::kLowPass: return "LowPass";
    case AugmentationKind::kMixUp: return "MixUp";
    case AugmentationKind::kGain: return "Gain";
    case AugmentationKind::kPolarityInversion: return "PolarityInversion";
    case AugmentationKind::kPitchShift: return "PitchShift";
    case AugmentationKind::kReverb: return "Reverb";
  }
  return "?";
}

inline AugmentationKind kind_from_string(const std::string& s) {
  for (auto k : {AugmentationKind::kIdentity, AugmentationKind::kGaussianNoise, AugmentationKind::kLowPass,
                 AugmentationKind::kMixUp, AugmentationKind::kGain, AugmentationKind::kPolarityInversion,
                 AugmentationKind::kPitchShift, AugmentationKind::kReverb}) {
    if (s == to_string(k)) return k;
  }
  throw InvalidArgument("unknown augmentation kind: " + s);
}

struct AugmentationSpec {
  AugmentationKind kind = AugmentationKind::kIdentity;
  Range range{};            // snr_db / cutoff_hz / gain_db / semitones / rt60_s
  double sigma_s = 50.0;    // MixUp only
  double cutoff_hz = 1000;  // MixUp only

  static AugmentationSpec identity() { return {}; }
  static AugmentationSpec gaussian_noise(Range snr_db = {0.3, 0.5}) {
    return {AugmentationKind::kGaussianNoise, snr_db};
  }
  static AugmentationSpec low_pass(Range cutoff_hz = {100.0, 1000.0}) {
    return {AugmentationKind::kLowPass, cutoff_hz};
  }
  static AugmentationSpec mixup(double sigma_s = 50.0, double cutoff_hz = 1000.0) {
    return {AugmentationKind::kMixUp, {}, sigma_s, cutoff_hz};
  }
  static AugmentationSpec gain(Range db = kGainDomainDb) { return {AugmentationKind::kGain, db}; }
  static AugmentationSpec polarity() { return {AugmentationKind::kPolarityInversion}; }
  static AugmentationSpec pitch(Range semitones = kPitchDomainSemitones) {
    return {AugmentationKind::kPitchShift, semitones};
  }
  static AugmentationSpec reverb(Range rt60_s = kReverbDomainRt60) { return {AugmentationKind::kReverb, rt60_s}; }
};

inline void validate(const AugmentationSpec& s) {
  switch (s.kind) {
    case AugmentationKind::kGaussianNoise:
      require(s.range.lo <= s.range.hi, "GaussianNoise snr_db range is empty");
      break;
    case AugmentationKind::kLowPass:
      require(s.range.lo > 0.0 && s.range.lo <= s.range.hi, "LowPass cutoff_hz range invalid");
      break;
    case AugmentationKind::kMixUp:
      require(s.sigma_s >= 0.0 && s.cutoff_hz > 0.0, "MixUp needs sigma_s >= 0 and cutoff_hz > 0");
      break;
    case AugmentationKind::kGain: check_range(s.range, kGainDomainDb, "gain"); break;
    case AugmentationKind::kPitchShift: check_range(s.range, kPitchDomainSemitones, "pitch"); break;
    case AugmentationKind::kReverb: check_range(s.range, kReverbDomainRt60, "reverb RT60"); break;
    default: break;
  }
}

/// The four-member family used for pretraining by default.
inline std::vector<AugmentationSpec> default_family() {
  return {AugmentationSpec::identity(), AugmentationSpec::gaussian_noise(), AugmentationSpec::low_pass(),
          AugmentationSpec::mixup()};
}

/// Default family plus gain, polarity inversion, pitch shift and reverb.
inline std::vector<AugmentationSpec> expanded_family() {
  auto f = default_family();
  f.push_back(AugmentationSpec::gain());
  f.push_back(AugmentationSpec::polarity());
  f.push_back(AugmentationSpec::pitch());
  f.push_back(AugmentationSpec::reverb());
  return f;
}

namespace family_detail {

inline const char* range_key(AugmentationKind k) {
  switch (k) {
    case AugmentationKind::kGaussianNoise: return "snr_db";
    case AugmentationKind::kLowPass: return "cutoff_hz";
    case AugmentationKind::kGain: return "gain_db";
    case AugmentationKind::kPitchShift: return "semitones";
    case AugmentationKind::kReverb: return "rt60_s";
    default: return nullptr;
  }
}

}  // namespace family_detail

inline nlohmann::json to_json(const AugmentationSpec& s) {
  nlohmann::json j;
  j["kind"] = to_string(s.kind);
  if (const char* key = family_detail::range_key(s.kind)) j[key] = {s.range.lo, s.range.hi};
  if (s.kind == AugmentationKind::kMixUp) {
    j["sigma_s"] = s.sigma_s;
    j["cutoff_hz"] = s.cutoff_hz;
  }
  return j;
}

inline AugmentationSpec spec_from_json(const nlohmann::json& j) {
  const AugmentationKind kind = kind_from_string(j.at("kind").get<std::string>());
  AugmentationSpec s;
  switch (kind) {
    case AugmentationKind::kGaussianNoise: s = AugmentationSpec::gaussian_noise(); break;
    case AugmentationKind::kLowPass: s = AugmentationSpec::low_pass(); break;
    case AugmentationKind::kMixUp: s = AugmentationSpec::mixup(); break;
    case AugmentationKind::kGain: s = AugmentationSpec::gain(); break;
    case AugmentationKind::kPitchShift: s = AugmentationSpec::pitch(); break;
    case AugmentationKind::kReverb: s = AugmentationSpec::reverb(); break;
    default: s.kind = kind; break;
  }
  std::set<std::string> allowed = {"kind"};
  if (const char* key = family_detail::range_key(kind)) {
    allowed.insert(key);
    if (j.contains(key)) {
      const auto& r = j.at(key);
      require(r.is_array() && r.size() == 2, "augmentation parameter '", key, "' must be a [lo, hi] pair");
      s.range = {r[0].get<double>(), r[1].get<double>()};
    }
  }
  if (kind == AugmentationKind::kMixUp) {
    allowed.insert({"sigma_s", "cutoff_hz"});
    if (j.contains("sigma_s")) s.sigma_s = j["sigma_s"].get<double>();
    if (j.contains("cutoff_hz")) s.cutoff_hz = j["cutoff_hz"].get<double>();
  }
  for (const auto& [key, _] : j.items()) {
    require(allowed.count(key) == 1, "unknown key '", key, "' for augmentation ", to_string(kind));
  }
  validate(s);
  return s;
}

/// Applies one spec. MixUp requires a recording context.
inline AudioClip apply_spec(const AugmentationSpec& s, const AudioClip& clip, const RecordingContext* ctx, Rng& rng,
                            std::size_t* clipped = nullptr) {
  switch (s.kind) {
    case AugmentationKind::kIdentity: return apply_identity(clip);
    case AugmentationKind::kGaussianNoise: return apply_gaussian_noise(clip, s.range, rng, clipped);
    case AugmentationKind::kLowPass: return apply_lowpass(clip, s.range, rng);
    case AugmentationKind::kMixUp:
      require(ctx != nullptr, "MixUp needs the source recording");
      return apply_mixup(*ctx, clip, s.sigma_s, rng, s.cutoff_hz, clipped);
    case AugmentationKind::kGain: return apply_gain(clip, s.range, rng, clipped);
    case AugmentationKind::kPolarityInversion: return apply_polarity(clip);
    case AugmentationKind::kPitchShift: return apply_pitch(clip, s.range, rng);
    case AugmentationKind::kReverb: return apply_reverb(clip, s.range, rng, clipped);
  }
  throw InvalidArgument("unhandled augmentation kind");
}

struct PairProvenance {
  std::string anchor_id;
  std::size_t spec_a = 0;  // indices into the family
  std::size_t spec_b = 0;
  std::uint64_t rng_stream = 0;
  std::size_t clipped_samples = 0;
};

struct PositivePair {
  AudioClip view_a;
  AudioClip view_b;
  PairProvenance provenance;
};

/// Draws two family members independently and uniformly (with replacement)
/// and applies each to the anchor. Each view gets its own child stream.
inline PositivePair sample_pair(const std::vector<AugmentationSpec>& family, const RecordingContext* ctx,
                                const AudioClip& anchor, const Rng& rng) {
  require(!family.empty(), "augmentation family is empty");
  Rng select = rng.fork("select");
  PositivePair pair;
  pair.provenance.anchor_id = anchor.recording_id + "@" + std::to_string(anchor.offset_s);
  pair.provenance.rng_stream = rng.seed();
  pair.provenance.spec_a = select.index(family.size());
  pair.provenance.spec_b = select.index(family.size());
  Rng rng_a = rng.fork("view-a");
  Rng rng_b = rng.fork("view-b");
  pair.view_a = apply_spec(family[pair.provenance.spec_a], anchor, ctx, rng_a, &pair.provenance.clipped_samples);
  pair.view_b = apply_spec(family[pair.provenance.spec_b], anchor, ctx, rng_b, &pair.provenance.clipped_samples);
  return pair;
}

}  // namespace uwssl::augment
