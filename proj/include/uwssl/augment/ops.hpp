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

// Time-domain augmentations. Every op preserves length and sample rate.
// Outputs are clipped to [-1, 1] only when a sample actually leaves that
// range; the number of clipped samples is reported through `clipped`.

#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "uwssl/audio/clip.hpp"
#include "uwssl/audio/resample.hpp"
#include "uwssl/augment/filters.hpp"
#include "uwssl/core/error.hpp"
#include "uwssl/core/rng.hpp"
#include "uwssl/dsp/fft.hpp"

namespace uwssl::augment {

using audio::AudioClip;

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

// Parameter domains of the expanded family.
inline constexpr Range kGainDomainDb{-6.0, 6.0};
inline constexpr Range kPitchDomainSemitones{-2.0, 2.0};
inline constexpr Range kReverbDomainRt60{0.1, 0.4};

inline void check_range(const Range& r, const Range& domain, const char* what) {
  require(r.lo <= r.hi && r.lo >= domain.lo && r.hi <= domain.hi, what, " range [", r.lo, ", ", r.hi,
          "] outside domain [", domain.lo, ", ", domain.hi, "]");
}

inline std::size_t clip_to_unit(std::vector<double>& x) {
  std::size_t n = 0;
  for (double& v : x) {
    if (v > 1.0) {
      v = 1.0;
      ++n;
    } else if (v < -1.0) {
      v = -1.0;
      ++n;
    }
  }
  return n;
}

inline AudioClip finish(const AudioClip& like, std::vector<double> samples, std::size_t* clipped) {
  const std::size_t n = clip_to_unit(samples);
  if (clipped) *clipped += n;
  return audio::with_samples(like, std::move(samples));
}

inline AudioClip apply_identity(const AudioClip& clip) { return clip; }

/// Adds white Gaussian noise so that 10 log10(P_signal / P_noise) equals a
/// target drawn uniformly from snr_range_db. The noise realization is
/// rescaled to hit the target power exactly.
inline AudioClip apply_gaussian_noise(const AudioClip& clip, Range snr_range_db, Rng& rng,
                                      std::size_t* clipped = nullptr) {
  require(snr_range_db.lo <= snr_range_db.hi, "invalid SNR range");
  const double p_signal = audio::mean_power(clip.samples);
  require(p_signal > 0.0, "gaussian noise needs a signal with nonzero power (SNR undefined for silence)");
  const double snr_db = rng.uniform(snr_range_db.lo, snr_range_db.hi);
  std::vector<double> noise(clip.size());
  for (double& v : noise) v = rng.normal();
  const double p_raw = audio::mean_power(noise);
  const double scale = std::sqrt(p_signal / std::pow(10.0, snr_db / 10.0) / p_raw);
  std::vector<double> out(clip.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = clip.samples[i] + scale * noise[i];
  return finish(clip, std::move(out), clipped);
}

inline AudioClip lowpass(const AudioClip& clip, double cutoff_hz) {
  ButterworthFilter f(FilterType::kLowPass, kButterworthOrder, cutoff_hz, clip.sample_rate);
  return audio::with_samples(clip, f.apply(clip.samples));
}

inline AudioClip highpass(const AudioClip& clip, double cutoff_hz) {
  ButterworthFilter f(FilterType::kHighPass, kButterworthOrder, cutoff_hz, clip.sample_rate);
  return audio::with_samples(clip, f.apply(clip.samples));
}

inline AudioClip apply_lowpass(const AudioClip& clip, Range cutoff_range_hz, Rng& rng) {
  require(cutoff_range_hz.lo > 0.0 && cutoff_range_hz.lo <= cutoff_range_hz.hi &&
              cutoff_range_hz.hi < clip.sample_rate / 2.0,
          "invalid low-pass cutoff range [", cutoff_range_hz.lo, ", ", cutoff_range_hz.hi, "] Hz");
  return lowpass(clip, rng.uniform(cutoff_range_hz.lo, cutoff_range_hz.hi));
}

/// Non-owning view of the recording an anchor window was cut from.
struct RecordingContext {
  std::span<const double> samples;
  int sample_rate = 16000;
  double anchor_offset_s = 0.0;

  double duration_s() const { return static_cast<double>(samples.size()) / sample_rate; }
};

struct MixUpDraw {
  double drawn_time_s = 0.0;  // Normal(center, sigma) draw
  std::size_t start = 0;      // neighbor window start sample after clamping
};

inline MixUpDraw draw_neighbor(const RecordingContext& ctx, std::size_t window_len, double sigma_s, Rng& rng) {
  require(ctx.samples.size() >= window_len, "recording shorter than one window (", ctx.samples.size(), " < ",
          window_len, " samples)");
  require(sigma_s >= 0.0, "sigma_s must be non-negative");
  const double center = ctx.duration_s() / 2.0;
  MixUpDraw d;
  d.drawn_time_s = sigma_s > 0.0 ? rng.normal(center, sigma_s) : center;
  const double max_start = static_cast<double>(ctx.samples.size() - window_len);
  const double start = std::clamp(std::round(d.drawn_time_s * ctx.sample_rate), 0.0, max_start);
  d.start = static_cast<std::size_t>(start);
  return d;
}

/// lowpass(anchor, cutoff) + highpass(neighbor, cutoff), where the neighbor
/// window starts at a time drawn from Normal(recording center, sigma_s),
/// clamped so that it fits in the recording. No renormalization.
inline AudioClip apply_mixup(const RecordingContext& ctx, const AudioClip& anchor, double sigma_s, Rng& rng,
                             double cutoff_hz = 1000.0, std::size_t* clipped = nullptr,
                             MixUpDraw* draw_out = nullptr) {
  require(ctx.sample_rate == anchor.sample_rate, "recording and anchor sample rates differ");
  const MixUpDraw draw = draw_neighbor(ctx, anchor.size(), sigma_s, rng);
  if (draw_out) *draw_out = draw;
  ButterworthFilter lp(FilterType::kLowPass, kButterworthOrder, cutoff_hz, anchor.sample_rate);
  ButterworthFilter hp(FilterType::kHighPass, kButterworthOrder, cutoff_hz, anchor.sample_rate);
  std::vector<double> low = lp.apply(anchor.samples);
  std::vector<double> high = hp.apply(ctx.samples.subspan(draw.start, anchor.size()));
  for (std::size_t i = 0; i < low.size(); ++i) low[i] += high[i];
  return finish(anchor, std::move(low), clipped);
}

inline AudioClip gain_db(const AudioClip& clip, double db, std::size_t* clipped = nullptr) {
  const double g = std::pow(10.0, db / 20.0);
  std::vector<double> out(clip.samples);
  for (double& v : out) v *= g;
  return finish(clip, std::move(out), clipped);
}

inline AudioClip apply_gain(const AudioClip& clip, Range gain_range_db, Rng& rng, std::size_t* clipped = nullptr) {
  check_range(gain_range_db, kGainDomainDb, "gain");
  return gain_db(clip, rng.uniform(gain_range_db.lo, gain_range_db.hi), clipped);
}

inline AudioClip apply_polarity(const AudioClip& clip) {
  std::vector<double> out(clip.samples);
  for (double& v : out) v = -v;
  return audio::with_samples(clip, std::move(out));
}

/// Raises pitch by `semitones` (negative lowers it): the clip is resampled by
/// 2^(-semitones/12) and played back at the original rate, then trimmed or
/// zero-padded to the original length. The ratio is approximated by a
/// rational number with denominator 1000.
inline AudioClip pitch_shift(const AudioClip& clip, double semitones) {
  require(std::abs(semitones) <= 24.0, "pitch shift limited to +/-24 semitones, got ", semitones);
  const double ratio = std::pow(2.0, semitones / 12.0);
  const int down = static_cast<int>(std::lround(1000.0 * ratio));
  if (down == 1000) return clip;
  audio::PolyphaseResampler rs(1000, down);
  std::vector<double> y = rs.process(clip.samples);
  y.resize(clip.size(), 0.0);
  return audio::with_samples(clip, std::move(y));
}

inline AudioClip apply_pitch(const AudioClip& clip, Range semitone_range, Rng& rng) {
  check_range(semitone_range, kPitchDomainSemitones, "pitch");
  return pitch_shift(clip, rng.uniform(semitone_range.lo, semitone_range.hi));
}

/// Unit-energy impulse response: a direct-path impulse followed by white
/// noise under an envelope that decays by 60 dB over rt60_s seconds.
inline std::vector<double> synthetic_impulse_response(double rt60_s, int sample_rate, Rng& rng) {
  require(rt60_s > 0.0, "rt60 must be positive");
  const std::size_t len = static_cast<std::size_t>(std::ceil(rt60_s * sample_rate));
  std::vector<double> ir(std::max<std::size_t>(len, 1), 0.0);
  ir[0] = 1.0;
  const double decay = std::log(1000.0) / (rt60_s * sample_rate);  // amplitude: -60 dB at rt60
  for (std::size_t i = 1; i < ir.size(); ++i) ir[i] = rng.normal() * std::exp(-decay * static_cast<double>(i));
  const double norm = std::sqrt(std::inner_product(ir.begin(), ir.end(), ir.begin(), 0.0));
  for (double& v : ir) v /= norm;
  return ir;
}

inline AudioClip reverb(const AudioClip& clip, double rt60_s, Rng& rng, std::size_t* clipped = nullptr) {
  const std::vector<double> ir = synthetic_impulse_response(rt60_s, clip.sample_rate, rng);
  return finish(clip, dsp::fft_convolve(clip.samples, ir, clip.size()), clipped);
}

inline AudioClip apply_reverb(const AudioClip& clip, Range rt60_range_s, Rng& rng, std::size_t* clipped = nullptr) {
  check_range(rt60_range_s, kReverbDomainRt60, "reverb RT60");
  const double rt60 = rng.uniform(rt60_range_s.lo, rt60_range_s.hi);
  return reverb(clip, rt60, rng, clipped);
}

}  // namespace uwssl::augment
