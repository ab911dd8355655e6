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
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <string>
#include <vector>

#include "uwssl/audio/clip.hpp"
#include "uwssl/core/error.hpp"
#include "uwssl/dsp/fft.hpp"
#include "uwssl/dsp/mel.hpp"

namespace uwssl::dsp {

enum class WindowFn { kHann, kRectangular };

// Periodic window of length n.
inline std::vector<double> make_window(WindowFn fn, std::size_t n) {
  std::vector<double> w(n, 1.0);
  if (fn == WindowFn::kHann) {
    for (std::size_t i = 0; i < n; ++i) {
      w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
    }
  }
  return w;
}

inline std::size_t stft_frame_count(std::size_t n_samples, std::size_t n_fft, std::size_t hop) {
  return n_samples < n_fft ? 0 : 1 + (n_samples - n_fft) / hop;
}

/// |DFT|^2 of windowed frames, (n_fft/2 + 1) rows x n_frames columns.
struct PowerSpectrogram {
  std::size_t n_bins = 0;
  std::size_t n_frames = 0;
  std::vector<double> values;  // row-major [bin][frame]

  double at(std::size_t bin, std::size_t frame) const { return values[bin * n_frames + frame]; }
};

inline PowerSpectrogram stft_power(const audio::AudioClip& clip, int n_fft, int hop,
                                   WindowFn window_fn = WindowFn::kHann) {
  require(n_fft >= 2 && n_fft % 2 == 0, "n_fft must be even and >= 2, got ", n_fft);
  require(hop >= 1, "hop must be >= 1, got ", hop);
  require(clip.samples.size() >= static_cast<std::size_t>(n_fft), "clip shorter than n_fft (",
          clip.samples.size(), " < ", n_fft, " samples)");
  const std::size_t nf = static_cast<std::size_t>(n_fft);
  const RealFft fft(nf);
  const std::vector<double> window = make_window(window_fn, nf);

  PowerSpectrogram out;
  out.n_bins = fft.bins();
  out.n_frames = stft_frame_count(clip.samples.size(), nf, static_cast<std::size_t>(hop));
  out.values.assign(out.n_bins * out.n_frames, 0.0);

  std::vector<double> frame(nf);
  std::vector<cplx> spec(out.n_bins);
  for (std::size_t t = 0; t < out.n_frames; ++t) {
    const double* src = clip.samples.data() + t * static_cast<std::size_t>(hop);
    for (std::size_t i = 0; i < nf; ++i) frame[i] = src[i] * window[i];
    fft.forward(frame, spec);
    for (std::size_t b = 0; b < out.n_bins; ++b) out.values[b * out.n_frames + t] = std::norm(spec[b]);
  }
  return out;
}

struct MelSpectrogram {
  int n_mels = 0;
  int n_frames = 0;
  double frame_rate = 0.0;  // frames per second
  double floor_db = -80.0;
  std::vector<double> values;  // row-major [mel][frame], dB
  std::string recording_id;
  double offset_s = 0.0;

  double at(int mel, int frame) const {
    return values[static_cast<std::size_t>(mel) * n_frames + frame];
  }
};

/// 10 log10(max(fb . P, 10^(floor_db/10))) per cell.
inline MelSpectrogram mel_spectrogram(const audio::AudioClip& clip, const MelFilterbank& fb, int n_fft,
                                      int hop, double floor_db = -80.0,
                                      WindowFn window_fn = WindowFn::kHann) {
  require(fb.sample_rate == clip.sample_rate, "filterbank sample rate ", fb.sample_rate,
          " does not match clip sample rate ", clip.sample_rate);
  require(fb.n_fft == n_fft, "filterbank n_fft ", fb.n_fft, " does not match n_fft ", n_fft);
  const PowerSpectrogram power = stft_power(clip, n_fft, hop, window_fn);

  MelSpectrogram out;
  out.n_mels = fb.n_mels;
  out.n_frames = static_cast<int>(power.n_frames);
  out.frame_rate = static_cast<double>(clip.sample_rate) / hop;
  out.floor_db = floor_db;
  out.recording_id = clip.recording_id;
  out.offset_s = clip.offset_s;
  out.values.assign(static_cast<std::size_t>(fb.n_mels) * power.n_frames, 0.0);

  const double floor_power = std::pow(10.0, floor_db / 10.0);
  std::vector<double> acc(power.n_frames);
  for (int m = 0; m < fb.n_mels; ++m) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (int b = fb.first_bin[m]; b < fb.last_bin[m]; ++b) {
      const double w = fb.weight(m, b);
      const double* row = &power.values[static_cast<std::size_t>(b) * power.n_frames];
      for (std::size_t t = 0; t < power.n_frames; ++t) acc[t] += w * row[t];
    }
    double* dst = &out.values[static_cast<std::size_t>(m) * power.n_frames];
    for (std::size_t t = 0; t < power.n_frames; ++t) dst[t] = 10.0 * std::log10(std::max(acc[t], floor_power));
  }
  return out;
}

// Binary container: u32 n_mels, u32 n_frames, f32 frame_rate (little-endian),
// then n_mels * n_frames row-major float32 values.
inline std::vector<unsigned char> encode_spectrogram(const MelSpectrogram& s) {
  std::vector<unsigned char> out;
  out.reserve(12 + s.values.size() * 4);
  auto put32 = [&out](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFF));
  };
  auto putf = [&put32](float f) {
    std::uint32_t u;
    std::memcpy(&u, &f, sizeof u);
    put32(u);
  };
  put32(static_cast<std::uint32_t>(s.n_mels));
  put32(static_cast<std::uint32_t>(s.n_frames));
  putf(static_cast<float>(s.frame_rate));
  for (double v : s.values) putf(static_cast<float>(v));
  return out;
}

inline MelSpectrogram decode_spectrogram(const std::vector<unsigned char>& bytes) {
  require<IoError>(bytes.size() >= 12, "spectrogram container truncated");
  auto get32 = [&bytes](std::size_t pos) {
    return static_cast<std::uint32_t>(bytes[pos]) | (static_cast<std::uint32_t>(bytes[pos + 1]) << 8) |
           (static_cast<std::uint32_t>(bytes[pos + 2]) << 16) | (static_cast<std::uint32_t>(bytes[pos + 3]) << 24);
  };
  auto getf = [&get32](std::size_t pos) {
    const std::uint32_t u = get32(pos);
    float f;
    std::memcpy(&f, &u, sizeof f);
    return f;
  };
  MelSpectrogram s;
  s.n_mels = static_cast<int>(get32(0));
  s.n_frames = static_cast<int>(get32(4));
  s.frame_rate = getf(8);
  const std::size_t count = static_cast<std::size_t>(s.n_mels) * static_cast<std::size_t>(s.n_frames);
  require<IoError>(bytes.size() == 12 + 4 * count, "spectrogram container size mismatch");
  s.values.resize(count);
  for (std::size_t i = 0; i < count; ++i) s.values[i] = getf(12 + 4 * i);
  return s;
}

inline void write_spectrogram(const std::filesystem::path& path, const MelSpectrogram& s) {
  const auto bytes = encode_spectrogram(s);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require<IoError>(out.good(), "cannot write spectrogram: ", path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

inline MelSpectrogram read_spectrogram(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require<IoError>(in.good(), "cannot open spectrogram: ", path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_spectrogram(bytes);
}

}  // namespace uwssl::dsp
