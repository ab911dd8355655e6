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

// RIFF/WAVE reader and writer. Reads integer PCM (8/16/24/32 bit) and IEEE
// float32, any channel count; multi-channel input is averaged to mono and
// integer formats are divided by their full-scale value (no peak
// normalization).

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "uwssl/audio/clip.hpp"
#include "uwssl/core/error.hpp"

namespace uwssl::audio {

namespace wav_detail {

inline std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
inline std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

inline void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFF));
}
inline void put_u16(std::vector<unsigned char>& out, std::uint16_t v) {
  out.push_back(static_cast<unsigned char>(v & 0xFF));
  out.push_back(static_cast<unsigned char>((v >> 8) & 0xFF));
}

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

// Decodes one little-endian sample to [-1, 1].
inline double decode_sample(const unsigned char* p, std::uint16_t format, int bits) {
  if (format == kFormatFloat) {
    float f;
    std::uint32_t u = read_u32(p);
    std::memcpy(&f, &u, sizeof f);
    return static_cast<double>(f);
  }
  switch (bits) {
    case 8:
      return (static_cast<double>(p[0]) - 128.0) / 128.0;
    case 16:
      return static_cast<double>(static_cast<std::int16_t>(read_u16(p))) / 32768.0;
    case 24: {
      std::int32_t v = static_cast<std::int32_t>(p[0] | (p[1] << 8) | (p[2] << 16));
      if (v & 0x800000) v -= 0x1000000;
      return static_cast<double>(v) / 8388608.0;
    }
    case 32:
      return static_cast<double>(static_cast<std::int32_t>(read_u32(p))) / 2147483648.0;
    default:
      return 0.0;
  }
}

}  // namespace wav_detail

/// Decodes a WAV file to a mono clip (channel mean). The recording id
/// defaults to the file stem.
inline AudioClip load_wav(const std::filesystem::path& path) {
  using namespace wav_detail;
  const std::string where = path.string();
  std::ifstream in(path, std::ios::binary);
  require<IoError>(in.good(), "cannot open WAV file: ", where);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  require<IoError>(bytes.size() >= 12 && std::memcmp(bytes.data(), "RIFF", 4) == 0 &&
                       std::memcmp(bytes.data() + 8, "WAVE", 4) == 0,
                   "not a RIFF/WAVE file: ", where);

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_size = 0;
  bool have_fmt = false;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t size = read_u32(chunk + 4);
    const std::size_t body = pos + 8;
    const std::size_t avail = std::min<std::size_t>(size, bytes.size() - body);
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      require<IoError>(avail >= 16, "truncated fmt chunk: ", where);
      format = read_u16(bytes.data() + body);
      channels = read_u16(bytes.data() + body + 2);
      rate = read_u32(bytes.data() + body + 4);
      bits = read_u16(bytes.data() + body + 14);
      if (format == kFormatExtensible) {
        require<IoError>(avail >= 26, "truncated WAVE_FORMAT_EXTENSIBLE header: ", where);
        format = read_u16(bytes.data() + body + 24);
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = bytes.data() + body;
      data_size = avail;
    }
    pos = body + size + (size & 1U);
  }

  require<IoError>(have_fmt, "missing fmt chunk: ", where);
  require<IoError>(data != nullptr, "missing data chunk: ", where);
  const bool pcm_ok = format == kFormatPcm && (bits == 8 || bits == 16 || bits == 24 || bits == 32);
  const bool float_ok = format == kFormatFloat && bits == 32;
  require<IoError>(pcm_ok || float_ok, "unsupported WAV codec (format tag ", format, ", ", bits,
                   " bits): ", where);
  require<IoError>(channels >= 1 && rate > 0, "invalid channel count or sample rate: ", where);

  const std::size_t bytes_per_sample = bits / 8;
  const std::size_t frame_bytes = bytes_per_sample * channels;
  const std::size_t frames = data_size / frame_bytes;
  require<IoError>(frames > 0, "zero-length audio: ", where);

  AudioClip clip;
  clip.sample_rate = static_cast<int>(rate);
  clip.recording_id = path.stem().string();
  clip.samples.resize(frames);
  for (std::size_t f = 0; f < frames; ++f) {
    double acc = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      acc += decode_sample(data + f * frame_bytes + c * bytes_per_sample, format, bits);
    }
    clip.samples[f] = acc / static_cast<double>(channels);
  }
  return clip;
}

enum class WavEncoding { kPcm16, kFloat32 };

/// Writes a mono WAV. PCM16 quantizes as round(x * 32768) clamped to the
/// int16 range.
inline void write_wav(const std::filesystem::path& path, const AudioClip& clip,
                      WavEncoding encoding = WavEncoding::kPcm16) {
  using namespace wav_detail;
  require(clip.sample_rate > 0, "sample rate must be positive");
  const std::uint16_t bits = encoding == WavEncoding::kPcm16 ? 16 : 32;
  const std::uint16_t tag = encoding == WavEncoding::kPcm16 ? kFormatPcm : kFormatFloat;
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(clip.samples.size() * (bits / 8));

  std::vector<unsigned char> out;
  out.reserve(44 + data_bytes);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  put_u32(out, 36 + data_bytes);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  put_u32(out, 16);
  put_u16(out, tag);
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(clip.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(clip.sample_rate) * (bits / 8));
  put_u16(out, bits / 8);
  put_u16(out, bits);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  put_u32(out, data_bytes);
  for (double x : clip.samples) {
    if (encoding == WavEncoding::kPcm16) {
      const double q = std::clamp(std::round(x * 32768.0), -32768.0, 32767.0);
      put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
    } else {
      const float f = static_cast<float>(x);
      std::uint32_t u;
      std::memcpy(&u, &f, sizeof u);
      put_u32(out, u);
    }
  }

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  require<IoError>(os.good(), "cannot write WAV file: ", path.string());
  os.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  require<IoError>(os.good(), "write failed: ", path.string());
}

}  // namespace uwssl::audio
