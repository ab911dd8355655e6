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

#include <gtest/gtest.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>

#include "support/signals.hpp"
#include "uwssl/audio/manifest.hpp"
#include "uwssl/audio/resample.hpp"
#include "uwssl/audio/wav.hpp"
#include "uwssl/audio/window.hpp"

namespace fs = std::filesystem;
using namespace uwssl;
using namespace uwssl::audio;
using uwssl::testing::make_clip;
using uwssl::testing::sine;

namespace {

fs::path temp_dir() {
  fs::path p = fs::temp_directory_path() / "uwssl_test_audio";
  fs::create_directories(p);
  return p;
}

// Hand-rolled RIFF writer so the reader is not tested against itself.
void write_raw_wav(const fs::path& path, std::uint16_t tag, std::uint16_t channels, std::uint32_t rate,
                   std::uint16_t bits, const std::vector<unsigned char>& payload) {
  std::ofstream out(path, std::ios::binary);
  auto u32 = [&out](std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); };
  auto u16 = [&out](std::uint16_t v) { out.write(reinterpret_cast<const char*>(&v), 2); };
  out.write("RIFF", 4);
  u32(36 + static_cast<std::uint32_t>(payload.size()));
  out.write("WAVEfmt ", 8);
  u32(16);
  u16(tag);
  u16(channels);
  u32(rate);
  u32(rate * channels * bits / 8);
  u16(static_cast<std::uint16_t>(channels * bits / 8));
  u16(bits);
  out.write("data", 4);
  u32(static_cast<std::uint32_t>(payload.size()));
  out.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
}

std::vector<unsigned char> pcm16(const std::vector<std::int16_t>& v) {
  std::vector<unsigned char> b;
  for (auto s : v) {
    b.push_back(static_cast<unsigned char>(s & 0xFF));
    b.push_back(static_cast<unsigned char>((s >> 8) & 0xFF));
  }
  return b;
}

}  // namespace

TEST(LoadWav, SilenceKeepsSampleRate) {
  const fs::path p = temp_dir() / "silence.wav";
  write_raw_wav(p, 1, 1, 22050, 16, pcm16(std::vector<std::int16_t>(100, 0)));
  const AudioClip c = load_wav(p);
  EXPECT_EQ(c.sample_rate, 22050);
  ASSERT_EQ(c.size(), 100u);
  for (double v : c.samples) EXPECT_EQ(v, 0.0);
}

TEST(LoadWav, FullScaleDivision16Bit) {
  const fs::path p = temp_dir() / "half.wav";
  write_raw_wav(p, 1, 1, 16000, 16, pcm16({16384, -16384, -32768, 32767}));
  const AudioClip c = load_wav(p);
  EXPECT_EQ(c.samples[0], 0.5);
  EXPECT_EQ(c.samples[1], -0.5);
  EXPECT_EQ(c.samples[2], -1.0);
  EXPECT_DOUBLE_EQ(c.samples[3], 32767.0 / 32768.0);
}

TEST(LoadWav, StereoOppositeChannelsCancel) {
  const fs::path p = temp_dir() / "stereo.wav";
  std::vector<std::int16_t> inter;
  for (int i = 0; i < 50; ++i) {
    const auto v = static_cast<std::int16_t>((i * 977) % 30000 - 15000);
    inter.push_back(v);
    inter.push_back(static_cast<std::int16_t>(-v));
  }
  write_raw_wav(p, 1, 2, 16000, 16, pcm16(inter));
  const AudioClip c = load_wav(p);
  ASSERT_EQ(c.size(), 50u);
  for (double v : c.samples) EXPECT_EQ(v, 0.0);
}

TEST(LoadWav, OtherBitDepthsAndFloat) {
  // 8-bit unsigned: 192 -> (192 - 128) / 128 = 0.5
  write_raw_wav(temp_dir() / "u8.wav", 1, 1, 8000, 8, {192, 128, 0});
  AudioClip c8 = load_wav(temp_dir() / "u8.wav");
  EXPECT_EQ(c8.samples[0], 0.5);
  EXPECT_EQ(c8.samples[1], 0.0);
  EXPECT_EQ(c8.samples[2], -1.0);

  // 24-bit: 0x400000 = 4194304 -> 0.5; 0xC00000 -> -0.5
  write_raw_wav(temp_dir() / "s24.wav", 1, 1, 8000, 24, {0x00, 0x00, 0x40, 0x00, 0x00, 0xC0});
  AudioClip c24 = load_wav(temp_dir() / "s24.wav");
  EXPECT_EQ(c24.samples[0], 0.5);
  EXPECT_EQ(c24.samples[1], -0.5);

  // 32-bit int: 0x40000000 -> 0.5
  write_raw_wav(temp_dir() / "s32.wav", 1, 1, 8000, 32, {0x00, 0x00, 0x00, 0x40});
  EXPECT_EQ(load_wav(temp_dir() / "s32.wav").samples[0], 0.5);

  // float32 0.25f
  float f = 0.25f;
  std::vector<unsigned char> fb(4);
  std::memcpy(fb.data(), &f, 4);
  write_raw_wav(temp_dir() / "f32.wav", 3, 1, 8000, 32, fb);
  EXPECT_EQ(load_wav(temp_dir() / "f32.wav").samples[0], 0.25);
}

TEST(LoadWav, ErrorsNameTheFile) {
  const fs::path missing = temp_dir() / "does_not_exist.wav";
  try {
    load_wav(missing);
    FAIL() << "expected IoError";
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("does_not_exist.wav"), std::string::npos);
  }

  const fs::path adpcm = temp_dir() / "adpcm.wav";
  write_raw_wav(adpcm, 2, 1, 8000, 4, {1, 2, 3, 4});
  EXPECT_THROW(load_wav(adpcm), IoError);

  const fs::path empty = temp_dir() / "empty.wav";
  write_raw_wav(empty, 1, 1, 8000, 16, {});
  try {
    load_wav(empty);
    FAIL() << "expected IoError";
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("zero-length"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("empty.wav"), std::string::npos);
  }
}

TEST(WavRoundTrip, Pcm16WithinOneQuantizationStep) {
  std::mt19937 gen(7);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<double> x(1000);
    for (double& v : x) v = dist(gen);
    const fs::path p = temp_dir() / "roundtrip.wav";
    write_wav(p, make_clip(x, 16000));
    const AudioClip back = load_wav(p);
    ASSERT_EQ(back.size(), x.size());
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_LE(std::abs(back.samples[i] - x[i]), 1.0 / 32768.0);
  }
}

TEST(Resample, EqualRatesAreBitIdentical) {
  const auto x = uwssl::testing::white_noise(5000, 0.2, 3);
  const AudioClip c = make_clip(x, 16000);
  const AudioClip y = resample(c, 16000);
  EXPECT_EQ(y.samples, c.samples);
  EXPECT_EQ(resample(y, 16000).samples, y.samples);
}

TEST(Resample, SinePreservedAt48kTo16k) {
  const std::size_t n = 48000;
  const AudioClip c = make_clip(sine(1000.0, 0.5, n, 48000.0), 48000);
  const AudioClip y = resample(c, 16000);
  EXPECT_EQ(y.sample_rate, 16000);
  EXPECT_LE(std::abs(static_cast<double>(y.size()) - 16000.0), 1.0);
  // skip filter edges; 1 kHz has integer periods in any 16-sample multiple
  const double amp = uwssl::testing::tone_amplitude(y.samples, 1000.0, 16000.0, 1600, 14400);
  EXPECT_NEAR(amp, 0.5, 0.005);
}

TEST(Resample, ImageFrequencySuppressed) {
  const std::size_t n = 48000;
  auto a = sine(7000.0, 0.4, n, 48000.0);
  const auto b = sine(10000.0, 0.4, n, 48000.0);
  for (std::size_t i = 0; i < n; ++i) a[i] += b[i];
  const AudioClip y = resample(make_clip(a, 48000), 16000);
  // 10 kHz folds to 6 kHz at 16 kHz sampling
  const double keep = uwssl::testing::tone_amplitude(y.samples, 7000.0, 16000.0, 1600, 14400);
  const double alias = uwssl::testing::tone_amplitude(y.samples, 6000.0, 16000.0, 1600, 14400);
  EXPECT_GE(20.0 * std::log10(keep / alias), 60.0);
}

TEST(Resample, DurationPreservedForAwkwardRatios) {
  for (int rate : {44100, 22050, 8000, 11025, 32000}) {
    const AudioClip c = make_clip(std::vector<double>(static_cast<std::size_t>(rate) * 3, 0.1), rate);
    const AudioClip y = resample(c, 16000);
    EXPECT_LE(std::abs(y.duration_s() - c.duration_s()), 1.0 / 16000.0) << rate;
  }
  EXPECT_THROW(resample(make_clip({0.0}, 16000), 0), InvalidArgument);
}

TEST(WindowFixed, ExactDivisionAndRemainder) {
  AudioClip c = make_clip(std::vector<double>(160000, 0.0), 16000, "rec");
  auto w = window_fixed(c, 2.0);
  ASSERT_EQ(w.size(), 5u);
  for (std::size_t i = 0; i < w.size(); ++i) {
    EXPECT_DOUBLE_EQ(w[i].offset_s, 2.0 * static_cast<double>(i));
    EXPECT_EQ(w[i].size(), 32000u);
    EXPECT_EQ(w[i].recording_id, "rec");
  }
  c.samples.resize(152000);  // 9.5 s
  EXPECT_EQ(window_fixed(c, 2.0).size(), 4u);
  c.samples.resize(30400);  // 1.9 s
  EXPECT_TRUE(window_fixed(c, 2.0).empty());
  EXPECT_THROW(window_fixed(c, 0.0), InvalidArgument);
}

TEST(WindowFixed, ConcatenationIsAPrefix) {
  const auto x = uwssl::testing::white_noise(16000 * 7 + 123, 0.3, 11);
  AudioClip c = make_clip(x, 16000);
  c.offset_s = 10.0;
  const auto w = window_fixed(c, 2.0);
  std::vector<double> joined;
  for (const auto& win : w) joined.insert(joined.end(), win.samples.begin(), win.samples.end());
  ASSERT_LE(joined.size(), x.size());
  EXPECT_TRUE(std::equal(joined.begin(), joined.end(), x.begin()));
  EXPECT_DOUBLE_EQ(w.back().offset_s, 10.0 + 4.0);
}

TEST(Manifest, RoundTripAndValidation) {
  Manifest m;
  ManifestEntry a;
  a.path = "a.wav";
  a.recording_id = "a";
  a.label = "cargo";
  a.timestamp = parse_iso8601("2017-10-03T12:00:00Z");
  a.duration_s = 60.0;
  ManifestEntry b = a;
  b.path = "b.wav";
  b.recording_id = "b";
  b.label.reset();
  b.timestamp.reset();
  m.entries = {a, b};
  const fs::path p = temp_dir() / "manifest.jsonl";
  write_manifest(p, m);
  const Manifest back = read_manifest(p);
  ASSERT_EQ(back.entries.size(), 2u);
  EXPECT_EQ(*back.entries[0].label, "cargo");
  EXPECT_EQ(format_iso8601(*back.entries[0].timestamp), "2017-10-03T12:00:00Z");
  EXPECT_FALSE(back.entries[1].timestamp.has_value());
  EXPECT_EQ(back.resolve(back.entries[0]), temp_dir() / "a.wav");

  m.entries[1].recording_id = "a";
  EXPECT_THROW(write_manifest(p, m), InvalidArgument);
  m.entries[1].recording_id = "b";
  m.entries[1].duration_s = 0.0;
  EXPECT_THROW(validate(m), InvalidArgument);
}

TEST(Timestamp, ParsesAndRejects) {
  EXPECT_EQ(format_iso8601(parse_iso8601("2017-12-01")), "2017-12-01T00:00:00Z");
  EXPECT_LT(parse_iso8601("2017-11-30T23:59:59Z"), parse_iso8601("2017-12-01T00:00:00+00:00"));
  EXPECT_THROW(parse_iso8601("2017-13-01"), InvalidArgument);
  EXPECT_THROW(parse_iso8601("yesterday"), InvalidArgument);
  EXPECT_THROW(parse_iso8601("2017-12-01T00:00:00+02:00"), InvalidArgument);
}
