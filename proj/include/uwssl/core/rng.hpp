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

// Named, hash-derived random streams. Every consumer of randomness asks for
// a stream keyed by (master seed, stream name, item id); streams never share
// state, so results do not depend on the order in which items are processed.

#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace uwssl {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline constexpr std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

inline constexpr std::uint64_t derive_seed(std::uint64_t master, std::string_view stream,
                                           std::uint64_t item = 0) {
  return splitmix64(splitmix64(master ^ fnv1a(stream)) + splitmix64(item + 0x51ED2701ULL));
}

// A single deterministic random stream.
class Rng {
 public:
  using engine_type = std::mt19937_64;

  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}
  Rng(std::uint64_t master, std::string_view stream, std::uint64_t item = 0)
      : Rng(derive_seed(master, stream, item)) {}

  // Child stream, independent of how far this one has been consumed.
  Rng fork(std::string_view stream, std::uint64_t item = 0) const {
    return Rng(seed_, stream, item);
  }

  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  double normal(double mean = 0.0, double stddev = 1.0) {
    return std::normal_distribution<double>(mean, stddev)(engine_);
  }
  // Uniform integer in [0, n).
  std::size_t index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }

  std::uint64_t seed() const { return seed_; }
  engine_type& engine() { return engine_; }

 private:
  std::uint64_t seed_;
  engine_type engine_;
};

}  // namespace uwssl
