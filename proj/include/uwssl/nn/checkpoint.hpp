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

// Checkpoint container. Little-endian throughout:
//
//   "UWSSLCK1"                      8-byte magic
//   u32 blob_count
//   per blob:
//     u32 name_len, name bytes (UTF-8)
//     u32 ndim, u32 dims[ndim]
//     f64 values[prod(dims)]
//
// A JSON sidecar "<path>.json" carries the model config.

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "uwssl/nn/module.hpp"

namespace uwssl::nn {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

inline constexpr char kCheckpointMagic[8] = {'U', 'W', 'S', 'S', 'L', 'C', 'K', '1'};

struct Blob {
  Shape shape;
  std::vector<double> values;
};

using BlobMap = std::map<std::string, Blob>;

inline void write_blobs(const std::filesystem::path& path, const std::vector<std::pair<std::string, Blob>>& blobs) {
  std::ofstream out(path, std::ios::binary);
  require<IoError>(out.good(), "cannot open checkpoint for writing: ", path.string());
  auto u32 = [&out](std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); };
  out.write(kCheckpointMagic, 8);
  u32(static_cast<std::uint32_t>(blobs.size()));
  for (const auto& [name, blob] : blobs) {
    u32(static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    u32(static_cast<std::uint32_t>(blob.shape.size()));
    for (auto d : blob.shape) u32(static_cast<std::uint32_t>(d));
    out.write(reinterpret_cast<const char*>(blob.values.data()),
              static_cast<std::streamsize>(blob.values.size() * sizeof(double)));
  }
  require<IoError>(out.good(), "failed writing checkpoint: ", path.string());
}

inline BlobMap read_blobs(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require<IoError>(in.good(), "cannot open checkpoint: ", path.string());
  auto fail = [&path](const char* what) { throw IoError(uwssl::detail::concat("corrupt checkpoint ", path.string(), ": ", what)); };
  auto u32 = [&]() {
    std::uint32_t v = 0;
    if (!in.read(reinterpret_cast<char*>(&v), 4)) fail("truncated");
    return v;
  };
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kCheckpointMagic, 8) != 0) fail("bad magic");
  BlobMap blobs;
  const std::uint32_t count = u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name(u32(), '\0');
    if (!in.read(name.data(), static_cast<std::streamsize>(name.size()))) fail("truncated name");
    Blob b;
    b.shape.resize(u32());
    for (auto& d : b.shape) d = u32();
    b.values.resize(numel(b.shape));
    if (!in.read(reinterpret_cast<char*>(b.values.data()), static_cast<std::streamsize>(b.values.size() * 8)))
      fail("truncated values");
    if (!blobs.emplace(name, std::move(b)).second) fail("duplicate blob name");
  }
  return blobs;
}

/// Parameters then buffers, in registration order.
inline void save_module(const std::filesystem::path& path, const Module& m, const nlohmann::json* config = nullptr) {
  std::vector<std::pair<std::string, Blob>> blobs;
  for (const auto& p : m.parameters()) blobs.push_back({p.name, {p.tensor.shape(), {p.tensor.values().begin(), p.tensor.values().end()}}});
  for (const auto& b : m.buffers()) blobs.push_back({b.name, {{b.data->size()}, *b.data}});
  write_blobs(path, blobs);
  if (config) {
    std::ofstream side(path.string() + ".json");
    side << config->dump(2) << "\n";
    require<IoError>(side.good(), "failed writing checkpoint sidecar for ", path.string());
  }
}

/// Every parameter and buffer must be present with a matching shape, and
/// the file may hold nothing else.
inline void load_module(const std::filesystem::path& path, Module& m) {
  BlobMap blobs = read_blobs(path);
  std::size_t used = 0;
  for (auto& p : m.parameters()) {
    auto it = blobs.find(p.name);
    require<IoError>(it != blobs.end(), "checkpoint ", path.string(), " lacks parameter ", p.name);
    require<IoError>(it->second.shape == p.tensor.shape(), "checkpoint shape mismatch for ", p.name, ": ",
                     shape_str(it->second.shape), " vs ", shape_str(p.tensor.shape()));
    p.tensor.mutable_values().assign(it->second.values.begin(), it->second.values.end());
    ++used;
  }
  for (auto& b : m.buffers()) {
    auto it = blobs.find(b.name);
    require<IoError>(it != blobs.end(), "checkpoint ", path.string(), " lacks buffer ", b.name);
    require<IoError>(it->second.values.size() == b.data->size(), "checkpoint size mismatch for ", b.name);
    *b.data = it->second.values;
    ++used;
  }
  require<IoError>(used == blobs.size(), "checkpoint ", path.string(), " has ", blobs.size() - used,
                   " unexpected blobs");
}

inline nlohmann::json read_sidecar(const std::filesystem::path& path) {
  std::ifstream in(path.string() + ".json");
  require<IoError>(in.good(), "missing checkpoint sidecar ", path.string(), ".json");
  return nlohmann::json::parse(in);
}

}  // namespace uwssl::nn
