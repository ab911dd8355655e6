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

// Dataset manifest: UTF-8 JSON lines, one recording per line:
//   {"path": "rec_0.wav", "recording_id": "rec_0", "label": "cargo",
//    "timestamp": "2017-10-03T00:00:00Z", "duration_s": 60.0}
// "label" and "timestamp" are optional. Relative paths resolve against the
// manifest's directory.

#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "uwssl/core/error.hpp"
#include "uwssl/core/time.hpp"

namespace uwssl::audio {

struct ManifestEntry {
  std::string path;
  std::string recording_id;
  std::optional<std::string> label;
  std::optional<Timestamp> timestamp;
  double duration_s = 0.0;
};

struct Manifest {
  std::vector<ManifestEntry> entries;
  std::filesystem::path base_dir;

  std::filesystem::path resolve(const ManifestEntry& e) const {
    std::filesystem::path p(e.path);
    return p.is_absolute() ? p : base_dir / p;
  }
  const ManifestEntry& find(const std::string& recording_id) const {
    for (const auto& e : entries) {
      if (e.recording_id == recording_id) return e;
    }
    throw InvalidArgument("unknown recording_id: " + recording_id);
  }
};

inline void validate(const Manifest& m) {
  std::set<std::string> seen;
  for (const auto& e : m.entries) {
    require(!e.recording_id.empty(), "manifest entry without recording_id (path ", e.path, ")");
    require(seen.insert(e.recording_id).second, "duplicate recording_id in manifest: ", e.recording_id);
    require(e.duration_s > 0.0, "duration_s must be positive for ", e.recording_id);
  }
}

inline nlohmann::json to_json(const ManifestEntry& e) {
  nlohmann::json j;
  j["path"] = e.path;
  j["recording_id"] = e.recording_id;
  if (e.label) j["label"] = *e.label;
  if (e.timestamp) j["timestamp"] = format_iso8601(*e.timestamp);
  j["duration_s"] = e.duration_s;
  return j;
}

inline ManifestEntry entry_from_json(const nlohmann::json& j) {
  static const std::set<std::string> known = {"path", "recording_id", "label", "timestamp", "duration_s"};
  for (const auto& [key, _] : j.items()) {
    require(known.count(key) == 1, "unknown manifest field: ", key);
  }
  ManifestEntry e;
  e.path = j.at("path").get<std::string>();
  e.recording_id = j.at("recording_id").get<std::string>();
  if (j.contains("label") && !j["label"].is_null()) e.label = j["label"].get<std::string>();
  if (j.contains("timestamp") && !j["timestamp"].is_null()) {
    e.timestamp = parse_iso8601(j["timestamp"].get<std::string>());
  }
  e.duration_s = j.at("duration_s").get<double>();
  return e;
}

inline Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  require<IoError>(in.good(), "cannot open manifest: ", path.string());
  Manifest m;
  m.base_dir = path.parent_path();
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      m.entries.push_back(entry_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& ex) {
      throw IoError(detail::concat("manifest ", path.string(), ":", lineno, ": ", ex.what()));
    }
  }
  validate(m);
  return m;
}

inline void write_manifest(const std::filesystem::path& path, const Manifest& m) {
  validate(m);
  std::ofstream out(path, std::ios::trunc);
  require<IoError>(out.good(), "cannot write manifest: ", path.string());
  for (const auto& e : m.entries) out << to_json(e).dump() << '\n';
}

}  // namespace uwssl::audio
