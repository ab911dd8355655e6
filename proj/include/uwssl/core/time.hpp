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

#include <chrono>
#include <cstdio>
#include <string>
#include <string_view>

#include "uwssl/core/error.hpp"

namespace uwssl {

using Timestamp = std::chrono::sys_seconds;

// Accepts "YYYY-MM-DD", "YYYY-MM-DDTHH:MM:SS" and the same with a trailing
// "Z" or "+00:00". Only UTC is supported.
inline Timestamp parse_iso8601(std::string_view text) {
  using namespace std::chrono;
  const std::string s(text);
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, sec = 0;
  int consumed = 0;
  bool ok = false;
  if (std::sscanf(s.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d%n", &y, &mo, &d, &h, &mi, &sec, &consumed) == 6) {
    ok = true;
  } else if (std::sscanf(s.c_str(), "%4d-%2d-%2d%n", &y, &mo, &d, &consumed) == 3) {
    ok = true;
    h = mi = sec = 0;
  }
  if (ok) {
    const std::string_view rest = std::string_view(s).substr(static_cast<std::size_t>(consumed));
    ok = rest.empty() || rest == "Z" || rest == "+00:00";
  }
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  require(ok && ymd.ok() && h < 24 && mi < 60 && sec < 61, "invalid ISO-8601 UTC timestamp: '", s,
          "'");
  return sys_days{ymd} + hours{h} + minutes{mi} + seconds{sec};
}

inline std::string format_iso8601(Timestamp t) {
  using namespace std::chrono;
  const sys_days day_point = floor<days>(t);
  const year_month_day ymd{day_point};
  const hh_mm_ss hms{t - day_point};
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                static_cast<int>(hms.seconds().count()));
  return buf;
}

}  // namespace uwssl
