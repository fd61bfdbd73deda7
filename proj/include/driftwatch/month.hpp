/*
 * Copyright 2026 The driftwatch Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <chrono>
#include <compare>
#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>

#include "driftwatch/error.hpp"

namespace driftwatch {

/// Calendar month in UTC. All period bucketing goes through this type.
struct MonthKey {
  int year = 1970;
  int month = 1;  // 1..12

  friend auto operator<=>(const MonthKey&, const MonthKey&) = default;

  static MonthKey from_timestamp(std::int64_t utc_seconds) {
    using namespace std::chrono;
    const auto day = floor<days>(sys_seconds{seconds{utc_seconds}});
    const year_month_day ymd{day};
    return {static_cast<int>(ymd.year()), static_cast<int>(static_cast<unsigned>(ymd.month()))};
  }

  /// Parses "YYYY-MM".
  static MonthKey parse(std::string_view text) {
    int y = 0;
    int m = 0;
    char tail = 0;
    const std::string s(text);
    if (s.size() != 7 || std::sscanf(s.c_str(), "%4d-%2d%c", &y, &m, &tail) != 2 || m < 1 ||
        m > 12) {
      throw Error(Errc::ParseError, "month must be YYYY-MM, got '" + s + "'");
    }
    return {y, m};
  }

  std::string to_string() const {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02d", year, month);
    return buf;
  }

  MonthKey next() const { return month == 12 ? MonthKey{year + 1, 1} : MonthKey{year, month + 1}; }
  MonthKey prev() const { return month == 1 ? MonthKey{year - 1, 12} : MonthKey{year, month - 1}; }

  /// Months since 1970-01; handy as a stream index for seeding.
  std::int64_t ordinal() const { return static_cast<std::int64_t>(year - 1970) * 12 + (month - 1); }

  std::int64_t start_seconds() const {
    using namespace std::chrono;
    const sys_days d = std::chrono::year{year} / std::chrono::month{static_cast<unsigned>(month)} / 1;
    return duration_cast<seconds>(d.time_since_epoch()).count();
  }
  /// Exclusive upper bound.
  std::int64_t end_seconds() const { return next().start_seconds(); }
};

}  // namespace driftwatch
