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

/**
 * Core domain types plus the two append-only stores.
 *
 * Telemetry and labels live in newline-delimited JSON files. Each store keeps
 * an in-memory index rebuilt by replaying its file on open, and appends one
 * line per accepted change. A store has one writer and any number of readers;
 * readers take a shared lock and receive copies, so what they see is a
 * consistent snapshot.
 */

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "driftwatch/error.hpp"
#include "driftwatch/matrix.hpp"
#include "driftwatch/month.hpp"

namespace driftwatch {

using json = nlohmann::json;

struct TelemetryPoint {
  std::string point_id;
  std::int64_t timestamp = 0;  // UTC seconds
  std::string entity_id;
  std::vector<double> workload;
  std::vector<double> perf;

  MonthKey month() const { return MonthKey::from_timestamp(timestamp); }
  friend bool operator==(const TelemetryPoint&, const TelemetryPoint&) = default;
};

enum class Verdict { Normal, Abnormal };

inline std::string_view to_string(Verdict v) { return v == Verdict::Normal ? "normal" : "abnormal"; }

inline Verdict parse_verdict(std::string_view s) {
  if (s == "normal") return Verdict::Normal;
  if (s == "abnormal") return Verdict::Abnormal;
  throw Error(Errc::ParseError, "verdict must be normal|abnormal, got '" + std::string(s) + "'");
}

struct LabelRecord {
  std::string point_id;
  std::string annotator_id;
  Verdict verdict = Verdict::Normal;
  std::int64_t timestamp = 0;

  friend bool operator==(const LabelRecord&, const LabelRecord&) = default;
};

/// Outcome of vote aggregation for one candidate. Only Resolved carries a
/// verdict; Pending and Expired are the not-yet-decided and timed-out states.
enum class CardStatus { Pending, Resolved, DroppedTie, Expired };

inline std::string_view to_string(CardStatus s) {
  switch (s) {
    case CardStatus::Pending: return "pending";
    case CardStatus::Resolved: return "resolved";
    case CardStatus::DroppedTie: return "dropped_tie";
    case CardStatus::Expired: return "expired";
  }
  return "pending";
}

inline CardStatus parse_card_status(std::string_view s) {
  if (s == "pending") return CardStatus::Pending;
  if (s == "resolved") return CardStatus::Resolved;
  if (s == "dropped_tie") return CardStatus::DroppedTie;
  if (s == "expired") return CardStatus::Expired;
  throw Error(Errc::ParseError, "unknown card status '" + std::string(s) + "'");
}

struct AggregatedLabel {
  std::string point_id;
  std::optional<Verdict> final_verdict;
  std::size_t normal_votes = 0;
  std::size_t abnormal_votes = 0;
  CardStatus status = CardStatus::Pending;

  friend bool operator==(const AggregatedLabel&, const AggregatedLabel&) = default;
};

enum class FeatureKind { Workload, Perf };

// ---------------------------------------------------------------------------
// JSON codecs

inline json to_json_value(const TelemetryPoint& p) {
  return json{{"point_id", p.point_id},
              {"timestamp", p.timestamp},
              {"entity_id", p.entity_id},
              {"workload", p.workload},
              {"perf", p.perf}};
}

inline json to_json_value(const LabelRecord& r) {
  return json{{"point_id", r.point_id},
              {"annotator_id", r.annotator_id},
              {"verdict", to_string(r.verdict)},
              {"timestamp", r.timestamp}};
}

inline json to_json_value(const AggregatedLabel& a) {
  json j{{"point_id", a.point_id},
         {"status", to_string(a.status)},
         {"votes", {{"normal", a.normal_votes}, {"abnormal", a.abnormal_votes}}}};
  j["final_verdict"] = a.final_verdict ? json(to_string(*a.final_verdict)) : json(nullptr);
  return j;
}

namespace detail {

/// Rewrites bare NaN / Infinity / -Infinity tokens (outside string literals)
/// to null so producers that emit them still parse.
inline std::string neutralize_nonfinite_tokens(std::string_view line) {
  std::string out;
  out.reserve(line.size());
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (in_string) {
      out.push_back(c);
      if (c == '\\' && i + 1 < line.size()) {
        out.push_back(line[++i]);
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
      out.push_back(c);
      continue;
    }
    auto starts = [&](std::string_view tok) { return line.substr(i, tok.size()) == tok; };
    if (starts("-Infinity")) {
      out += "null";
      i += 8;
    } else if (starts("Infinity")) {
      out += "null";
      i += 7;
    } else if (starts("NaN")) {
      out += "null";
      i += 2;
    } else {
      out.push_back(c);
    }
  }
  return out;
}

inline bool is_blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c) != 0; });
}

/// Reads a numeric array; a null entry marks a non-finite value.
inline std::vector<double> read_features(const json& arr, bool& nonfinite) {
  if (!arr.is_array()) throw Error(Errc::ParseError, "feature vector must be an array");
  std::vector<double> out;
  out.reserve(arr.size());
  for (const auto& v : arr) {
    if (v.is_null()) {
      nonfinite = true;
      out.push_back(std::nan(""));
    } else if (v.is_number()) {
      out.push_back(v.get<double>());
    } else {
      throw Error(Errc::ParseError, "feature values must be numbers");
    }
  }
  return out;
}

inline void append_line(const std::filesystem::path& path, const json& j) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::app);
  if (!out) throw Error(Errc::IoError, "cannot append to " + path.string());
  out << j.dump() << '\n';
  out.flush();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Telemetry store

struct Rejection {
  std::size_t line = 0;  // 1-based; 0 when not from a stream
  std::string point_id;
  std::string reason;  // malformed | dimension-mismatch | non-finite | duplicate
};

struct IngestResult {
  std::size_t accepted = 0;
  std::vector<Rejection> rejected;
};

struct Dimensions {
  std::size_t workload = 0;
  std::size_t perf = 0;
  bool known = false;
};

class PointStore {
 public:
  /// In-memory store, nothing persisted.
  PointStore() = default;

  /// In-memory store seeded with `points` (rejections are dropped).
  explicit PointStore(std::span<const TelemetryPoint> points) { ingest(points); }

  /// Store backed by an append-only JSONL file; existing lines are replayed.
  explicit PointStore(std::filesystem::path path) : path_(std::move(path)) {
    if (std::filesystem::exists(*path_)) {
      std::ifstream in(*path_);
      if (!in) throw Error(Errc::IoError, "cannot read " + path_->string());
      std::unique_lock lock(mutex_);
      replay_ = true;
      ingest_locked(in);
      replay_ = false;
    }
  }

  PointStore(const PointStore&) = delete;
  PointStore& operator=(const PointStore&) = delete;

  /// Ingests telemetry JSONL. A line without point_id carrying workload_dim /
  /// perf_dim declares the dataset dimensionality; otherwise the first
  /// accepted record fixes it.
  IngestResult ingest(std::istream& in) {
    std::unique_lock lock(mutex_);
    return ingest_locked(in);
  }

  IngestResult ingest(std::span<const TelemetryPoint> points) {
    std::unique_lock lock(mutex_);
    IngestResult result;
    for (const auto& p : points) admit_locked(p, 0, result);
    return result;
  }

  std::size_t size() const {
    std::shared_lock lock(mutex_);
    return points_.size();
  }

  Dimensions dimensions() const {
    std::shared_lock lock(mutex_);
    return dims_;
  }

  std::optional<TelemetryPoint> find(const std::string& point_id) const {
    std::shared_lock lock(mutex_);
    auto it = by_id_.find(point_id);
    if (it == by_id_.end()) return std::nullopt;
    return points_[it->second];
  }

  /// Months that hold at least one point, ascending.
  std::vector<MonthKey> months() const {
    std::shared_lock lock(mutex_);
    std::vector<MonthKey> out;
    out.reserve(by_month_.size());
    for (const auto& [m, _] : by_month_) out.push_back(m);
    return out;
  }

  /// Points of a month ordered by (timestamp, point_id). Empty if none.
  std::vector<TelemetryPoint> points_in(MonthKey month) const {
    std::shared_lock lock(mutex_);
    std::vector<TelemetryPoint> out;
    auto it = by_month_.find(month);
    if (it == by_month_.end()) return out;
    out.reserve(it->second.size());
    for (std::size_t idx : it->second) out.push_back(points_[idx]);
    return out;
  }

  /// Points whose timestamp lies in [start, end), ordered like points_in.
  std::vector<TelemetryPoint> points_between(std::int64_t start, std::int64_t end) const {
    std::vector<TelemetryPoint> out;
    for (MonthKey m = MonthKey::from_timestamp(start); m.start_seconds() < end; m = m.next()) {
      for (auto& p : points_in(m))
        if (p.timestamp >= start && p.timestamp < end) out.push_back(std::move(p));
    }
    return out;
  }

  std::vector<TelemetryPoint> all() const {
    std::shared_lock lock(mutex_);
    std::vector<TelemetryPoint> out;
    out.reserve(points_.size());
    for (const auto& [m, idxs] : by_month_)
      for (std::size_t idx : idxs) out.push_back(points_[idx]);
    return out;
  }

  /// n × d matrix of one feature kind for a month, rows in (timestamp,
  /// point_id) order. Throws EmptyPeriod when the month holds no points.
  Matrix points_in_month(MonthKey month, FeatureKind kind) const {
    std::shared_lock lock(mutex_);
    auto it = by_month_.find(month);
    if (it == by_month_.end() || it->second.empty())
      throw Error(Errc::EmptyPeriod, "no points in " + month.to_string());
    Matrix out;
    for (std::size_t idx : it->second) {
      const auto& p = points_[idx];
      out.append_row(kind == FeatureKind::Workload ? p.workload : p.perf);
    }
    return out;
  }

 private:
  IngestResult ingest_locked(std::istream& in) {
    IngestResult result;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (detail::is_blank(line)) continue;
      json j;
      try {
        j = json::parse(detail::neutralize_nonfinite_tokens(line));
      } catch (const json::parse_error&) {
        result.rejected.push_back({line_no, "", "malformed"});
        continue;
      }
      if (!j.is_object()) {
        result.rejected.push_back({line_no, "", "malformed"});
        continue;
      }
      if (!j.contains("point_id") && (j.contains("workload_dim") || j.contains("perf_dim"))) {
        declare_dimensions(j);
        continue;
      }
      TelemetryPoint p;
      bool nonfinite = false;
      try {
        p.point_id = j.at("point_id").get<std::string>();
        p.timestamp = j.at("timestamp").get<std::int64_t>();
        p.entity_id = j.at("entity_id").get<std::string>();
        p.workload = detail::read_features(j.at("workload"), nonfinite);
        p.perf = detail::read_features(j.at("perf"), nonfinite);
      } catch (const std::exception&) {
        result.rejected.push_back({line_no, p.point_id, "malformed"});
        continue;
      }
      admit_locked(p, line_no, result);
    }
    return result;
  }

  void declare_dimensions(const json& j) {
    Dimensions declared;
    try {
      declared.workload = j.at("workload_dim").get<std::size_t>();
      declared.perf = j.at("perf_dim").get<std::size_t>();
    } catch (const std::exception&) {
      throw Error(Errc::ParseError, "header record needs workload_dim and perf_dim");
    }
    declared.known = true;
    if (dims_.known && (dims_.workload != declared.workload || dims_.perf != declared.perf))
      throw Error(Errc::InvalidDimension, "header dimensionality disagrees with store");
    dims_ = declared;
  }

  void admit_locked(const TelemetryPoint& p, std::size_t line_no, IngestResult& result) {
    auto finite = [](const std::vector<double>& v) {
      return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
    };
    if (!finite(p.workload) || !finite(p.perf)) {
      result.rejected.push_back({line_no, p.point_id, "non-finite"});
      return;
    }
    if (dims_.known && (p.workload.size() != dims_.workload || p.perf.size() != dims_.perf)) {
      result.rejected.push_back({line_no, p.point_id, "dimension-mismatch"});
      return;
    }
    if (by_id_.count(p.point_id) != 0) {
      result.rejected.push_back({line_no, p.point_id, "duplicate"});
      return;
    }
    if (!dims_.known) dims_ = {p.workload.size(), p.perf.size(), true};

    if (path_ && !replay_) detail::append_line(*path_, to_json_value(p));

    const std::size_t idx = points_.size();
    points_.push_back(p);
    by_id_.emplace(p.point_id, idx);
    auto& bucket = by_month_[p.month()];
    auto pos = std::upper_bound(bucket.begin(), bucket.end(), idx, [&](std::size_t a, std::size_t b) {
      const auto& pa = points_[a];
      const auto& pb = points_[b];
      return std::tie(pa.timestamp, pa.point_id) < std::tie(pb.timestamp, pb.point_id);
    });
    bucket.insert(pos, idx);
    ++result.accepted;
  }

  std::optional<std::filesystem::path> path_;
  bool replay_ = false;
  mutable std::shared_mutex mutex_;
  Dimensions dims_;
  std::vector<TelemetryPoint> points_;
  std::unordered_map<std::string, std::size_t> by_id_;
  std::map<MonthKey, std::vector<std::size_t>> by_month_;
};

// ---------------------------------------------------------------------------
// Label store

/// At most one record per (point, annotator); a later upsert for the same
/// pair replaces the earlier one. Retractions are persisted as their own
/// line type so the file replays to the same state.
class LabelStore {
 public:
  LabelStore() = default;

  explicit LabelStore(std::filesystem::path path) : path_(std::move(path)) {
    if (std::filesystem::exists(*path_)) {
      std::ifstream in(*path_);
      if (!in) throw Error(Errc::IoError, "cannot read " + path_->string());
      std::unique_lock lock(mutex_);
      replay_ = true;
      ingest_locked(in);
      replay_ = false;
    }
  }

  LabelStore(const LabelStore&) = delete;
  LabelStore& operator=(const LabelStore&) = delete;

  void upsert(const LabelRecord& record) {
    std::unique_lock lock(mutex_);
    upsert_locked(record);
  }

  /// Removes the (point, annotator) record. Returns false when none existed.
  bool retract(const std::string& point_id, const std::string& annotator_id, std::int64_t timestamp) {
    std::unique_lock lock(mutex_);
    return retract_locked(point_id, annotator_id, timestamp);
  }

  /// Imports Labels JSONL (plus retraction lines). Malformed lines are
  /// counted as rejections.
  IngestResult ingest(std::istream& in) {
    std::unique_lock lock(mutex_);
    return ingest_locked(in);
  }

  std::vector<LabelRecord> records_for(const std::string& point_id) const {
    std::shared_lock lock(mutex_);
    std::vector<LabelRecord> out;
    for (auto it = records_.lower_bound({point_id, ""}); it != records_.end() && it->first.first == point_id;
         ++it)
      out.push_back(it->second);
    return out;
  }

  /// All records ordered by (point_id, annotator_id).
  std::vector<LabelRecord> all() const {
    std::shared_lock lock(mutex_);
    std::vector<LabelRecord> out;
    out.reserve(records_.size());
    for (const auto& [_, r] : records_) out.push_back(r);
    return out;
  }

  std::vector<std::string> point_ids() const {
    std::shared_lock lock(mutex_);
    std::vector<std::string> out;
    for (const auto& [key, _] : records_)
      if (out.empty() || out.back() != key.first) out.push_back(key.first);
    return out;
  }

  std::size_t size() const {
    std::shared_lock lock(mutex_);
    return records_.size();
  }

 private:
  using Key = std::pair<std::string, std::string>;

  void upsert_locked(const LabelRecord& record) {
    if (path_ && !replay_) detail::append_line(*path_, to_json_value(record));
    records_[{record.point_id, record.annotator_id}] = record;
  }

  bool retract_locked(const std::string& point_id, const std::string& annotator_id, std::int64_t ts) {
    auto it = records_.find({point_id, annotator_id});
    if (it == records_.end()) return false;
    if (path_ && !replay_) {
      detail::append_line(*path_, json{{"point_id", point_id},
                                       {"annotator_id", annotator_id},
                                       {"retracted", true},
                                       {"timestamp", ts}});
    }
    records_.erase(it);
    return true;
  }

  IngestResult ingest_locked(std::istream& in) {
    IngestResult result;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (detail::is_blank(line)) continue;
      try {
        const json j = json::parse(line);
        const auto point_id = j.at("point_id").get<std::string>();
        const auto annotator_id = j.at("annotator_id").get<std::string>();
        const auto ts = j.at("timestamp").get<std::int64_t>();
        if (j.value("retracted", false)) {
          retract_locked(point_id, annotator_id, ts);
        } else {
          upsert_locked({point_id, annotator_id, parse_verdict(j.at("verdict").get<std::string>()), ts});
        }
        ++result.accepted;
      } catch (const std::exception&) {
        result.rejected.push_back({line_no, "", "malformed"});
      }
    }
    return result;
  }

  std::optional<std::filesystem::path> path_;
  bool replay_ = false;
  mutable std::shared_mutex mutex_;
  std::map<Key, LabelRecord> records_;
};

}  // namespace driftwatch
