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

// Store-level operations shared by the CLI commands and the service:
// model training and persistence, monthly sampling, drift with history
// recomputed from the store, entropy, and the report/event files.
//
// Report layout under reports_dir:
//   drift-<kind>-<YYYY-MM>.json   one DriftReport
//   entropy-<YYYY-MM>.json        one EntropyReport
//   sampling-<YYYY-MM>.jsonl      one SamplingDecision per line
//   events.jsonl                  retrain recommendations, swaps, delivery failures

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "driftwatch/config.hpp"
#include "driftwatch/datamodel.hpp"
#include "driftwatch/drift.hpp"
#include "driftwatch/labelflow.hpp"
#include "driftwatch/sampling.hpp"

namespace driftwatch {

// ---------------------------------------------------------------------------
// Files

inline void write_json_file(const std::filesystem::path& path, const nlohmann::json& j) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw Error(Errc::IoError, "cannot write " + tmp);
    out << j.dump(2) << '\n';
    if (!out) throw Error(Errc::IoError, "write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);  // readers never see a partial file
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot read " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, path.string() + ": " + e.what());
  }
}

inline void append_event(const std::filesystem::path& reports_dir, nlohmann::json event) {
  std::filesystem::create_directories(reports_dir);
  detail::append_line(reports_dir / "events.jsonl", event);
}

inline std::filesystem::path drift_report_path(const std::filesystem::path& dir, DriftKind kind, MonthKey month) {
  return dir / ("drift-" + std::string(to_string(kind)) + "-" + month.to_string() + ".json");
}

/// Stored drift reports of one kind, ascending by month.
inline std::vector<DriftReport> load_drift_reports(const std::filesystem::path& dir, DriftKind kind) {
  std::vector<DriftReport> out;
  if (!std::filesystem::is_directory(dir)) return out;
  const std::string prefix = "drift-" + std::string(to_string(kind)) + "-";
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (name.rfind(prefix, 0) != 0 || entry.path().extension() != ".json") continue;
    out.push_back(drift_report_from_json(read_json_file(entry.path())));
  }
  std::sort(out.begin(), out.end(), [](const DriftReport& a, const DriftReport& b) { return a.month < b.month; });
  return out;
}

// ---------------------------------------------------------------------------
// Cluster model

/// Workload rows of every month in [first, last].
inline Matrix workload_between(const PointStore& store, MonthKey first, MonthKey last) {
  Matrix out;
  for (MonthKey m = first; m <= last; m = m.next())
    for (const auto& p : store.points_in(m)) out.append_row(p.workload);
  return out;
}

inline ClusterModel train_model(const PointStore& store, MonthKey first, MonthKey last, std::size_t k,
                                std::uint64_t seed, std::int64_t trained_at) {
  if (last < first) throw Error(Errc::EmptyPeriod, "training range is empty");
  const Matrix w = workload_between(store, first, last);
  if (w.rows() == 0)
    throw Error(Errc::EmptyPeriod, "no points in " + first.to_string() + ".." + last.to_string());
  ClusterModel model = train_clusters(w, k, seed);
  model.trained_at = trained_at;
  model.window_start = first;
  model.window_end = last;
  return model;
}

inline void save_model(const std::filesystem::path& path, const ClusterModel& model) {
  write_json_file(path, to_json_value(model));
}

inline ClusterModel load_model(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path))
    throw Error(Errc::PreconditionViolation, "no cluster model at " + path.string() + "; run train-clusters");
  return cluster_model_from_json(read_json_file(path));
}

inline std::vector<double> cluster_counts(const PointStore& store, const ClusterModel& model, MonthKey month) {
  std::vector<double> counts(model.k(), 0.0);
  for (const auto& p : store.points_in(month)) counts[assign(model, p.workload)] += 1.0;
  return counts;
}

// ---------------------------------------------------------------------------
// Sampling and cards

/// Sampler over one month of stored points. The trailing window is primed
/// from the store; the RNG stream is mix_seed(seed, month ordinal) so months
/// can be sampled independently and in any order.
inline std::vector<SamplingDecision> sample_month(const PointStore& store, const ClusterModel& model, MonthKey month,
                                                  double budget_per_cluster, int window_months, std::uint64_t seed) {
  const auto points = store.points_in(month);
  if (points.empty()) throw Error(Errc::EmptyPeriod, "no points in " + month.to_string());
  StreamSampler sampler(std::make_shared<const ClusterModel>(model),
                        SamplerOptions{budget_per_cluster, window_months,
                                       mix_seed(seed, static_cast<std::uint64_t>(month.ordinal()))});
  MonthKey m = month;
  for (int i = 0; i < window_months; ++i) {
    m = m.prev();
    auto counts = cluster_counts(store, model, m);
    if (std::any_of(counts.begin(), counts.end(), [](double c) { return c > 0; })) sampler.prime(m, std::move(counts));
  }
  std::vector<SamplingDecision> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(sampler.offer(p));
  return out;
}

/// The entity's points within ±context_seconds of the point.
inline std::vector<TelemetryPoint> card_context(const PointStore& store, const TelemetryPoint& point,
                                                const CardOptions& opts) {
  std::vector<TelemetryPoint> out;
  for (auto& p : store.points_between(point.timestamp - opts.context_seconds, point.timestamp + opts.context_seconds + 1))
    if (p.entity_id == point.entity_id) out.push_back(std::move(p));
  return out;
}

inline CandidateCard card_for(const PointStore& store, const TelemetryPoint& point, const SamplingDecision& decision,
                              const PipelineConfig& cfg, std::int64_t created_at) {
  const auto context = card_context(store, point, cfg.labeling.card);
  return compose_card(point, decision, cfg.labeling.link_templates, context, created_at, cfg.labeling.card);
}

// ---------------------------------------------------------------------------
// Labels as of a time

/// Final statuses as stored; pending cards evaluated at `as_of` without
/// touching the board.
inline std::vector<AggregatedLabel> labels_as_of(const LabelBoard& board, std::optional<MonthKey> month,
                                                 std::int64_t as_of) {
  std::vector<AggregatedLabel> out;
  for (const auto& card : board.cards()) {
    if (month && card.month() != *month) continue;
    if (card.status != CardStatus::Pending) {
      out.push_back(board.label(card.point_id));
    } else {
      const auto records = board.records_for(card.point_id);
      out.push_back(aggregate_votes(card.point_id, records, card.created_at, as_of, board.options()));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Drift and entropy

/// Report for `month` thresholded against the KLs of every evaluable
/// earlier month in the store.
inline DriftReport drift_for_month(const PointStore& store, DriftKind kind, MonthKey month, const ClusterModel* model,
                                   std::uint64_t seed, const DriftOptions& opts) {
  if (kind == DriftKind::SysPerf && model == nullptr)
    throw Error(Errc::PreconditionViolation, "system-performance drift needs a cluster model");
  std::vector<double> history;
  const auto months = store.months();
  if (!months.empty() && months.front() < month) {
    for (const auto& r : drift_series(store, kind, months.front(), month.prev(), model, seed, opts))
      if (r.kl) history.push_back(r.kl->value);
  }
  return kind == DriftKind::Workload ? workload_drift(store, month, history, opts)
                                     : sysperf_drift(store, month, *model, history, seed, opts);
}

inline EntropyReport entropy_for_month(const PointStore& store, const LabelBoard& board, const ClusterModel& model,
                                       MonthKey month, std::int64_t as_of, const EntropyOptions& opts) {
  auto lookup = [&](const std::string& id) -> std::optional<std::vector<double>> {
    auto p = store.find(id);
    if (!p) return std::nullopt;
    return p->workload;
  };
  const auto prev_labels = labels_as_of(board, month.prev(), as_of);
  std::optional<EntropyReport> previous;
  if (!prev_labels.empty()) previous = entropy_report(month.prev(), prev_labels, model, lookup, std::nullopt, opts);
  const auto labels = labels_as_of(board, month, as_of);
  return entropy_report(month, labels, model, lookup, previous, opts);
}

}  // namespace driftwatch
