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
 * Workload cluster sampling.
 *
 * A ClusterModel is trained once on historical workload vectors: they are
 * projected to two principal components and grouped with k-means. Incoming
 * points are assigned to their nearest centroid and accepted for labeling
 * with probability min(1, budget / population), where population is the
 * cluster's count over a trailing window. Every cluster whose population is
 * at least the budget therefore contributes `budget` accepted points in
 * expectation, regardless of how common it is.
 *
 * Label diversity is tracked as the Shannon entropy of labeled points over
 * clusters; a month-over-month drop of at least the trigger delta requests a
 * retrain.
 */

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "driftwatch/datamodel.hpp"
#include "driftwatch/error.hpp"
#include "driftwatch/matrix.hpp"
#include "driftwatch/month.hpp"
#include "driftwatch/pca.hpp"
#include "driftwatch/rng.hpp"

namespace driftwatch {

struct ClusterModel {
  PcaModel pca;
  Matrix centroids;                  // K × r, r = pca.k() (2 unless d_w < 2)
  std::vector<double> populations;   // member counts of the training set
  std::int64_t trained_at = 0;
  std::optional<MonthKey> window_start;
  std::optional<MonthKey> window_end;
  std::size_t requested_k = 0;
  bool k_reduced = false;            // fewer distinct points than requested_k

  std::size_t k() const noexcept { return centroids.rows(); }
  friend bool operator==(const ClusterModel&, const ClusterModel&) = default;
};

struct KMeansOptions {
  int max_iterations = 300;
  double tolerance = 1e-6;  // max centroid movement
  int restarts = 10;        // independent seedings; lowest inertia wins
};

namespace detail {

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

/// Nearest centroid; the lowest index wins ties.
inline std::size_t nearest(const Matrix& centroids, std::span<const double> p) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.rows(); ++c) {
    const double d = squared_distance(centroids.row(c), p);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

inline std::size_t count_distinct_rows(const Matrix& m) {
  std::set<std::vector<double>> seen;
  for (std::size_t r = 0; r < m.rows(); ++r) seen.emplace(m.row(r).begin(), m.row(r).end());
  return seen.size();
}

inline Matrix kmeans_plus_plus(const Matrix& pts, std::size_t k, Rng& rng) {
  const std::size_t n = pts.rows();
  Matrix centers;
  centers.append_row(pts.row(rng.index(n)));
  std::vector<double> d2(n);
  for (std::size_t r = 0; r < n; ++r) d2[r] = squared_distance(pts.row(r), centers.row(0));
  while (centers.rows() < k) {
    double total = 0.0;
    for (double v : d2) total += v;
    std::size_t pick = n - 1;
    const double target = rng.uniform() * total;
    double acc = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      acc += d2[r];
      if (d2[r] > 0.0 && acc > target) {
        pick = r;
        break;
      }
    }
    // Guard against rounding: never reuse an existing center.
    if (d2[pick] == 0.0) {
      for (std::size_t r = n; r-- > 0;)
        if (d2[r] > 0.0) {
          pick = r;
          break;
        }
    }
    centers.append_row(pts.row(pick));
    const auto latest = centers.row(centers.rows() - 1);
    for (std::size_t r = 0; r < n; ++r) d2[r] = std::min(d2[r], squared_distance(pts.row(r), latest));
  }
  return centers;
}

inline Matrix lloyd(const Matrix& reduced, Matrix centers, const KMeansOptions& opts) {
  const std::size_t n = reduced.rows();
  const std::size_t k = centers.rows();
  const std::size_t r_dim = reduced.cols();
  std::vector<std::size_t> assignment(n, 0);
  for (int iter = 0; iter < opts.max_iterations; ++iter) {
    for (std::size_t i = 0; i < n; ++i) assignment[i] = nearest(centers, reduced.row(i));
    Matrix sums(k, r_dim);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++counts[assignment[i]];
      for (std::size_t c = 0; c < r_dim; ++c) sums(assignment[i], c) += reduced(i, c);
    }
    double moved = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      if (counts[j] == 0) continue;  // empty cluster keeps its center
      double shift = 0.0;
      for (std::size_t c = 0; c < r_dim; ++c) {
        const double next = sums(j, c) / static_cast<double>(counts[j]);
        shift += (next - centers(j, c)) * (next - centers(j, c));
        centers(j, c) = next;
      }
      moved = std::max(moved, std::sqrt(shift));
    }
    if (moved < opts.tolerance) break;
  }
  return centers;
}

}  // namespace detail

/// Fits the PCA projection and k-means clusters on historical workload rows.
inline ClusterModel train_clusters(const Matrix& workload, std::size_t k, std::uint64_t seed,
                                   const KMeansOptions& opts = {}) {
  const std::size_t n = workload.rows();
  if (k == 0) throw Error(Errc::InvalidRank, "cluster count must be at least 1");
  if (n < k) throw Error(Errc::InsufficientData, "need at least K=" + std::to_string(k) + " points, got " +
                                                     std::to_string(n));
  ClusterModel model;
  model.requested_k = k;
  model.pca = fit_pca(workload, std::min<std::size_t>({2, workload.cols(), n}));
  const Matrix reduced = transform(model.pca, workload);

  const std::size_t distinct = detail::count_distinct_rows(reduced);
  if (distinct < k) {
    k = distinct;
    model.k_reduced = true;
  }

  double best_inertia = std::numeric_limits<double>::infinity();
  Matrix best;
  for (int attempt = 0; attempt < std::max(1, opts.restarts); ++attempt) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(attempt)));
    Matrix centers = detail::lloyd(reduced, detail::kmeans_plus_plus(reduced, k, rng), opts);
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      inertia += detail::squared_distance(centers.row(detail::nearest(centers, reduced.row(i))), reduced.row(i));
    if (inertia < best_inertia) {
      best_inertia = inertia;
      best = std::move(centers);
    }
  }

  model.centroids = std::move(best);
  model.populations.assign(k, 0.0);
  for (std::size_t i = 0; i < n; ++i) model.populations[detail::nearest(model.centroids, reduced.row(i))] += 1.0;
  return model;
}

inline std::size_t assign_reduced(const ClusterModel& model, std::span<const double> reduced) {
  return detail::nearest(model.centroids, reduced);
}

/// Nearest-centroid cluster of a raw workload vector.
inline std::size_t assign(const ClusterModel& model, std::span<const double> workload) {
  return assign_reduced(model, transform_row(model.pca, workload));
}

struct AcceptanceProbability {
  double value = 1.0;
  bool starved = false;  // cluster unseen in the window; always sampled
};

inline AcceptanceProbability acceptance_probability(const ClusterModel& model, std::size_t cluster_index,
                                                    double budget_per_cluster,
                                                    std::span<const double> window_population) {
  if (window_population.size() != model.k())
    throw Error(Errc::InvalidDimension, "window population must have one entry per cluster");
  if (cluster_index >= model.k()) throw Error(Errc::InvalidDimension, "cluster index out of range");
  const double pop = window_population[cluster_index];
  if (!(pop > 0.0)) return {1.0, true};
  return {std::min(1.0, budget_per_cluster / pop), false};
}

struct SamplingDecision {
  std::string point_id;
  MonthKey month;
  std::size_t cluster_index = 0;
  double acceptance_probability = 0.0;
  bool accepted = false;
  double rng_draw = 0.0;
  bool starved = false;
  std::optional<std::string> skipped;  // reason the point could not be assigned

  friend bool operator==(const SamplingDecision&, const SamplingDecision&) = default;
};

inline nlohmann::json to_json_value(const SamplingDecision& d) {
  nlohmann::json j{{"point_id", d.point_id},
                   {"month", d.month.to_string()},
                   {"cluster", d.cluster_index},
                   {"acceptance_probability", d.acceptance_probability},
                   {"rng_draw", d.rng_draw},
                   {"accepted", d.accepted},
                   {"starved", d.starved}};
  if (d.skipped) j["skipped"] = *d.skipped;
  return j;
}

struct SamplerOptions {
  double budget_per_cluster = 50.0;
  int window_months = 1;  // trailing calendar months used for populations
  std::uint64_t seed = 0;
};

/// Online inverse-population sampler. One consumer owns an instance; the
/// model may be swapped between offers (e.g. after a retrain), which resets
/// the trailing counts because cluster indices change meaning.
class StreamSampler {
 public:
  StreamSampler(std::shared_ptr<const ClusterModel> model, SamplerOptions opts)
      : model_(std::move(model)), opts_(opts), rng_(opts.seed) {
    if (!model_) throw Error(Errc::PreconditionViolation, "sampler needs a trained model");
  }

  /// Seeds the trailing counts for a month that was not streamed through
  /// this instance.
  void prime(MonthKey month, std::vector<double> counts) {
    if (counts.size() != model_->k()) throw Error(Errc::InvalidDimension, "prime counts size mismatch");
    counts_[month] = std::move(counts);
  }

  /// Per-cluster counts over the trailing window before `month`. Falls back
  /// to the training populations when the window holds no observations.
  std::vector<double> window_population(MonthKey month) const {
    std::vector<double> pop(model_->k(), 0.0);
    double total = 0.0;
    MonthKey m = month;
    for (int i = 0; i < opts_.window_months; ++i) {
      m = m.prev();
      auto it = counts_.find(m);
      if (it == counts_.end()) continue;
      for (std::size_t c = 0; c < pop.size(); ++c) {
        pop[c] += it->second[c];
        total += it->second[c];
      }
    }
    if (total == 0.0) return model_->populations;
    return pop;
  }

  SamplingDecision offer(const TelemetryPoint& point) {
    SamplingDecision d;
    d.point_id = point.point_id;
    d.month = point.month();
    try {
      d.cluster_index = assign(*model_, point.workload);
    } catch (const Error& e) {
      d.skipped = e.what();
      return d;
    }
    const auto pop = window_population(d.month);
    const auto p = acceptance_probability(*model_, d.cluster_index, opts_.budget_per_cluster, pop);
    d.acceptance_probability = p.value;
    d.starved = p.starved;
    d.rng_draw = rng_.uniform();
    d.accepted = d.rng_draw < d.acceptance_probability;

    auto& month_counts = counts_[d.month];
    if (month_counts.empty()) month_counts.assign(model_->k(), 0.0);
    month_counts[d.cluster_index] += 1.0;
    return d;
  }

  void swap_model(std::shared_ptr<const ClusterModel> model) {
    if (!model) throw Error(Errc::PreconditionViolation, "sampler needs a trained model");
    model_ = std::move(model);
    counts_.clear();
  }

  const std::shared_ptr<const ClusterModel>& model() const { return model_; }
  const SamplerOptions& options() const { return opts_; }

 private:
  std::shared_ptr<const ClusterModel> model_;
  SamplerOptions opts_;
  Rng rng_;
  std::map<MonthKey, std::vector<double>> counts_;
};

inline std::vector<SamplingDecision> sample_stream(const ClusterModel& model, std::span<const TelemetryPoint> points,
                                                   double budget_per_cluster, std::uint64_t seed,
                                                   int window_months = 1) {
  StreamSampler sampler(std::make_shared<const ClusterModel>(model),
                        SamplerOptions{budget_per_cluster, window_months, seed});
  std::vector<SamplingDecision> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(sampler.offer(p));
  return out;
}

// ---------------------------------------------------------------------------
// Label diversity

/// Shannon entropy of a count vector; empty cells contribute nothing.
inline double shannon_entropy(std::span<const double> counts, double base = 2.0) {
  double total = 0.0;
  for (double c : counts) total += c;
  if (total <= 0.0) return 0.0;
  const bool bits = base == 2.0;
  const double ln_base = std::log(base);
  double h = 0.0;
  for (double c : counts) {
    if (c <= 0.0) continue;
    const double p = c / total;
    h -= p * (bits ? std::log2(p) : std::log(p) / ln_base);
  }
  return std::max(0.0, h);
}

struct EntropyOptions {
  double base = 2.0;
  double trigger_delta = 0.25;
};

struct EntropyReport {
  MonthKey month;
  std::vector<double> cluster_counts;
  double entropy = 0.0;  // in units of `base`
  double base = 2.0;
  std::optional<double> previous_entropy;
  bool retrain_triggered = false;
  bool no_labels = false;
};

/// True when entropy fell by at least `delta` since the previous month.
inline bool retrain_triggered(std::optional<double> previous, double current, double delta = 0.25) {
  // Absolute slack keeps decimal deltas such as 1.85 - 1.60 on the firing side.
  constexpr double kSlack = 1e-12;
  return previous && (*previous - current >= delta - kSlack);
}

inline EntropyReport entropy_report(MonthKey month, std::vector<double> cluster_counts,
                                    const std::optional<EntropyReport>& previous, const EntropyOptions& opts = {}) {
  EntropyReport r;
  r.month = month;
  r.base = opts.base;
  double total = 0.0;
  for (double c : cluster_counts) total += c;
  r.no_labels = total <= 0.0;
  r.entropy = r.no_labels ? 0.0 : shannon_entropy(cluster_counts, opts.base);
  r.cluster_counts = std::move(cluster_counts);
  if (previous && !previous->no_labels) r.previous_entropy = previous->entropy;
  r.retrain_triggered = !r.no_labels && retrain_triggered(r.previous_entropy, r.entropy, opts.trigger_delta);
  return r;
}

/// Entropy over clusters of the month's resolved labels. `workload_of` maps a
/// point_id to its workload vector (std::nullopt when unknown).
template <class WorkloadLookup>
EntropyReport entropy_report(MonthKey month, std::span<const AggregatedLabel> labels, const ClusterModel& model,
                             WorkloadLookup&& workload_of, const std::optional<EntropyReport>& previous,
                             const EntropyOptions& opts = {}) {
  std::vector<double> counts(model.k(), 0.0);
  for (const auto& label : labels) {
    if (label.status != CardStatus::Resolved) continue;
    const std::optional<std::vector<double>> w = workload_of(label.point_id);
    if (!w) throw Error(Errc::PreconditionViolation, "labeled point " + label.point_id + " not in store");
    counts[assign(model, *w)] += 1.0;
  }
  return entropy_report(month, std::move(counts), previous, opts);
}

inline nlohmann::json to_json_value(const EntropyReport& r) {
  nlohmann::json j{{"month", r.month.to_string()},
                   {"cluster_counts", r.cluster_counts},
                   {"entropy", r.entropy},
                   {"base", r.base},
                   {"retrain_triggered", r.retrain_triggered},
                   {"status", r.no_labels ? "no_labels" : "ok"}};
  j["previous_entropy"] = r.previous_entropy ? nlohmann::json(*r.previous_entropy) : nlohmann::json(nullptr);
  return j;
}

// ---------------------------------------------------------------------------

inline nlohmann::json to_json_value(const ClusterModel& m) {
  std::vector<std::vector<double>> centroids;
  for (std::size_t r = 0; r < m.centroids.rows(); ++r)
    centroids.emplace_back(m.centroids.row(r).begin(), m.centroids.row(r).end());
  nlohmann::json j{{"pca", to_json_value(m.pca)},
                   {"centroids", centroids},
                   {"populations", m.populations},
                   {"trained_at", m.trained_at},
                   {"requested_k", m.requested_k},
                   {"k_reduced", m.k_reduced}};
  j["training_window"] = {
      {"start", m.window_start ? nlohmann::json(m.window_start->to_string()) : nlohmann::json(nullptr)},
      {"end", m.window_end ? nlohmann::json(m.window_end->to_string()) : nlohmann::json(nullptr)}};
  return j;
}

inline ClusterModel cluster_model_from_json(const nlohmann::json& j) {
  ClusterModel m;
  try {
    m.pca = pca_from_json(j.at("pca"));
    for (const auto& row : j.at("centroids")) m.centroids.append_row(row.get<std::vector<double>>());
    m.populations = j.at("populations").get<std::vector<double>>();
    m.trained_at = j.value("trained_at", std::int64_t{0});
    m.requested_k = j.value("requested_k", m.centroids.rows());
    m.k_reduced = j.value("k_reduced", false);
    if (j.contains("training_window")) {
      const auto& w = j["training_window"];
      if (w.contains("start") && w["start"].is_string()) m.window_start = MonthKey::parse(w["start"].get<std::string>());
      if (w.contains("end") && w["end"].is_string()) m.window_end = MonthKey::parse(w["end"].get<std::string>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, std::string("cluster model: ") + e.what());
  }
  if (m.centroids.rows() == 0 || m.populations.size() != m.centroids.rows() || m.centroids.cols() != m.pca.k())
    throw Error(Errc::ParseError, "cluster model shapes are inconsistent");
  return m;
}

}  // namespace driftwatch
