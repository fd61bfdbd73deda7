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
 * Month-over-month distribution drift.
 *
 * Both paths follow the same shape: take the feature matrices of a month and
 * its predecessor, fit one PCA (k = 2) on their union, project each month
 * separately, and measure KL(previous || current) between the projected
 * sets. A month is flagged when its KL exceeds mean + 2 sd of the KL values
 * of earlier months (population sd, active once three earlier values exist).
 *
 * Workload drift feeds cluster recomputation. System-performance drift first
 * equalizes the workload mix: every (cluster, month) cell contributes the
 * same number of perf vectors, so a shift in workload mix alone cannot show
 * up as a perf drift. A perf exceedance is only ever flagged for human
 * review.
 */

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "driftwatch/datamodel.hpp"
#include "driftwatch/error.hpp"
#include "driftwatch/linalg.hpp"
#include "driftwatch/matrix.hpp"
#include "driftwatch/month.hpp"
#include "driftwatch/pca.hpp"
#include "driftwatch/rng.hpp"
#include "driftwatch/sampling.hpp"

namespace driftwatch {

enum class KlMethod { GaussianClosedForm, Histogram };
enum class KlDirection { PreviousToCurrent, CurrentToPrevious };
enum class DriftKind { Workload, SysPerf };
enum class DriftAction { None, RecomputeClusters, FlagForReview };
enum class ReviewStatus { Unreviewed, Expected, Unexpected };

inline std::string_view to_string(KlMethod m) { return m == KlMethod::GaussianClosedForm ? "gaussian" : "histogram"; }
inline std::string_view to_string(KlDirection d) {
  return d == KlDirection::PreviousToCurrent ? "previous_to_current" : "current_to_previous";
}
inline std::string_view to_string(DriftKind k) { return k == DriftKind::Workload ? "workload" : "sysperf"; }
inline std::string_view to_string(DriftAction a) {
  switch (a) {
    case DriftAction::None: return "none";
    case DriftAction::RecomputeClusters: return "recompute_clusters";
    case DriftAction::FlagForReview: return "flag_for_review";
  }
  return "none";
}
inline std::string_view to_string(ReviewStatus r) {
  switch (r) {
    case ReviewStatus::Unreviewed: return "unreviewed";
    case ReviewStatus::Expected: return "expected";
    case ReviewStatus::Unexpected: return "unexpected";
  }
  return "unreviewed";
}

inline KlMethod parse_kl_method(std::string_view s) {
  if (s == "gaussian") return KlMethod::GaussianClosedForm;
  if (s == "histogram") return KlMethod::Histogram;
  throw Error(Errc::ConfigError, "kl method must be gaussian|histogram");
}
inline KlDirection parse_kl_direction(std::string_view s) {
  if (s == "previous_to_current") return KlDirection::PreviousToCurrent;
  if (s == "current_to_previous") return KlDirection::CurrentToPrevious;
  throw Error(Errc::ConfigError, "kl direction must be previous_to_current|current_to_previous");
}
inline DriftKind parse_drift_kind(std::string_view s) {
  if (s == "workload") return DriftKind::Workload;
  if (s == "sysperf") return DriftKind::SysPerf;
  throw Error(Errc::ParseError, "drift kind must be workload|sysperf");
}
inline DriftAction parse_drift_action(std::string_view s) {
  if (s == "none") return DriftAction::None;
  if (s == "recompute_clusters") return DriftAction::RecomputeClusters;
  if (s == "flag_for_review") return DriftAction::FlagForReview;
  throw Error(Errc::ParseError, "unknown drift action");
}
inline ReviewStatus parse_review_status(std::string_view s) {
  if (s == "unreviewed") return ReviewStatus::Unreviewed;
  if (s == "expected") return ReviewStatus::Expected;
  if (s == "unexpected") return ReviewStatus::Unexpected;
  throw Error(Errc::ParseError, "review must be unreviewed|expected|unexpected");
}

struct KlEstimate {
  double value = 0.0;
  KlMethod method = KlMethod::GaussianClosedForm;
  std::size_t n_first = 0;   // rows of the reference distribution P
  std::size_t n_second = 0;  // rows of the comparison distribution Q
  bool regularized = false;  // covariance ridge was needed

  friend bool operator==(const KlEstimate&, const KlEstimate&) = default;
};

// ---------------------------------------------------------------------------
// Estimators

struct GaussianFit {
  std::vector<double> mean;
  Matrix cov;  // sample covariance, denominator n - 1
};

inline GaussianFit fit_gaussian(const Matrix& x) {
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  if (n < 2) throw Error(Errc::InsufficientData, "Gaussian fit needs at least 2 rows");
  GaussianFit g{std::vector<double>(d, 0.0), Matrix(d, d)};
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) g.mean[c] += x(r, c);
  for (double& m : g.mean) m /= static_cast<double>(n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = i; j < d; ++j) g.cov(i, j) += (x(r, i) - g.mean[i]) * (x(r, j) - g.mean[j]);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i; j < d; ++j) g.cov(j, i) = g.cov(i, j) /= static_cast<double>(n - 1);
  return g;
}

/// Closed-form KL(P || Q) for multivariate normals. Throws
/// DegenerateDistribution when either covariance is not positive definite.
inline double gaussian_kl(const GaussianFit& p, const GaussianFit& q) {
  const std::size_t d = p.mean.size();
  if (q.mean.size() != d) throw Error(Errc::InvalidDimension, "Gaussian dimension mismatch");
  const auto lp = linalg::cholesky(p.cov);
  const auto lq = linalg::cholesky(q.cov);
  if (!lp || !lq) throw Error(Errc::DegenerateDistribution, "covariance is singular");

  double trace_term = 0.0;
  std::vector<double> col(d);
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t i = 0; i < d; ++i) col[i] = p.cov(i, j);
    trace_term += linalg::cholesky_solve(*lq, col)[j];
  }
  std::vector<double> diff(d);
  for (std::size_t i = 0; i < d; ++i) diff[i] = q.mean[i] - p.mean[i];
  const double mahalanobis = dot(diff, linalg::cholesky_solve(*lq, diff));
  const double log_det_ratio = linalg::log_det_from_cholesky(*lq) - linalg::log_det_from_cholesky(*lp);
  const double kl = 0.5 * (trace_term + mahalanobis - static_cast<double>(d) + log_det_ratio);
  return std::max(0.0, kl);  // rounding can produce -1e-16 for identical inputs
}

/// KL(P_a || P_b) between Gaussians fitted to the rows of a and b. A ridge of
/// 1e-9 * trace / d is added to both covariances only when one of them is
/// not numerically positive definite.
inline KlEstimate kl_gaussian(const Matrix& a, const Matrix& b) {
  if (a.rows() < 3 || b.rows() < 3) throw Error(Errc::InsufficientData, "KL needs at least 3 rows per set");
  if (a.cols() != b.cols()) throw Error(Errc::InvalidDimension, "KL inputs differ in dimensionality");
  GaussianFit p = fit_gaussian(a);
  GaussianFit q = fit_gaussian(b);
  KlEstimate est{0.0, KlMethod::GaussianClosedForm, a.rows(), b.rows(), false};
  if (linalg::cholesky(p.cov) && linalg::cholesky(q.cov)) {
    est.value = gaussian_kl(p, q);
    return est;
  }
  const double d = static_cast<double>(a.cols());
  for (GaussianFit* g : {&p, &q}) {
    const double ridge = 1e-9 * linalg::trace(g->cov) / d;
    for (std::size_t i = 0; i < a.cols(); ++i) g->cov(i, i) += ridge;
  }
  est.regularized = true;
  est.value = gaussian_kl(p, q);
  return est;
}

/// KL(P_a || P_b) between histograms on a shared grid spanning the union
/// bounding box, with `alpha` pseudo-counts per cell so no cell is empty.
inline KlEstimate kl_histogram(const Matrix& a, const Matrix& b, std::size_t bins_per_axis, double alpha = 0.5) {
  if (bins_per_axis == 0) throw Error(Errc::InvalidRank, "bins_per_axis must be positive");
  if (a.rows() < bins_per_axis || b.rows() < bins_per_axis)
    throw Error(Errc::InsufficientData, "histogram KL needs at least bins_per_axis rows per set");
  if (a.cols() != b.cols()) throw Error(Errc::InvalidDimension, "KL inputs differ in dimensionality");
  const std::size_t d = a.cols();
  if (d == 0 || d > 3) throw Error(Errc::InvalidDimension, "histogram KL supports 1 to 3 dimensions");

  std::vector<double> lo(d, std::numeric_limits<double>::infinity());
  std::vector<double> hi(d, -std::numeric_limits<double>::infinity());
  for (const Matrix* m : {&a, &b})
    for (std::size_t r = 0; r < m->rows(); ++r)
      for (std::size_t c = 0; c < d; ++c) {
        lo[c] = std::min(lo[c], (*m)(r, c));
        hi[c] = std::max(hi[c], (*m)(r, c));
      }
  bool any_extent = false;
  for (std::size_t c = 0; c < d; ++c) any_extent = any_extent || hi[c] > lo[c];
  if (!any_extent) throw Error(Errc::DegenerateDistribution, "all points identical");

  std::size_t cells = 1;
  for (std::size_t c = 0; c < d; ++c) cells *= bins_per_axis;
  auto cell_of = [&](std::span<const double> row) {
    std::size_t idx = 0;
    for (std::size_t c = 0; c < d; ++c) {
      std::size_t bin = 0;
      if (hi[c] > lo[c]) {
        const double u = (row[c] - lo[c]) / (hi[c] - lo[c]);
        bin = std::min(bins_per_axis - 1, static_cast<std::size_t>(u * static_cast<double>(bins_per_axis)));
      }
      idx = idx * bins_per_axis + bin;
    }
    return idx;
  };
  std::vector<double> ca(cells, 0.0);
  std::vector<double> cb(cells, 0.0);
  for (std::size_t r = 0; r < a.rows(); ++r) ca[cell_of(a.row(r))] += 1.0;
  for (std::size_t r = 0; r < b.rows(); ++r) cb[cell_of(b.row(r))] += 1.0;

  const double za = static_cast<double>(a.rows()) + alpha * static_cast<double>(cells);
  const double zb = static_cast<double>(b.rows()) + alpha * static_cast<double>(cells);
  double kl = 0.0;
  for (std::size_t i = 0; i < cells; ++i) {
    const double p = (ca[i] + alpha) / za;
    const double q = (cb[i] + alpha) / zb;
    kl += p * std::log(p / q);
  }
  return {std::max(0.0, kl), KlMethod::Histogram, a.rows(), b.rows(), false};
}

// ---------------------------------------------------------------------------
// Reports

struct DriftOptions {
  KlMethod method = KlMethod::GaussianClosedForm;
  KlDirection direction = KlDirection::PreviousToCurrent;
  std::size_t histogram_bins = 10;
  std::size_t min_history = 3;
  double sigmas = 2.0;
  std::optional<double> fixed_threshold;  // set: compare against this instead of mean + sigmas*sd
};

/// mean + sigmas * sd (population) of the history, or nullopt while the
/// history holds fewer than `min_history` values.
inline std::optional<double> drift_threshold(std::span<const double> history, std::size_t min_history = 3,
                                             double sigmas = 2.0) {
  if (history.empty() || history.size() < min_history) return std::nullopt;
  const double n = static_cast<double>(history.size());
  const double mean = std::accumulate(history.begin(), history.end(), 0.0) / n;
  double ss = 0.0;
  for (double h : history) ss += (h - mean) * (h - mean);
  return mean + sigmas * std::sqrt(ss / n);
}

struct DriftReport {
  DriftKind kind = DriftKind::Workload;
  MonthKey month;
  std::optional<KlEstimate> kl;
  std::vector<double> history;
  std::optional<double> threshold;
  bool exceeded = false;
  DriftAction action = DriftAction::None;
  KlDirection direction = KlDirection::PreviousToCurrent;
  bool degenerate = false;
  std::string note;
  // SysPerf only.
  std::vector<std::size_t> excluded_clusters;
  std::size_t selected_per_cell = 0;
  ReviewStatus review = ReviewStatus::Unreviewed;
};

namespace detail {

inline KlEstimate estimate_kl(const Matrix& prev, const Matrix& curr, const DriftOptions& opts) {
  const Matrix& p = opts.direction == KlDirection::PreviousToCurrent ? prev : curr;
  const Matrix& q = opts.direction == KlDirection::PreviousToCurrent ? curr : prev;
  return opts.method == KlMethod::GaussianClosedForm ? kl_gaussian(p, q) : kl_histogram(p, q, opts.histogram_bins);
}

inline void apply_threshold(DriftReport& report, std::span<const double> history, const DriftOptions& opts) {
  report.history.assign(history.begin(), history.end());
  if (report.degenerate || !report.kl) {
    report.action = DriftAction::FlagForReview;
    return;
  }
  report.threshold = opts.fixed_threshold ? opts.fixed_threshold
                                          : drift_threshold(history, opts.min_history, opts.sigmas);
  report.exceeded = report.threshold && report.kl->value > *report.threshold;
  if (report.exceeded)
    report.action = report.kind == DriftKind::Workload ? DriftAction::RecomputeClusters : DriftAction::FlagForReview;
}

}  // namespace detail

/// Joint PCA (k = 2) on prev ∪ curr, then KL between the projected sets.
inline KlEstimate reduced_kl(const Matrix& prev, const Matrix& curr, const DriftOptions& opts = {}) {
  const Matrix all = vstack(prev, curr);
  const auto pca = fit_pca(all, std::min<std::size_t>({2, all.cols(), all.rows()}));
  return detail::estimate_kl(transform(pca, prev), transform(pca, curr), opts);
}

inline DriftReport workload_drift(const Matrix& prev, const Matrix& curr, MonthKey month,
                                  std::span<const double> history, const DriftOptions& opts = {}) {
  DriftReport report;
  report.kind = DriftKind::Workload;
  report.month = month;
  report.direction = opts.direction;
  try {
    report.kl = reduced_kl(prev, curr, opts);
  } catch (const Error& e) {
    if (e.code() != Errc::DegenerateDistribution) throw;
    report.degenerate = true;
    report.note = e.what();
  }
  detail::apply_threshold(report, history, opts);
  return report;
}

inline DriftReport workload_drift(const PointStore& store, MonthKey month, std::span<const double> history,
                                  const DriftOptions& opts = {}) {
  const Matrix prev = store.points_in_month(month.prev(), FeatureKind::Workload);
  const Matrix curr = store.points_in_month(month, FeatureKind::Workload);
  return workload_drift(prev, curr, month, history, opts);
}

struct MonthFeatures {
  Matrix workload;
  Matrix perf;
};

/// Equal-per-cluster perf samples for two months. Returns the selected rows
/// of each month and fills the stratification fields of `report`.
inline std::pair<Matrix, Matrix> stratify_perf(const MonthFeatures& prev, const MonthFeatures& curr,
                                               const ClusterModel& model, std::uint64_t seed, DriftReport& report) {
  const std::size_t k = model.k();
  std::vector<std::vector<std::size_t>> cells[2] = {std::vector<std::vector<std::size_t>>(k),
                                                    std::vector<std::vector<std::size_t>>(k)};
  const MonthFeatures* months[2] = {&prev, &curr};
  for (int m = 0; m < 2; ++m) {
    if (months[m]->workload.rows() != months[m]->perf.rows())
      throw Error(Errc::InvalidDimension, "workload and perf row counts differ");
    for (std::size_t r = 0; r < months[m]->workload.rows(); ++r)
      cells[m][assign(model, months[m]->workload.row(r))].push_back(r);
  }

  report.excluded_clusters.clear();
  std::size_t m_star = std::numeric_limits<std::size_t>::max();
  for (std::size_t c = 0; c < k; ++c) {
    if (cells[0][c].empty() || cells[1][c].empty()) {
      report.excluded_clusters.push_back(c);
      continue;
    }
    m_star = std::min({m_star, cells[0][c].size(), cells[1][c].size()});
  }
  if (report.excluded_clusters.size() == k)
    throw Error(Errc::EmptyPeriod, "no workload cluster is populated in both months");
  if (m_star < 3)
    throw Error(Errc::InsufficientStratifiedSample,
                "smallest (cluster, month) cell holds " + std::to_string(m_star) + " points");
  report.selected_per_cell = m_star;

  Rng rng(seed);
  Matrix selected[2];
  for (std::size_t c = 0; c < k; ++c) {
    if (cells[0][c].empty() || cells[1][c].empty()) continue;
    for (int m = 0; m < 2; ++m) {
      auto& idx = cells[m][c];
      // Partial Fisher-Yates: the first m* entries become a uniform sample.
      for (std::size_t i = 0; i < m_star; ++i) std::swap(idx[i], idx[i + rng.index(idx.size() - i)]);
      for (std::size_t i = 0; i < m_star; ++i) selected[m].append_row(months[m]->perf.row(idx[i]));
    }
  }
  return {std::move(selected[0]), std::move(selected[1])};
}

inline DriftReport sysperf_drift(const MonthFeatures& prev, const MonthFeatures& curr, MonthKey month,
                                 const ClusterModel& model, std::span<const double> history, std::uint64_t seed,
                                 const DriftOptions& opts = {}) {
  DriftReport report;
  report.kind = DriftKind::SysPerf;
  report.month = month;
  report.direction = opts.direction;
  const auto [sel_prev, sel_curr] =
      stratify_perf(prev, curr, model, mix_seed(seed, static_cast<std::uint64_t>(month.ordinal())), report);
  try {
    report.kl = reduced_kl(sel_prev, sel_curr, opts);
  } catch (const Error& e) {
    if (e.code() != Errc::DegenerateDistribution) throw;
    report.degenerate = true;
    report.note = e.what();
  }
  detail::apply_threshold(report, history, opts);
  return report;
}

inline DriftReport sysperf_drift(const PointStore& store, MonthKey month, const ClusterModel& model,
                                 std::span<const double> history, std::uint64_t seed, const DriftOptions& opts = {}) {
  const MonthFeatures prev{store.points_in_month(month.prev(), FeatureKind::Workload),
                           store.points_in_month(month.prev(), FeatureKind::Perf)};
  const MonthFeatures curr{store.points_in_month(month, FeatureKind::Workload),
                           store.points_in_month(month, FeatureKind::Perf)};
  return sysperf_drift(prev, curr, month, model, history, seed, opts);
}

/// Reports for every month in [first, last] that has a populated
/// predecessor, each thresholded against the KL values of the months before
/// it. Months that cannot be evaluated (empty, too small) are skipped.
inline std::vector<DriftReport> drift_series(const PointStore& store, DriftKind kind, MonthKey first, MonthKey last,
                                             const ClusterModel* model, std::uint64_t seed,
                                             const DriftOptions& opts = {}) {
  if (kind == DriftKind::SysPerf && model == nullptr)
    throw Error(Errc::PreconditionViolation, "system-performance drift needs a cluster model");
  std::vector<DriftReport> out;
  std::vector<double> history;
  for (MonthKey m = first; m <= last; m = m.next()) {
    try {
      DriftReport r = kind == DriftKind::Workload ? workload_drift(store, m, history, opts)
                                                  : sysperf_drift(store, m, *model, history, seed, opts);
      if (r.kl) history.push_back(r.kl->value);
      out.push_back(std::move(r));
    } catch (const Error& e) {
      switch (e.code()) {
        case Errc::EmptyPeriod:
        case Errc::InsufficientData:
        case Errc::InsufficientStratifiedSample:
          continue;
        default:
          throw;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

inline nlohmann::json to_json_value(const DriftReport& r) {
  nlohmann::json j{{"kind", to_string(r.kind)},
                   {"month", r.month.to_string()},
                   {"history", r.history},
                   {"exceeded", r.exceeded},
                   {"action", to_string(r.action)},
                   {"direction", to_string(r.direction)},
                   {"degenerate", r.degenerate},
                   {"review", to_string(r.review)}};
  j["threshold"] = r.threshold ? nlohmann::json(*r.threshold) : nlohmann::json(nullptr);
  if (r.kl) {
    j["kl"] = {{"value", r.kl->value},
               {"method", to_string(r.kl->method)},
               {"sample_sizes", {r.kl->n_first, r.kl->n_second}},
               {"regularized", r.kl->regularized}};
  } else {
    j["kl"] = nullptr;
  }
  if (!r.note.empty()) j["note"] = r.note;
  if (r.kind == DriftKind::SysPerf) {
    j["excluded_clusters"] = r.excluded_clusters;
    j["selected_per_cell"] = r.selected_per_cell;
  }
  return j;
}

inline DriftReport drift_report_from_json(const nlohmann::json& j) {
  DriftReport r;
  try {
    r.kind = parse_drift_kind(j.at("kind").get<std::string>());
    r.month = MonthKey::parse(j.at("month").get<std::string>());
    r.history = j.at("history").get<std::vector<double>>();
    r.exceeded = j.at("exceeded").get<bool>();
    r.action = parse_drift_action(j.at("action").get<std::string>());
    r.direction = parse_kl_direction(j.value("direction", std::string("previous_to_current")));
    r.degenerate = j.value("degenerate", false);
    r.review = parse_review_status(j.value("review", std::string("unreviewed")));
    if (j.contains("threshold") && !j["threshold"].is_null()) r.threshold = j["threshold"].get<double>();
    if (j.contains("kl") && !j["kl"].is_null()) {
      const auto& k = j["kl"];
      const auto sizes = k.at("sample_sizes").get<std::vector<std::size_t>>();
      r.kl = KlEstimate{k.at("value").get<double>(), parse_kl_method(k.at("method").get<std::string>()),
                        sizes.at(0), sizes.at(1), k.value("regularized", false)};
    }
    r.note = j.value("note", std::string());
    if (j.contains("excluded_clusters")) r.excluded_clusters = j["excluded_clusters"].get<std::vector<std::size_t>>();
    r.selected_per_cell = j.value("selected_per_cell", std::size_t{0});
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, std::string("drift report: ") + e.what());
  } catch (const std::out_of_range&) {
    throw Error(Errc::ParseError, "drift report: sample_sizes needs two entries");
  }
  return r;
}

}  // namespace driftwatch
