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

// Scoring anomaly predictions against aggregated labels. Abnormal is the
// positive class; any zero denominator makes F1 zero.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "driftwatch/datamodel.hpp"
#include "driftwatch/error.hpp"
#include "driftwatch/matrix.hpp"
#include "driftwatch/rng.hpp"

namespace driftwatch {

/// (predicted, actual)
using VerdictPair = std::pair<Verdict, Verdict>;

struct Confusion {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;

  std::size_t total() const { return tp + fp + fn + tn; }
  void add(Verdict predicted, Verdict actual) {
    const bool p = predicted == Verdict::Abnormal;
    const bool a = actual == Verdict::Abnormal;
    (p ? (a ? tp : fp) : (a ? fn : tn)) += 1;
  }

  friend bool operator==(const Confusion&, const Confusion&) = default;
};

inline Confusion confusion(std::span<const VerdictPair> pairs) {
  Confusion c;
  for (const auto& [p, a] : pairs) c.add(p, a);
  return c;
}

inline double f1(const Confusion& c) {
  if (c.tp + c.fp == 0 || c.tp + c.fn == 0) return 0.0;
  const double precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  const double recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

inline double f1(std::span<const VerdictPair> pairs) {
  if (pairs.empty()) throw Error(Errc::EmptyEvaluation, "no prediction/label pairs to score");
  return f1(confusion(pairs));
}

struct BootstrapSummary {
  std::size_t resamples = 0;
  std::size_t pairs = 0;
  double full_f1 = 0.0;
  double mean_f1 = 0.0;
  double std_f1 = 0.0;  // population sd over resamples
  double min_f1 = 0.0;
  double max_f1 = 0.0;
  std::vector<std::size_t> histogram;  // equal-width bins over [0, 1]; 1.0 lands in the last bin
  std::uint64_t seed = 0;

  friend bool operator==(const BootstrapSummary&, const BootstrapSummary&) = default;
};

/// Resample r draws |pairs| indices with replacement from the substream
/// mix_seed(seed, r), so each resample is reproducible on its own.
inline BootstrapSummary bootstrap_f1(std::span<const VerdictPair> pairs, std::size_t resamples, std::uint64_t seed,
                                     std::size_t bins = 50) {
  if (pairs.empty()) throw Error(Errc::EmptyEvaluation, "no prediction/label pairs to score");
  if (resamples < 100) throw Error(Errc::PreconditionViolation, "bootstrap needs at least 100 resamples");
  if (bins == 0) throw Error(Errc::PreconditionViolation, "histogram needs at least one bin");

  BootstrapSummary s;
  s.resamples = resamples;
  s.pairs = pairs.size();
  s.full_f1 = f1(pairs);
  s.seed = seed;
  s.histogram.assign(bins, 0);
  s.min_f1 = 1.0;
  s.max_f1 = 0.0;

  std::vector<double> scores(resamples);
  for (std::size_t r = 0; r < resamples; ++r) {
    Rng rng(mix_seed(seed, r));
    Confusion c;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const auto& [p, a] = pairs[rng.index(pairs.size())];
      c.add(p, a);
    }
    scores[r] = f1(c);
  }
  const double n = static_cast<double>(resamples);
  s.mean_f1 = std::accumulate(scores.begin(), scores.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : scores) {
    ss += (v - s.mean_f1) * (v - s.mean_f1);
    s.min_f1 = std::min(s.min_f1, v);
    s.max_f1 = std::max(s.max_f1, v);
    const auto bin = std::min(bins - 1, static_cast<std::size_t>(v * static_cast<double>(bins)));
    ++s.histogram[bin];
  }
  s.std_f1 = std::sqrt(ss / n);
  // Every resample identical: keep the mean exactly equal to min and max.
  if (s.max_f1 == s.min_f1) s.mean_f1 = s.min_f1;
  return s;
}

inline nlohmann::json to_json_value(const Confusion& c) {
  return {{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}, {"tn", c.tn}};
}

inline nlohmann::json to_json_value(const BootstrapSummary& s) {
  return {{"resamples", s.resamples}, {"pairs", s.pairs},   {"full_f1", s.full_f1},
          {"mean_f1", s.mean_f1},     {"std_f1", s.std_f1}, {"min_f1", s.min_f1},
          {"max_f1", s.max_f1},       {"histogram", s.histogram}, {"seed", s.seed}};
}

// ---------------------------------------------------------------------------
// Predictions JSONL

struct Prediction {
  std::string point_id;
  Verdict predicted = Verdict::Normal;
};

/// `{"point_id": str, "predicted": "normal"|"abnormal"}` per line. A point
/// predicted twice is an error.
inline std::vector<Prediction> read_predictions(std::istream& in) {
  std::vector<Prediction> out;
  std::map<std::string, std::size_t> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::is_blank(line)) continue;
    const std::string where = "line " + std::to_string(lineno) + ": ";
    Prediction p;
    try {
      const auto j = nlohmann::json::parse(line);
      p = {j.at("point_id").get<std::string>(), parse_verdict(j.at("predicted").get<std::string>())};
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::ParseError, where + e.what());
    } catch (const Error& e) {
      throw Error(e.code(), where + e.detail());
    }
    if (!seen.emplace(p.point_id, lineno).second)
      throw Error(Errc::ParseError, where + "duplicate prediction for " + p.point_id);
    out.push_back(std::move(p));
  }
  return out;
}

struct JoinResult {
  std::vector<VerdictPair> pairs;
  std::vector<std::string> unlabeled;  // predicted points without a resolved label
};

/// Pairs predictions with Resolved aggregated labels by point_id.
inline JoinResult join_predictions(std::span<const Prediction> predictions, std::span<const AggregatedLabel> labels) {
  std::map<std::string, Verdict> resolved;
  for (const auto& l : labels)
    if (l.status == CardStatus::Resolved && l.final_verdict) resolved[l.point_id] = *l.final_verdict;
  JoinResult out;
  for (const auto& p : predictions) {
    const auto it = resolved.find(p.point_id);
    if (it == resolved.end())
      out.unlabeled.push_back(p.point_id);
    else
      out.pairs.emplace_back(p.predicted, it->second);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Nearest-centroid classifier

/// One centroid per verdict; predicts the verdict of the nearest centroid
/// (ties go to Normal).
class NearestCentroid {
 public:
  void fit(const Matrix& x, std::span<const Verdict> y) {
    if (x.rows() != y.size()) throw Error(Errc::InvalidDimension, "feature and label counts differ");
    const std::size_t d = x.cols();
    centroids_ = Matrix(2, d);
    std::size_t counts[2] = {0, 0};
    for (std::size_t r = 0; r < x.rows(); ++r) {
      const std::size_t c = y[r] == Verdict::Abnormal;
      ++counts[c];
      for (std::size_t j = 0; j < d; ++j) centroids_(c, j) += x(r, j);
    }
    if (counts[0] == 0 || counts[1] == 0)
      throw Error(Errc::InsufficientData, "nearest-centroid training needs both verdicts");
    for (std::size_t c = 0; c < 2; ++c)
      for (std::size_t j = 0; j < d; ++j) centroids_(c, j) /= static_cast<double>(counts[c]);
  }

  Verdict predict(std::span<const double> x) const {
    if (centroids_.empty()) throw Error(Errc::PreconditionViolation, "classifier not fitted");
    if (x.size() != centroids_.cols()) throw Error(Errc::InvalidDimension, "feature dimension mismatch");
    double dist[2] = {0.0, 0.0};
    for (std::size_t c = 0; c < 2; ++c)
      for (std::size_t j = 0; j < x.size(); ++j) dist[c] += (x[j] - centroids_(c, j)) * (x[j] - centroids_(c, j));
    return dist[1] < dist[0] ? Verdict::Abnormal : Verdict::Normal;
  }

  const Matrix& centroids() const { return centroids_; }

 private:
  Matrix centroids_;  // row 0 normal, row 1 abnormal
};

}  // namespace driftwatch
