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

// Synthetic telemetry generators shared by the unit and acceptance suites.
// Each generator knows its ground truth (which blob produced a point), so
// clustering and sampling results can be scored against it.

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "driftwatch/datamodel.hpp"
#include "driftwatch/matrix.hpp"
#include "driftwatch/month.hpp"

namespace driftwatch::testing {

/// Four well-separated workload blobs in 3-D with blob-specific performance
/// behaviour. Perf is 2-D: (latency, utilization).
struct BlobWorld {
  std::vector<std::array<double, 3>> workload_centers{
      {0.0, 0.0, 0.0}, {10.0, 0.0, 2.0}, {0.0, 10.0, -2.0}, {10.0, 10.0, 0.0}};
  double workload_sigma = 0.8;
  std::vector<std::array<double, 2>> perf_centers{{5.0, 20.0}, {9.0, 45.0}, {14.0, 60.0}, {20.0, 85.0}};
  std::array<double, 2> perf_sigma{1.0, 4.0};

  TelemetryPoint draw(std::string id, std::int64_t ts, std::size_t blob, std::mt19937_64& gen,
                      std::array<double, 2> perf_shift = {0.0, 0.0}) const {
    std::normal_distribution<double> normal;
    TelemetryPoint p;
    p.point_id = std::move(id);
    p.timestamp = ts;
    p.entity_id = "host-" + std::to_string(blob);
    for (double c : workload_centers[blob]) p.workload.push_back(c + workload_sigma * normal(gen));
    for (std::size_t k = 0; k < 2; ++k)
      p.perf.push_back(perf_centers[blob][k] + perf_shift[k] + perf_sigma[k] * normal(gen));
    return p;
  }
};

inline std::size_t draw_component(const std::vector<double>& weights, std::mt19937_64& gen) {
  std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
  return pick(gen);
}

struct Draws {
  std::vector<TelemetryPoint> points;
  std::vector<std::size_t> blob;
};

/// n points from a weighted blob mixture, timestamps spread across `month`.
inline Draws draw_month(const BlobWorld& world, MonthKey month, std::size_t n, const std::vector<double>& weights,
                        std::mt19937_64& gen, const std::string& prefix = "p",
                        std::array<double, 2> perf_shift = {0.0, 0.0}) {
  Draws out;
  const std::int64_t span = month.end_seconds() - month.start_seconds();
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t b = draw_component(weights, gen);
    const std::int64_t ts = month.start_seconds() + static_cast<std::int64_t>(i) * span / static_cast<std::int64_t>(n);
    out.points.push_back(world.draw(prefix + "-" + month.to_string() + "-" + std::to_string(i), ts, b, gen,
                                    perf_shift));
    out.blob.push_back(b);
  }
  return out;
}

inline Matrix workload_matrix(const std::vector<TelemetryPoint>& pts) {
  Matrix m;
  for (const auto& p : pts) m.append_row(p.workload);
  return m;
}

inline Matrix perf_matrix(const std::vector<TelemetryPoint>& pts) {
  Matrix m;
  for (const auto& p : pts) m.append_row(p.perf);
  return m;
}

/// Bivariate Gaussian sample with given mean and covariance (via Cholesky).
inline Matrix gaussian_2d(std::size_t n, std::array<double, 2> mean, std::array<double, 3> cov_xx_xy_yy,
                          std::mt19937_64& gen) {
  std::normal_distribution<double> normal;
  const double l00 = std::sqrt(cov_xx_xy_yy[0]);
  const double l10 = cov_xx_xy_yy[1] / l00;
  const double l11 = std::sqrt(cov_xx_xy_yy[2] - l10 * l10);
  Matrix m(n, 2);
  for (std::size_t i = 0; i < n; ++i) {
    const double z0 = normal(gen);
    const double z1 = normal(gen);
    m(i, 0) = mean[0] + l00 * z0;
    m(i, 1) = mean[1] + l10 * z0 + l11 * z1;
  }
  return m;
}

/// Monthly BlobWorld telemetry with a mild on/off wobble in both the
/// workload mix and latency (pattern 0,1,1,0,0,1,1,...), so the KL history
/// has spread, plus optional persistent steps from a given month index on.
struct SeriesFixture {
  MonthKey first{2020, 1};
  std::size_t months = 15;
  std::size_t per_month = 4000;
  std::optional<std::size_t> workload_step;  // mix moves to step_weights
  std::optional<std::size_t> perf_step;      // latency rises by perf_regression
  std::vector<double> base_weights{0.25, 0.25, 0.25, 0.25};
  std::vector<double> step_weights{0.6, 0.14, 0.13, 0.13};
  double mix_wobble = 0.08;
  double latency_wobble = 0.8;
  double perf_regression = 17.0;  // about 3 sd of the pooled latency
  std::uint64_t seed = 2020;

  static bool wobble_on(std::size_t i) { return ((i + 1) / 2) % 2 == 1; }

  MonthKey month(std::size_t i) const {
    MonthKey m = first;
    for (std::size_t k = 0; k < i; ++k) m = m.next();
    return m;
  }

  std::vector<TelemetryPoint> generate(const BlobWorld& world = {}) const {
    std::mt19937_64 gen(seed);
    std::vector<TelemetryPoint> out;
    for (std::size_t i = 0; i < months; ++i) {
      std::vector<double> w = workload_step && i >= *workload_step ? step_weights : base_weights;
      std::array<double, 2> shift{0.0, 0.0};
      if (wobble_on(i)) {
        w.front() += mix_wobble;
        w.back() -= mix_wobble;
        shift[0] += latency_wobble;
      }
      if (perf_step && i >= *perf_step) shift[0] += perf_regression;
      auto d = draw_month(world, month(i), per_month, w, gen, "s", shift);
      out.insert(out.end(), d.points.begin(), d.points.end());
    }
    return out;
  }
};

}  // namespace driftwatch::testing
