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
 * Principal component analysis on standardized features.
 *
 * Each column is centered and divided by its sample standard deviation
 * (columns with zero variance keep scale 1), and the d × d covariance of the
 * standardized data is eigendecomposed with cyclic Jacobi. Components are
 * oriented so their largest-magnitude coordinate is positive; components with
 * tied eigenvalues are ordered lexicographically (descending) after
 * orientation. The fit is therefore a deterministic function of the input.
 */

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include <json.hpp>

#include "driftwatch/error.hpp"
#include "driftwatch/linalg.hpp"
#include "driftwatch/matrix.hpp"

namespace driftwatch {

struct PcaModel {
  std::vector<double> mean;                // length d
  std::vector<double> scale;               // length d
  Matrix components;                       // k × d, orthonormal rows
  std::vector<double> explained_variance;  // length k, non-increasing
  double total_variance = 0.0;             // sum of all d eigenvalues

  std::size_t k() const noexcept { return components.rows(); }
  std::size_t d() const noexcept { return mean.size(); }

  std::vector<double> explained_variance_ratio() const {
    std::vector<double> r(explained_variance.size(), 0.0);
    if (total_variance > 0.0)
      for (std::size_t i = 0; i < r.size(); ++i) r[i] = explained_variance[i] / total_variance;
    return r;
  }

  friend bool operator==(const PcaModel&, const PcaModel&) = default;
};

namespace detail {

inline void orient(std::span<double> v) {
  std::size_t arg = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (std::fabs(v[i]) > std::fabs(v[arg])) arg = i;
  if (v[arg] < 0.0)
    for (double& x : v) x = -x;
}

}  // namespace detail

inline PcaModel fit_pca(const Matrix& x, std::size_t k) {
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  if (n < 2) throw Error(Errc::InsufficientData, "PCA needs at least 2 rows");
  if (k == 0 || k > std::min(n, d)) throw Error(Errc::InvalidRank, "k must be in [1, min(n, d)]");

  PcaModel model;
  model.mean.assign(d, 0.0);
  model.scale.assign(d, 1.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) model.mean[c] += x(r, c);
  for (double& m : model.mean) m /= static_cast<double>(n);
  for (std::size_t c = 0; c < d; ++c) {
    double ss = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      const double dev = x(r, c) - model.mean[c];
      ss += dev * dev;
    }
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    model.scale[c] = sd > 0.0 ? sd : 1.0;
  }

  Matrix cov(d, d);
  std::vector<double> z(d);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < d; ++c) z[c] = (x(r, c) - model.mean[c]) / model.scale[c];
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = i; j < d; ++j) cov(i, j) += z[i] * z[j];
  }
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i; j < d; ++j) cov(j, i) = cov(i, j) /= static_cast<double>(n - 1);

  auto eig = linalg::jacobi_eigen(std::move(cov));

  struct Pair {
    double value;
    std::vector<double> vector;
  };
  std::vector<Pair> pairs(d);
  for (std::size_t j = 0; j < d; ++j) {
    pairs[j].value = std::max(0.0, eig.values[j]);
    pairs[j].vector.resize(d);
    for (std::size_t i = 0; i < d; ++i) pairs[j].vector[i] = eig.vectors(i, j);
    detail::orient(pairs[j].vector);
  }
  std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) { return a.value > b.value; });

  const double top = pairs.empty() ? 0.0 : pairs.front().value;
  const double tie_tol = 1e-12 * std::max(1.0, top);
  for (std::size_t lo = 0; lo < d;) {
    std::size_t hi = lo + 1;
    while (hi < d && pairs[hi - 1].value - pairs[hi].value <= tie_tol) ++hi;
    std::sort(pairs.begin() + lo, pairs.begin() + hi,
              [](const Pair& a, const Pair& b) { return a.vector > b.vector; });
    lo = hi;
  }

  model.total_variance = 0.0;
  for (const auto& p : pairs) model.total_variance += p.value;
  model.components = Matrix(k, d);
  model.explained_variance.resize(k);
  for (std::size_t j = 0; j < k; ++j) {
    model.explained_variance[j] = pairs[j].value;
    for (std::size_t i = 0; i < d; ++i) model.components(j, i) = pairs[j].vector[i];
  }
  return model;
}

inline std::vector<double> transform_row(const PcaModel& model, std::span<const double> row) {
  if (row.size() != model.d())
    throw Error(Errc::InvalidDimension, "expected " + std::to_string(model.d()) + " features, got " +
                                            std::to_string(row.size()));
  std::vector<double> z(row.size());
  for (std::size_t c = 0; c < z.size(); ++c) z[c] = (row[c] - model.mean[c]) / model.scale[c];
  std::vector<double> out(model.k());
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = dot(model.components.row(j), z);
  return out;
}

inline Matrix transform(const PcaModel& model, const Matrix& x) {
  if (x.cols() != model.d() && !x.empty())
    throw Error(Errc::InvalidDimension, "expected " + std::to_string(model.d()) + " features, got " +
                                            std::to_string(x.cols()));
  Matrix out(x.rows(), model.k());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto t = transform_row(model, x.row(r));
    std::copy(t.begin(), t.end(), out.row(r).begin());
  }
  return out;
}

// ---------------------------------------------------------------------------

inline nlohmann::json to_json_value(const PcaModel& m) {
  return nlohmann::json{{"mean", m.mean},
                        {"scale", m.scale},
                        {"k", m.k()},
                        {"components", m.components.data()},
                        {"explained_variance", m.explained_variance},
                        {"total_variance", m.total_variance}};
}

inline PcaModel pca_from_json(const nlohmann::json& j) {
  PcaModel m;
  try {
    m.mean = j.at("mean").get<std::vector<double>>();
    m.scale = j.at("scale").get<std::vector<double>>();
    const auto k = j.at("k").get<std::size_t>();
    const auto flat = j.at("components").get<std::vector<double>>();
    m.explained_variance = j.at("explained_variance").get<std::vector<double>>();
    m.total_variance = j.value("total_variance", 0.0);
    const std::size_t d = m.mean.size();
    if (m.scale.size() != d || flat.size() != k * d || m.explained_variance.size() != k)
      throw Error(Errc::ParseError, "inconsistent PCA model shapes");
    m.components = Matrix(k, d);
    for (std::size_t r = 0; r < k; ++r)
      for (std::size_t c = 0; c < d; ++c) m.components(r, c) = flat[r * d + c];
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, std::string("PCA model: ") + e.what());
  }
  return m;
}

}  // namespace driftwatch
