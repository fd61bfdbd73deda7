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

// Reference computations used only by tests. None of these call into the
// library's numerical paths: eigen-problems and Gaussian densities go through
// Eigen, entropies and F1 through direct arithmetic.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "driftwatch/matrix.hpp"

namespace driftwatch::testing {

inline Eigen::MatrixXd to_eigen(const Matrix& m) {
  Eigen::MatrixXd out(m.rows(), m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) out(r, c) = m(r, c);
  return out;
}

struct EigenOracle {
  Eigen::VectorXd values;   // descending
  Eigen::MatrixXd vectors;  // columns, same order
};

/// Eigen-decomposition of the covariance of the standardized data
/// (sample std, zero-variance columns unscaled).
inline EigenOracle standardized_covariance_eigen(const Matrix& x) {
  Eigen::MatrixXd a = to_eigen(x);
  const Eigen::RowVectorXd mu = a.colwise().mean();
  a.rowwise() -= mu;
  const double denom = static_cast<double>(a.rows() - 1);
  for (Eigen::Index c = 0; c < a.cols(); ++c) {
    const double sd = std::sqrt(a.col(c).squaredNorm() / denom);
    if (sd > 0.0) a.col(c) /= sd;
  }
  const Eigen::MatrixXd cov = (a.transpose() * a) / denom;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  const Eigen::Index d = cov.rows();
  EigenOracle out;
  out.values.resize(d);
  out.vectors.resize(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    out.values(i) = solver.eigenvalues()(d - 1 - i);
    out.vectors.col(i) = solver.eigenvectors().col(d - 1 - i);
  }
  return out;
}

/// Angle between two unit vectors treated as lines (sign-free).
inline double line_angle(const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
  const double c = std::fabs(u.dot(v));
  const double s = (u - u.dot(v) * v).norm();
  return std::atan2(s, c);
}

/// Monte Carlo KL(N(mu_p, cov_p) || N(mu_q, cov_q)) from `samples` draws of P.
inline double monte_carlo_gaussian_kl(const Eigen::VectorXd& mu_p, const Eigen::MatrixXd& cov_p,
                                      const Eigen::VectorXd& mu_q, const Eigen::MatrixXd& cov_q,
                                      int samples, unsigned seed) {
  const Eigen::Index d = mu_p.size();
  Eigen::LLT<Eigen::MatrixXd> lp(cov_p);
  Eigen::LLT<Eigen::MatrixXd> lq(cov_q);
  const Eigen::MatrixXd Lp = lp.matrixL();
  const Eigen::MatrixXd Lq = lq.matrixL();
  double logdet_p = 0.0;
  double logdet_q = 0.0;
  for (Eigen::Index i = 0; i < d; ++i) {
    logdet_p += 2.0 * std::log(Lp(i, i));
    logdet_q += 2.0 * std::log(Lq(i, i));
  }
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal;
  double acc = 0.0;
  Eigen::VectorXd z(d);
  for (int s = 0; s < samples; ++s) {
    for (Eigen::Index i = 0; i < d; ++i) z(i) = normal(gen);
    const Eigen::VectorXd x = mu_p + Lp * z;
    const Eigen::VectorXd rq = Lq.triangularView<Eigen::Lower>().solve(x - mu_q);
    const double log_p = -0.5 * z.squaredNorm() - 0.5 * logdet_p;
    const double log_q = -0.5 * rq.squaredNorm() - 0.5 * logdet_q;
    acc += log_p - log_q;
  }
  return acc / samples;
}

/// Plain-loop Shannon entropy of a count vector.
inline double entropy_bits(const std::vector<double>& counts) {
  double total = 0.0;
  for (double c : counts) total += c;
  double h = 0.0;
  for (double c : counts)
    if (c > 0) h -= (c / total) * std::log2(c / total);
  return h;
}

/// Survival function of the chi-square distribution with 3 degrees of
/// freedom: Q(x) = erfc(sqrt(x/2)) + sqrt(2x/pi) exp(-x/2).
inline double chi_square_sf_df3(double x) {
  return std::erfc(std::sqrt(x / 2.0)) + std::sqrt(2.0 * x / M_PI) * std::exp(-x / 2.0);
}

}  // namespace driftwatch::testing
