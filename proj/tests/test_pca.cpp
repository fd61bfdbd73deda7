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

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "driftwatch/pca.hpp"
#include "support/oracles.hpp"

namespace dw = driftwatch;
using dw::Matrix;

namespace {

Matrix random_matrix(std::size_t n, std::size_t d, unsigned seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> scale(0.1, 5.0);
  // Random mixing so features are correlated and heterogeneous in scale.
  Matrix mix(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) mix(i, j) = normal(gen);
  std::vector<double> col_scale(d);
  for (auto& s : col_scale) s = scale(gen);
  Matrix x(n, d);
  std::vector<double> z(d);
  for (std::size_t r = 0; r < n; ++r) {
    for (auto& v : z) v = normal(gen);
    for (std::size_t c = 0; c < d; ++c) {
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) s += mix(c, k) * z[k];
      x(r, c) = col_scale[c] * s + 3.0 * c;
    }
  }
  return x;
}

double column_variance(const Matrix& m, std::size_t c) {
  double mean = 0.0;
  for (std::size_t r = 0; r < m.rows(); ++r) mean += m(r, c);
  mean /= static_cast<double>(m.rows());
  double ss = 0.0;
  for (std::size_t r = 0; r < m.rows(); ++r) ss += (m(r, c) - mean) * (m(r, c) - mean);
  return ss / static_cast<double>(m.rows() - 1);
}

}  // namespace

TEST(Pca, LineCollapsesToDiagonalAfterStandardization) {
  Matrix x;
  for (int i = 0; i < 20; ++i) {
    const double t = 0.5 * i - 3.0;
    x.append_row(std::vector<double>{t, 2.0 * t});
  }
  const auto model = dw::fit_pca(x, 1);
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  EXPECT_NEAR(model.components(0, 0), inv_sqrt2, 1e-8);
  EXPECT_NEAR(model.components(0, 1), inv_sqrt2, 1e-8);
  EXPECT_NEAR(model.explained_variance_ratio()[0], 1.0, 1e-12);
}

TEST(Pca, IsotropicCloudHasUnitVariances) {
  std::mt19937_64 gen(7);
  std::normal_distribution<double> normal;
  Matrix x(10000, 3);
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < 3; ++c) x(r, c) = normal(gen);
  const auto model = dw::fit_pca(x, 3);
  const auto oracle = dw::testing::standardized_covariance_eigen(x);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_NEAR(model.explained_variance[i], 1.0, 0.1);
    EXPECT_NEAR(model.explained_variance[i], oracle.values(i), 1e-9);
  }
}

TEST(Pca, FullRankReconstructionIsExact) {
  const Matrix x = random_matrix(40, 5, 3);
  const auto model = dw::fit_pca(x, 5);
  const Matrix t = dw::transform(model, x);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < 5; ++c) {
      double back = 0.0;
      for (std::size_t j = 0; j < 5; ++j) back += t(r, j) * model.components(j, c);
      const double standardized = (x(r, c) - model.mean[c]) / model.scale[c];
      EXPECT_NEAR(back, standardized, 1e-8);
    }
  }
}

TEST(Pca, TransformOfMeanIsZero) {
  const Matrix x = random_matrix(30, 4, 11);
  const auto model = dw::fit_pca(x, 2);
  const auto z = dw::transform_row(model, model.mean);
  ASSERT_EQ(z.size(), 2u);
  EXPECT_EQ(z[0], 0.0);
  EXPECT_EQ(z[1], 0.0);
}

TEST(Pca, ProjectedVariancesEqualExplainedVariances) {
  const Matrix x = random_matrix(150, 6, 5);
  const auto model = dw::fit_pca(x, 2);
  const Matrix t = dw::transform(model, x);
  const auto oracle = dw::testing::standardized_covariance_eigen(x);
  for (std::size_t j = 0; j < 2; ++j) {
    EXPECT_NEAR(column_variance(t, j), model.explained_variance[j], 1e-6);
    EXPECT_NEAR(column_variance(t, j), oracle.values(j), 1e-6);
  }
}

TEST(Pca, SinglePointTransform) {
  const Matrix x = random_matrix(20, 3, 2);
  const auto model = dw::fit_pca(x, 2);
  Matrix one;
  one.append_row(x.row(4));
  const Matrix t = dw::transform(model, one);
  EXPECT_EQ(t.rows(), 1u);
  EXPECT_EQ(t.cols(), 2u);
}

TEST(Pca, ZeroVarianceColumnUsesUnitScale) {
  Matrix x;
  std::mt19937_64 gen(1);
  std::normal_distribution<double> normal;
  for (int i = 0; i < 50; ++i) x.append_row(std::vector<double>{normal(gen), 4.0, normal(gen)});
  const auto model = dw::fit_pca(x, 2);
  EXPECT_EQ(model.scale[1], 1.0);
  for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(model.components(j, 1), 0.0, 1e-12);
  const auto z = dw::transform_row(model, std::vector<double>{model.mean[0], 5.0, model.mean[2]});
  ASSERT_EQ(z.size(), 2u);
}

TEST(Pca, Errors) {
  Matrix one;
  one.append_row(std::vector<double>{1.0, 2.0});
  EXPECT_THROW(
      {
        try {
          dw::fit_pca(one, 1);
        } catch (const dw::Error& e) {
          EXPECT_EQ(e.code(), dw::Errc::InsufficientData);
          throw;
        }
      },
      dw::Error);

  const Matrix x = random_matrix(5, 3, 1);
  try {
    dw::fit_pca(x, 4);
    FAIL() << "expected InvalidRank";
  } catch (const dw::Error& e) {
    EXPECT_EQ(e.code(), dw::Errc::InvalidRank);
  }
  try {
    dw::fit_pca(x, 0);
    FAIL() << "expected InvalidRank";
  } catch (const dw::Error& e) {
    EXPECT_EQ(e.code(), dw::Errc::InvalidRank);
  }

  const auto model = dw::fit_pca(x, 2);
  try {
    dw::transform_row(model, std::vector<double>{1.0, 2.0});
    FAIL() << "expected InvalidDimension";
  } catch (const dw::Error& e) {
    EXPECT_EQ(e.code(), dw::Errc::InvalidDimension);
  }
}

TEST(Pca, TiedEigenvaluesOrderDeterministically) {
  // Two uncorrelated standardized columns: correlation matrix is the identity.
  Matrix x{{1, 1}, {1, -1}, {-1, 1}, {-1, -1}};
  const auto model = dw::fit_pca(x, 2);
  EXPECT_DOUBLE_EQ(model.explained_variance[0], model.explained_variance[1]);
  // Oriented basis vectors e0, e1 ordered lexicographically descending.
  EXPECT_EQ(model.components(0, 0), 1.0);
  EXPECT_EQ(model.components(0, 1), 0.0);
  EXPECT_EQ(model.components(1, 0), 0.0);
  EXPECT_EQ(model.components(1, 1), 1.0);
}

// Structural properties over many random inputs.
TEST(PcaProperty, OrthonormalOrderedOrientedDeterministic) {
  std::mt19937 gen(99);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t d = 1 + gen() % 8;
    const std::size_t n = d + 2 + gen() % 150;
    const Matrix x = random_matrix(n, d, 1000 + trial);
    const std::size_t k = 1 + gen() % d;
    const auto model = dw::fit_pca(x, k);

    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = 0; j < k; ++j) {
        const double ip = dw::dot(model.components.row(i), model.components.row(j));
        EXPECT_NEAR(ip, i == j ? 1.0 : 0.0, 1e-8);
      }
      if (i + 1 < k) {
        EXPECT_GE(model.explained_variance[i], model.explained_variance[i + 1]);
      }
      EXPECT_GE(model.explained_variance[i], 0.0);

      const auto row = model.components.row(i);
      std::size_t arg = 0;
      for (std::size_t c = 1; c < d; ++c)
        if (std::fabs(row[c]) > std::fabs(row[arg])) arg = c;
      EXPECT_GT(row[arg], 0.0);
    }
    EXPECT_EQ(model, dw::fit_pca(x, k));
  }
}

TEST(PcaProperty, MatchesEigenOracle) {
  for (int trial = 0; trial < 50; ++trial) {
    std::mt19937 gen(500 + trial);
    const std::size_t d = 1 + gen() % 8;
    const std::size_t n = d + 2 + gen() % (199 - d);
    const Matrix x = random_matrix(n, d, 77 + trial);
    const auto model = dw::fit_pca(x, d);
    const auto oracle = dw::testing::standardized_covariance_eigen(x);
    for (std::size_t i = 0; i < d; ++i) {
      const double expect = oracle.values(static_cast<Eigen::Index>(i));
      EXPECT_LE(std::fabs(model.explained_variance[i] - expect), 1e-6 * std::fabs(expect));
      const bool distinct = (i == 0 || oracle.values(i - 1) - expect > 1e-3 * expect) &&
                            (i + 1 == d || expect - oracle.values(i + 1) > 1e-3 * expect);
      if (!distinct) continue;
      Eigen::VectorXd mine(d);
      for (std::size_t c = 0; c < d; ++c) mine(c) = model.components(i, c);
      EXPECT_LT(dw::testing::line_angle(mine, oracle.vectors.col(i)), 1e-4);
    }
  }
}

TEST(Pca, JsonRoundTrip) {
  const Matrix x = random_matrix(25, 4, 8);
  const auto model = dw::fit_pca(x, 2);
  const auto text = dw::to_json_value(model).dump();
  EXPECT_EQ(dw::pca_from_json(nlohmann::json::parse(text)), model);
}
