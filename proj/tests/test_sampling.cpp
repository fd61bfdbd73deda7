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
#include <map>
#include <random>

#include "driftwatch/sampling.hpp"
#include "support/fixtures.hpp"
#include "support/regimes.hpp"
#include "support/oracles.hpp"

namespace dw = driftwatch;
using dw::Matrix;

namespace {

struct Blobs {
  Matrix x;
  std::vector<std::size_t> truth;
};

// Corners of the unit square, sigma 0.01, unequal blob sizes.
Blobs square_blobs(std::mt19937_64& gen, std::array<std::size_t, 4> sizes = {400, 300, 200, 100}) {
  const double centers[4][2] = {{0, 0}, {1, 0}, {0, 1}, {1, 1}};
  std::normal_distribution<double> noise(0.0, 0.01);
  Blobs b;
  for (std::size_t blob = 0; blob < 4; ++blob) {
    for (std::size_t i = 0; i < sizes[blob]; ++i) {
      b.x.append_row(std::vector<double>{centers[blob][0] + noise(gen), centers[blob][1] + noise(gen)});
      b.truth.push_back(blob);
    }
  }
  return b;
}

// Majority blob for each cluster.
std::vector<std::size_t> cluster_to_blob(const dw::ClusterModel& model, const Matrix& x,
                                         const std::vector<std::size_t>& truth, std::size_t blobs) {
  std::vector<std::vector<std::size_t>> votes(model.k(), std::vector<std::size_t>(blobs, 0));
  for (std::size_t i = 0; i < x.rows(); ++i) ++votes[dw::assign(model, x.row(i))][truth[i]];
  std::vector<std::size_t> map(model.k());
  for (std::size_t c = 0; c < model.k(); ++c)
    map[c] = static_cast<std::size_t>(std::max_element(votes[c].begin(), votes[c].end()) - votes[c].begin());
  return map;
}

dw::ClusterModel identity_model(Matrix centroids) {
  dw::ClusterModel m;
  m.pca.mean = {0.0, 0.0};
  m.pca.scale = {1.0, 1.0};
  m.pca.components = Matrix::identity(2);
  m.pca.explained_variance = {1.0, 1.0};
  m.pca.total_variance = 2.0;
  m.populations.assign(centroids.rows(), 1.0);
  m.centroids = std::move(centroids);
  m.requested_k = m.centroids.rows();
  return m;
}

}  // namespace

TEST(TrainClusters, RecoversSeparatedBlobs) {
  std::mt19937_64 gen(2024);
  const auto blobs = square_blobs(gen);
  const auto model = dw::train_clusters(blobs.x, 4, 17);
  ASSERT_EQ(model.k(), 4u);
  const auto map = cluster_to_blob(model, blobs.x, blobs.truth, 4);

  std::size_t correct = 0;
  for (std::size_t i = 0; i < blobs.x.rows(); ++i)
    if (map[dw::assign(model, blobs.x.row(i))] == blobs.truth[i]) ++correct;
  EXPECT_GE(static_cast<double>(correct) / blobs.x.rows(), 0.99);

  const double centers[4][2] = {{0, 0}, {1, 0}, {0, 1}, {1, 1}};
  const double sizes[4] = {400, 300, 200, 100};
  for (std::size_t c = 0; c < 4; ++c) {
    const auto truth = dw::transform_row(model.pca, std::vector<double>{centers[map[c]][0], centers[map[c]][1]});
    EXPECT_LT(std::sqrt(dw::detail::squared_distance(model.centroids.row(c), truth)), 0.05);
    EXPECT_EQ(model.populations[c], sizes[map[c]]);
  }
}

TEST(TrainClusters, EachPointItsOwnCentroidWhenNEqualsK) {
  Matrix x{{0.0, 0.0}, {3.0, 1.0}, {1.0, 5.0}};
  const auto model = dw::train_clusters(x, 3, 5);
  ASSERT_EQ(model.k(), 3u);
  for (double p : model.populations) EXPECT_EQ(p, 1.0);
  const Matrix reduced = dw::transform(model.pca, x);
  for (std::size_t i = 0; i < 3; ++i) {
    const auto c = dw::assign_reduced(model, reduced.row(i));
    EXPECT_EQ(dw::detail::squared_distance(model.centroids.row(c), reduced.row(i)), 0.0);
  }
}

TEST(TrainClusters, SingleClusterIsTheMean) {
  std::mt19937_64 gen(3);
  const auto blobs = square_blobs(gen);
  const auto model = dw::train_clusters(blobs.x, 1, 1);
  const Matrix reduced = dw::transform(model.pca, blobs.x);
  for (std::size_t c = 0; c < reduced.cols(); ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < reduced.rows(); ++r) mean += reduced(r, c);
    mean /= reduced.rows();
    EXPECT_NEAR(model.centroids(0, c), mean, 1e-12);
  }
  EXPECT_EQ(model.populations[0], 1000.0);
}

TEST(TrainClusters, Errors) {
  Matrix x{{0.0, 0.0}, {1.0, 1.0}};
  try {
    dw::train_clusters(x, 3, 0);
    FAIL() << "expected InsufficientData";
  } catch (const dw::Error& e) {
    EXPECT_EQ(e.code(), dw::Errc::InsufficientData);
  }
}

TEST(TrainClusters, DuplicatePointsReduceK) {
  Matrix x{{0.0, 0.0}, {0.0, 0.0}, {2.0, 1.0}, {2.0, 1.0}, {0.0, 0.0}};
  const auto model = dw::train_clusters(x, 4, 9);
  EXPECT_TRUE(model.k_reduced);
  EXPECT_EQ(model.requested_k, 4u);
  ASSERT_EQ(model.k(), 2u);
  std::vector<double> pops = model.populations;
  std::sort(pops.begin(), pops.end());
  EXPECT_EQ(pops, (std::vector<double>{2.0, 3.0}));
}

TEST(TrainClusters, DeterministicForSeed) {
  std::mt19937_64 gen(8);
  const auto blobs = square_blobs(gen);
  EXPECT_EQ(dw::train_clusters(blobs.x, 4, 3), dw::train_clusters(blobs.x, 4, 3));
}

TEST(Assign, AtCentroidAndTieBreak) {
  const auto model = identity_model(Matrix{{0.0, 0.0}, {1.0, 0.0}, {5.0, 5.0}, {-1.0, 0.0}});
  EXPECT_EQ(dw::assign(model, std::vector<double>{5.0, 5.0}), 2u);
  // (0, 0) is equidistant to centroids 1 and 3.
  const auto two = identity_model(Matrix{{9.0, 9.0}, {1.0, 0.0}, {8.0, 8.0}, {-1.0, 0.0}});
  EXPECT_EQ(dw::assign(two, std::vector<double>{0.0, 0.0}), 1u);
  try {
    dw::assign(model, std::vector<double>{1.0, 2.0, 3.0});
    FAIL() << "expected InvalidDimension";
  } catch (const dw::Error& e) {
    EXPECT_EQ(e.code(), dw::Errc::InvalidDimension);
  }
}

TEST(Assign, FreshBlobPointsLandInTheirCluster) {
  std::mt19937_64 gen(99);
  const auto train = square_blobs(gen);
  const auto model = dw::train_clusters(train.x, 4, 4);
  const auto map = cluster_to_blob(model, train.x, train.truth, 4);
  const auto fresh = square_blobs(gen, {250, 250, 250, 250});
  std::size_t correct = 0;
  for (std::size_t i = 0; i < fresh.x.rows(); ++i)
    if (map[dw::assign(model, fresh.x.row(i))] == fresh.truth[i]) ++correct;
  EXPECT_GE(correct, 990u);
}

TEST(AcceptanceProbability, InversePopulationWithClamp) {
  const auto model = identity_model(Matrix{{0.0, 0.0}, {1.0, 1.0}});
  const std::vector<double> pop{900.0, 100.0};
  const auto p0 = dw::acceptance_probability(model, 0, 5.0, pop);
  const auto p1 = dw::acceptance_probability(model, 1, 5.0, pop);
  EXPECT_DOUBLE_EQ(p0.value, 5.0 / 900.0);
  EXPECT_DOUBLE_EQ(p1.value, 5.0 / 100.0);
  EXPECT_DOUBLE_EQ(900.0 * p0.value, 5.0);
  EXPECT_DOUBLE_EQ(100.0 * p1.value, 5.0);

  EXPECT_EQ(dw::acceptance_probability(model, 0, 5.0, std::vector<double>{3.0, 1.0}).value, 1.0);

  const auto starved = dw::acceptance_probability(model, 1, 5.0, std::vector<double>{10.0, 0.0});
  EXPECT_EQ(starved.value, 1.0);
  EXPECT_TRUE(starved.starved);

  EXPECT_THROW(dw::acceptance_probability(model, 0, 5.0, std::vector<double>{1.0}), dw::Error);
}

// population × probability == budget whenever population >= budget, up to
// the single rounding of the quotient.
TEST(AcceptanceProbabilityProperty, ExpectedCountsEqualBudget) {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> budget_dist(1.0, 100.0);
  std::uniform_int_distribution<int> pop_dist(100, 1000000);
  const auto model = identity_model(Matrix{{0.0, 0.0}, {1.0, 1.0}, {2.0, 2.0}, {3.0, 3.0}});
  for (int trial = 0; trial < 1000; ++trial) {
    const double budget = budget_dist(gen);
    std::vector<double> pop(4);
    for (auto& p : pop) p = pop_dist(gen);
    for (std::size_t c = 0; c < 4; ++c) {
      const double prob = dw::acceptance_probability(model, c, budget, pop).value;
      EXPECT_EQ(prob, budget / pop[c]);
      const double expected = pop[c] * prob;
      EXPECT_TRUE(expected == budget || expected == std::nextafter(budget, 0.0) ||
                  expected == std::nextafter(budget, 2.0 * budget))
          << expected << " vs " << budget;
    }
  }
}

// Per-run counts are Binomial with sd ~7-8 around 50, so single runs are
// checked with the chi-square test and the +/-30% band is applied to the mean
// over seeded runs.
TEST(SampleStream, EqualizesSkewedStream) {
  const dw::testing::BlobWorld world;
  const std::vector<double> mix{0.70, 0.20, 0.07, 0.03};
  std::mt19937_64 gen(11);
  const auto history = dw::testing::draw_month(world, {2021, 1}, 10000, mix, gen, "h");
  const auto model = dw::train_clusters(dw::testing::workload_matrix(history.points), 4, 1);
  const auto map = cluster_to_blob(model, dw::testing::workload_matrix(history.points), history.blob, 4);

  constexpr int kRuns = 20;
  std::vector<double> mean_accepted(4, 0.0);
  for (int run = 1; run <= kRuns; ++run) {
    std::mt19937_64 stream_gen(1000 + run);
    const auto stream = dw::testing::draw_month(world, {2021, 2}, 10000, mix, stream_gen, "s");
    const auto decisions = dw::sample_stream(model, stream.points, 50.0, run);
    std::vector<double> accepted(4, 0.0);
    for (const auto& d : decisions) {
      EXPECT_EQ(d.accepted, d.rng_draw < d.acceptance_probability);
      if (d.accepted) accepted[map[d.cluster_index]] += 1.0;
    }
    double total = 0.0;
    for (double a : accepted) total += a;
    double chi2 = 0.0;
    for (std::size_t c = 0; c < 4; ++c) {
      chi2 += (accepted[c] - total / 4) * (accepted[c] - total / 4) / (total / 4);
      mean_accepted[c] += accepted[c] / kRuns;
    }
    EXPECT_GT(dw::testing::chi_square_sf_df3(chi2), 0.01) << "run " << run;
  }
  for (double m : mean_accepted) EXPECT_NEAR(m, 50.0, 15.0);
}

TEST(SampleStream, EdgeCasesAndDeterminism) {
  const auto model = identity_model(Matrix{{0.0, 0.0}, {10.0, 10.0}});
  EXPECT_TRUE(dw::sample_stream(model, {}, 5.0, 1).empty());

  std::vector<dw::TelemetryPoint> pts;
  for (int i = 0; i < 4; ++i) pts.push_back({"p" + std::to_string(i), 1614556800 + i, "e", {0.1 * i, 0.0}, {1.0}});
  // Training populations are 1 each; budget 5 clamps to probability 1.
  for (const auto& d : dw::sample_stream(model, pts, 5.0, 1)) {
    EXPECT_TRUE(d.accepted);
    EXPECT_EQ(d.cluster_index, 0u);
  }
  pts.push_back({"bad", 1614556900, "e", {1.0, 2.0, 3.0}, {1.0}});
  const auto a = dw::sample_stream(model, pts, 0.5, 42);
  EXPECT_EQ(a, dw::sample_stream(model, pts, 0.5, 42));
  ASSERT_TRUE(a.back().skipped.has_value());
  EXPECT_FALSE(a.back().accepted);
}

TEST(StreamSampler, UsesTrailingMonthPopulations) {
  auto model = std::make_shared<const dw::ClusterModel>(identity_model(Matrix{{0.0, 0.0}, {10.0, 10.0}}));
  dw::StreamSampler sampler(model, {10.0, 1, 7});
  sampler.prime({2021, 2}, {1000.0, 0.0});
  EXPECT_EQ(sampler.window_population({2021, 3}), (std::vector<double>{1000.0, 0.0}));
  // No data in January's window: training populations.
  EXPECT_EQ(sampler.window_population({2021, 2}), model->populations);

  const auto common = sampler.offer({"a", dw::MonthKey{2021, 3}.start_seconds(), "e", {0.0, 0.0}, {1.0}});
  EXPECT_DOUBLE_EQ(common.acceptance_probability, 0.01);
  const auto rare = sampler.offer({"b", dw::MonthKey{2021, 3}.start_seconds(), "e", {10.0, 10.0}, {1.0}});
  EXPECT_EQ(rare.acceptance_probability, 1.0);
  EXPECT_TRUE(rare.starved);
  EXPECT_TRUE(rare.accepted);
  EXPECT_EQ(sampler.window_population({2021, 4}), (std::vector<double>{1.0, 1.0}));
}

TEST(Entropy, AnalyticValues) {
  EXPECT_NEAR(dw::shannon_entropy(std::vector<double>{25, 25, 25, 25}), 2.0, 1e-12);
  EXPECT_NEAR(dw::shannon_entropy(std::vector<double>{8, 4, 2, 2}), 1.75, 1e-12);
  EXPECT_EQ(dw::shannon_entropy(std::vector<double>{0, 40, 0, 0}), 0.0);
  EXPECT_NEAR(dw::shannon_entropy(std::vector<double>{1, 1, 1, 1}, std::exp(1.0)), std::log(4.0), 1e-12);
}

TEST(Entropy, RetrainTriggerOnQuarterBitDrop) {
  EXPECT_TRUE(dw::retrain_triggered(1.85, 1.55));
  EXPECT_FALSE(dw::retrain_triggered(1.85, 1.65));
  EXPECT_TRUE(dw::retrain_triggered(1.85, 1.60));
  EXPECT_FALSE(dw::retrain_triggered(std::nullopt, 0.0));
  EXPECT_FALSE(dw::retrain_triggered(1.0, 1.5));
}

TEST(Entropy, DiversityOrderingAcrossSamplingRegimes) {
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto e = dw::testing::diversity_regimes(seed);
    EXPECT_LT(e.concentrated, e.line_like) << "seed " << seed;
    EXPECT_LT(e.line_like, e.cluster_sampled) << "seed " << seed;
    // Stream mix 70/20/7/3 carries about 1.25 bits; equalized labels approach 2.
    EXPECT_NEAR(e.line_like, 1.25, 0.15);
    EXPECT_GT(e.cluster_sampled, 1.85);
  }
}

TEST(Entropy, ReportChainsPreviousMonth) {
  const auto feb = dw::entropy_report({2021, 2}, {25, 25, 25, 25}, std::nullopt);
  EXPECT_FALSE(feb.retrain_triggered);
  EXPECT_FALSE(feb.previous_entropy.has_value());
  const auto mar = dw::entropy_report({2021, 3}, {8, 4, 2, 2}, feb);
  ASSERT_TRUE(mar.previous_entropy.has_value());
  EXPECT_EQ(*mar.previous_entropy, feb.entropy);
  EXPECT_TRUE(mar.retrain_triggered);  // 2.0 -> 1.75 is exactly 0.25

  const auto apr = dw::entropy_report({2021, 4}, {0, 0, 0, 0}, mar);
  EXPECT_TRUE(apr.no_labels);
  EXPECT_EQ(apr.entropy, 0.0);
  EXPECT_FALSE(apr.retrain_triggered);
  const auto may = dw::entropy_report({2021, 5}, {10, 0, 0, 0}, apr);
  EXPECT_FALSE(may.previous_entropy.has_value());
  EXPECT_FALSE(may.retrain_triggered);
}

TEST(EntropyProperty, BoundsAgainstDirectFormula) {
  std::mt19937_64 gen(3);
  std::uniform_int_distribution<int> count(0, 50);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t k = 1 + trial % 8;
    std::vector<double> counts(k);
    for (auto& c : counts) c = count(gen);
    counts[0] += 1;  // at least one label
    const double h = dw::shannon_entropy(counts);
    EXPECT_GE(h, 0.0);
    EXPECT_LE(h, std::log2(static_cast<double>(k)) + 1e-12);
    EXPECT_NEAR(h, dw::testing::entropy_bits(counts), 1e-12);
  }
}

TEST(Entropy, FromResolvedLabelsViaModel) {
  const auto model = identity_model(Matrix{{0.0, 0.0}, {10.0, 0.0}, {0.0, 10.0}, {10.0, 10.0}});
  std::map<std::string, std::vector<double>> workloads;
  std::vector<dw::AggregatedLabel> labels;
  const double corners[4][2] = {{0, 0}, {10, 0}, {0, 10}, {10, 10}};
  const int per_cluster[4] = {8, 4, 2, 2};
  for (int c = 0; c < 4; ++c) {
    for (int i = 0; i < per_cluster[c]; ++i) {
      const std::string id = "c" + std::to_string(c) + "-" + std::to_string(i);
      workloads[id] = {corners[c][0] + 0.1 * i, corners[c][1]};
      labels.push_back({id, dw::Verdict::Normal, 2, 0, dw::CardStatus::Resolved});
    }
  }
  labels.push_back({"tie", std::nullopt, 1, 1, dw::CardStatus::DroppedTie});
  auto lookup = [&](const std::string& id) -> std::optional<std::vector<double>> {
    auto it = workloads.find(id);
    if (it == workloads.end()) return std::nullopt;
    return it->second;
  };
  const auto report = dw::entropy_report({2021, 3}, labels, model, lookup, std::nullopt);
  EXPECT_NEAR(report.entropy, 1.75, 1e-12);
  EXPECT_EQ(report.cluster_counts, (std::vector<double>{8, 4, 2, 2}));

  labels.push_back({"ghost", dw::Verdict::Normal, 2, 0, dw::CardStatus::Resolved});
  EXPECT_THROW(dw::entropy_report({2021, 3}, labels, model, lookup, std::nullopt), dw::Error);
}

TEST(ClusterModel, JsonRoundTrip) {
  std::mt19937_64 gen(1);
  const auto blobs = square_blobs(gen);
  auto model = dw::train_clusters(blobs.x, 4, 2);
  model.trained_at = 1614556800;
  model.window_start = dw::MonthKey{2020, 1};
  model.window_end = dw::MonthKey{2020, 12};
  const auto text = dw::to_json_value(model).dump();
  EXPECT_EQ(dw::cluster_model_from_json(nlohmann::json::parse(text)), model);
}
