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

// Three ways of picking points to label from the same skewed stream, scored
// by the entropy of the labeled points' cluster distribution.
//   concentrated:    alert-driven, only points with latency above a bar
//   line-like:       whatever arrives first, at the stream's own mix
//   cluster-sampled: inverse-population sampler

#include <vector>

#include "driftwatch/sampling.hpp"
#include "fixtures.hpp"

namespace driftwatch::testing {

struct RegimeEntropies {
  double concentrated = 0.0;
  double line_like = 0.0;
  double cluster_sampled = 0.0;
};

inline RegimeEntropies diversity_regimes(std::uint64_t seed, std::size_t labels = 600) {
  const BlobWorld world;
  const std::vector<double> mix{0.70, 0.20, 0.07, 0.03};
  std::mt19937_64 gen(seed);
  const auto history = draw_month(world, {2021, 1}, 10000, mix, gen, "h");
  const auto model = train_clusters(workload_matrix(history.points), 4, seed);
  const auto stream = draw_month(world, {2021, 2}, 10000, mix, gen, "s");

  auto entropy_of = [&](auto&& pick) {
    std::vector<double> counts(model.k(), 0.0);
    std::size_t taken = 0;
    for (std::size_t i = 0; i < stream.points.size() && taken < labels; ++i) {
      if (!pick(i)) continue;
      counts[assign(model, stream.points[i].workload)] += 1.0;
      ++taken;
    }
    return shannon_entropy(counts);
  };

  const auto decisions = sample_stream(model, stream.points, static_cast<double>(labels) / 4.0, seed);
  RegimeEntropies out;
  out.concentrated = entropy_of([&](std::size_t i) { return stream.points[i].perf[0] > 17.0; });
  out.line_like = entropy_of([](std::size_t) { return true; });
  out.cluster_sampled = entropy_of([&](std::size_t i) { return decisions[i].accepted; });
  return out;
}

}  // namespace driftwatch::testing
