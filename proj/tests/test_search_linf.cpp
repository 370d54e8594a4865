// Copyright 2026 The concmeasure Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <cmath>
#include <vector>

#include "concmeasure/data.hpp"
#include "concmeasure/random.hpp"
#include "concmeasure/search_linf.hpp"
#include "gtest/gtest.h"
#include "test_oracles.hpp"

namespace {

using namespace concmeasure;
using concmeasure::testing::line;

// Density order recomputed by linear scan.
std::vector<std::size_t> scan_density_order(const Dataset& ds, std::size_t k) {
  std::vector<double> r(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i)
    r[i] = concmeasure::testing::scan_knn(ds, ds.point(i), k, Metric::L1, {i}).back().distance;
  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return r[a] < r[b]; });
  return order;
}

LinfConfig small_config() {
  LinfConfig cfg;
  cfg.alpha = 0.25;
  cfg.epsilon_inf = 0.05;
  cfg.T = 2;
  cfg.k_density = 1;
  cfg.restarts = 1;
  return cfg;
}

TEST(DensityOrder, Examples) {
  EXPECT_EQ(density_order(line({0.0, 0.1, 5.0}), 1), (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_EQ(density_order(line({2.0, 2.0, 2.0, 2.0}), 2), (std::vector<std::size_t>{0, 1, 2, 3}));
  EXPECT_THROW(density_order(line({0.0, 1.0}), 2), ParameterError);
}

TEST(DensityOrder, AgreesWithScan) {
  Rng rng(31);
  for (int c = 0; c < 100; ++c) {
    const std::size_t m = 3 + rng.below(80), n = 1 + rng.below(3);
    std::vector<double> xs(m * n);
    for (auto& x : xs) x = static_cast<double>(rng.below(7)) * 0.5;
    const Dataset ds(xs, n);
    const std::size_t k = 1 + rng.below(m - 1);
    EXPECT_EQ(density_order(ds, k), scan_density_order(ds, k));
  }
}

TEST(DensityOrder, TableMatchesDirect) {
  const auto ds = gen_gaussian(2, 200, 1.0, 5);
  const MetricTree tree(ds, Metric::L1);
  const auto table = compute_knn_table(tree, 10, 1);
  EXPECT_EQ(density_order(ds, 7, 1, &table), density_order(ds, 7));
  const MetricTree tree2(ds, Metric::L2);
  const auto wrong = compute_knn_table(tree2, 10, 1);
  EXPECT_THROW(density_order(ds, 7, 1, &wrong), ParameterError);
}

TEST(RegionForQ, Endpoints) {
  const auto ds = line({0.0, 0.1, 0.2, 0.5, 0.8, 0.9, 1.0});
  auto cfg = small_config();
  const auto order = density_order(ds, 1);
  const auto empty = region_for_q(ds, order, 0.0, cfg, 1);
  EXPECT_EQ(empty.risk, 1.0);
  EXPECT_EQ(empty.advrisk, 1.0);
  EXPECT_TRUE(empty.feasible);
  EXPECT_TRUE(empty.region.base_rects.empty());

  cfg.T = 1;
  cfg.epsilon_inf = 0.0;
  cfg.alpha = 1e-9;
  const auto full = region_for_q(ds, order, 1.0, cfg, 1);
  EXPECT_EQ(full.risk, 0.0);
  EXPECT_EQ(full.advrisk, 0.0);
  EXPECT_FALSE(full.feasible);
  EXPECT_THROW(region_for_q(ds, order, 1.5, cfg, 1), ParameterError);
}

TEST(RegionForQ, TwoGroupInstance) {
  const auto ds = line({0.0, 0.1, 0.2, 0.5, 0.8, 0.9, 1.0});
  const auto cfg = small_config();
  const auto order = density_order(ds, 1);
  EXPECT_EQ(order.back(), 3u);  // 0.5 is the sparsest point
  const auto probe = region_for_q(ds, order, 6.0 / 7.0, cfg, 1);
  ASSERT_EQ(probe.region.base_rects.size(), 2u);
  std::vector<std::pair<double, double>> iv;
  for (const auto& r : probe.region.expanded_rects())
    iv.emplace_back(r.center[0] - r.edges[0] / 2, r.center[0] + r.edges[0] / 2);
  std::sort(iv.begin(), iv.end());
  EXPECT_NEAR(iv[0].first, -0.05, 1e-12);
  EXPECT_NEAR(iv[0].second, 0.25, 1e-12);
  EXPECT_NEAR(iv[1].first, 0.75, 1e-12);
  EXPECT_NEAR(iv[1].second, 1.05, 1e-12);
  EXPECT_DOUBLE_EQ(probe.risk, 1.0 / 7.0);
  EXPECT_FALSE(probe.feasible);
}

TEST(RegionForQ, FewerPointsThanRectangles) {
  const auto ds = line({0.0, 0.1, 0.2, 0.5});
  auto cfg = small_config();
  cfg.T = 3;
  const auto order = density_order(ds, 1);
  const auto probe = region_for_q(ds, order, 0.5, cfg, 1);
  EXPECT_TRUE(probe.region.base_rects.empty());
  EXPECT_EQ(probe.risk, 1.0);
}

TEST(BinarySearch, ProbeCountAndFeasibilityRecord) {
  const auto ds = gen_gaussian(2, 300, 1.0, 6);
  LinfConfig cfg;
  cfg.alpha = 0.05;
  cfg.epsilon_inf = 0.1;
  cfg.T = 3;
  cfg.k_density = 10;
  const auto order = density_order(ds, cfg.k_density);
  const auto out = binary_search_q(ds, order, cfg, 7);
  EXPECT_EQ(out.probes.size(), 8u);
  for (const auto& p : out.probes) {
    EXPECT_EQ(p.feasible, p.risk >= cfg.alpha);
    EXPECT_LE(p.risk, p.advrisk);
  }
  const auto& best = out.probes[out.best];
  EXPECT_TRUE(best.feasible);
  for (const auto& p : out.probes)
    if (p.feasible) EXPECT_LE(best.advrisk, p.advrisk);
}

TEST(BinarySearch, EverythingFeasibleConvergesUp) {
  // A far outlier is last in the density order and stays uncovered for q < 1.
  std::vector<double> xs;
  for (int i = 0; i < 200; ++i) xs.push_back(i / 200.0);
  xs.push_back(100.0);
  const auto ds = line(xs);
  LinfConfig cfg;
  cfg.alpha = 1e-6;
  cfg.epsilon_inf = 0.0;
  cfg.T = 1;
  cfg.k_density = 5;
  const auto order = density_order(ds, cfg.k_density);
  const auto out = binary_search_q(ds, order, cfg, 1);
  for (const auto& p : out.probes) EXPECT_TRUE(p.feasible);
  EXPECT_GE(out.probes.back().q, 1.0 - cfg.delta_bin);
  EXPECT_FALSE(out.degenerate);
}

TEST(BinarySearch, DegenerateFallback) {
  const auto ds = line({0.0, 0.1, 0.2, 0.3});
  LinfConfig cfg;
  cfg.alpha = 0.5;
  cfg.epsilon_inf = 10.0;  // any nonempty cover swallows every point
  cfg.T = 1;
  cfg.k_density = 1;
  const auto order = density_order(ds, 1);
  const auto out = binary_search_q(ds, order, cfg, 1);
  // The q = 1/8 probe covers no point, so it keeps risk 1 and stays feasible.
  EXPECT_FALSE(out.degenerate);
  const auto big = gen_uniform_cube(1, 2000, 3);
  const auto order2 = density_order(big, 1);
  cfg.delta_bin = 0.1;  // the smallest probe q = 1/16 still covers 125 points
  const auto out2 = binary_search_q(big, order2, cfg, 1);
  EXPECT_TRUE(out2.degenerate);
  EXPECT_EQ(out2.probes[out2.best].q, 0.0);
  EXPECT_EQ(out2.probes[out2.best].risk, 1.0);
}

TEST(BinarySearch, CloseToExhaustiveGridOnMixture) {
  const auto ds = gen_mixture({{0.0, 0.0}, {5.0, 5.0}}, {0.5, 0.5}, 0.3, 400, 9);
  LinfConfig cfg;
  cfg.alpha = 0.05;
  cfg.epsilon_inf = 0.1;
  cfg.T = 2;
  cfg.k_density = 10;
  const auto order = density_order(ds, cfg.k_density);
  const std::uint64_t seed = 17;
  const auto out = binary_search_q(ds, order, cfg, seed);
  double grid_best = 1.0;
  for (int i = 0; i <= 200; ++i) {
    const auto p = region_for_q(ds, order, i * cfg.delta_bin, cfg, seed);
    if (p.feasible) grid_best = std::min(grid_best, p.advrisk);
  }
  const auto& best = out.probes[out.best];
  EXPECT_NEAR(best.advrisk, grid_best, 0.02);
  // Both cluster centers lie outside the error region.
  for (const std::vector<double>& c : {std::vector<double>{0.0, 0.0}, std::vector<double>{5.0, 5.0}}) {
    bool covered = false;
    for (const auto& r : best.region.base_rects) covered |= r.contains(c);
    EXPECT_TRUE(covered);
  }
}

TEST(RunLinf, SingleRestartMatchesBisection) {
  const auto train = gen_gaussian(2, 300, 1.0, 10);
  const auto test = gen_gaussian(2, 300, 1.0, 11);
  LinfConfig cfg;
  cfg.alpha = 0.05;
  cfg.epsilon_inf = 0.1;
  cfg.T = 2;
  cfg.k_density = 10;
  cfg.restarts = 1;
  cfg.seed = 5;
  const auto res = run_linf(train, test, cfg);
  const auto order = density_order(train, cfg.k_density);
  const auto bis = binary_search_q(train, order, cfg, sub_seed(cfg.seed, 0));
  EXPECT_EQ(res.region, bis.probes[bis.best].region);
  EXPECT_EQ(res.risk_test, cr_risk(res.region, test));
  EXPECT_EQ(res.advrisk_test, cr_advrisk_bound(res.region, test));
}

TEST(RunLinf, DeterministicAndThreadIndependent) {
  const auto train = gen_gaussian(3, 400, 1.0, 12);
  const auto test = gen_gaussian(3, 400, 1.0, 13);
  LinfConfig cfg;
  cfg.alpha = 0.05;
  cfg.epsilon_inf = 0.2;
  cfg.T = 3;
  cfg.k_density = 10;
  cfg.restarts = 4;
  cfg.seed = 77;
  const auto a = run_linf(train, test, cfg);
  cfg.threads = 3;
  const auto b = run_linf(train, test, cfg);
  EXPECT_EQ(a.region, b.region);
  EXPECT_EQ(a.best_q, b.best_q);
  EXPECT_EQ(a.best_restart, b.best_restart);
  EXPECT_EQ(a.advrisk_test, b.advrisk_test);
  EXPECT_EQ(a.restart_stats.advrisk_train.mean, b.restart_stats.advrisk_train.mean);
  EXPECT_EQ(a.restart_stats.advrisk_train.stddev, b.restart_stats.advrisk_train.stddev);
}

TEST(RunLinf, InvariantsOnRandomInputs) {
  Rng rng(41);
  for (int c = 0; c < 30; ++c) {
    const auto train = gen_gaussian(1 + rng.below(3), 150, 1.0, rng.next_u64());
    const auto test = gen_gaussian(train.dim(), 150, 1.0, rng.next_u64());
    LinfConfig cfg;
    cfg.alpha = 0.02 + 0.1 * rng.uniform();
    cfg.epsilon_inf = rng.below(4) == 0 ? 0.0 : 0.3 * rng.uniform();
    cfg.T = 1 + rng.below(4);
    cfg.k_density = 5;
    cfg.restarts = 2;
    cfg.seed = rng.next_u64();
    const auto res = run_linf(train, test, cfg);
    EXPECT_GE(res.risk_train, cfg.alpha);
    EXPECT_LE(res.risk_train, res.advrisk_train);
    EXPECT_LE(res.risk_test, res.advrisk_test);
    if (cfg.epsilon_inf == 0.0) {
      EXPECT_EQ(res.risk_train, res.advrisk_train);
      EXPECT_EQ(res.risk_test, res.advrisk_test);
    }
    for (const auto& p : res.probes) EXPECT_EQ(p.feasible, p.risk >= cfg.alpha);
  }
}

TEST(SweepQ, GridSize) {
  const auto ds = gen_uniform_cube(2, 100, 1);
  LinfConfig cfg;
  cfg.alpha = 0.1;
  cfg.T = 2;
  cfg.k_density = 5;
  const auto rows = sweep_q(ds, &ds, cfg);
  EXPECT_EQ(rows.size(), 201u);
  EXPECT_EQ(rows.front().q, 0.0);
  EXPECT_EQ(rows.back().q, 1.0);
  for (const auto& r : rows) EXPECT_TRUE(r.risk_test.has_value());
  EXPECT_EQ(probes_to_csv({}).substr(0, 23), "q,feasible,risk,advrisk");
}

}  // namespace
