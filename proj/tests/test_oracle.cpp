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
#include "concmeasure/oracle.hpp"
#include "concmeasure/random.hpp"
#include "concmeasure/search_l2.hpp"
#include "concmeasure/search_linf.hpp"
#include "gtest/gtest.h"
#include "test_oracles.hpp"

namespace {

using namespace concmeasure;
using concmeasure::testing::line;

// Single-interval optimum in 1-D by direct enumeration of [x_a, x_b] and the
// empty cover, with the same risk/bound semantics as the rect family.
double scan_best_interval(const std::vector<double>& xs, double alpha, double eps) {
  const std::size_t m = xs.size();
  const std::size_t target = snapped_ceil(alpha * static_cast<double>(m));
  double best = 1.0;  // empty cover: risk 1, bound 1
  for (double a : xs)
    for (double b : xs) {
      if (b < a) continue;
      // Same center/edge form the region evaluators use.
      const double u = a + (b - a) / 2, half = std::max(u - a, b - u);
      const double grown_half = (2 * half + 2 * eps) / 2;
      std::size_t outside_base = 0, outside_grown = 0;
      for (double x : xs) {
        outside_base += !(std::abs(x - u) <= half);
        outside_grown += !(std::abs(x - u) <= grown_half);
      }
      if (outside_grown >= target) best = std::min(best, outside_base / static_cast<double>(m));
    }
  return best;
}

TEST(BallOracle, TightCluster) {
  const auto ds = line({0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0});
  const auto r = brute_force_balls(ds, 0.2, 0.5, 1);
  ASSERT_TRUE(r.feasible);
  EXPECT_DOUBLE_EQ(r.optimal_advrisk, 0.2);
  EXPECT_DOUBLE_EQ(r.optimal_risk, 0.2);
}

TEST(BallOracle, Errors) {
  const auto ds = line({0.0, 1.0});
  EXPECT_THROW(brute_force_balls(ds, 0.5, 0.1, 3), ParameterError);
  EXPECT_THROW(brute_force_balls(gen_uniform_cube(1, 201, 1), 0.5, 0.1, 1), ParameterError);
  EXPECT_FALSE(brute_force_balls(ds, 1.5, 0.1, 1).feasible);
}

TEST(BallOracle, FirstGreedyStepIsOptimal) {
  Rng rng(61);
  for (int c = 0; c < 30; ++c) {
    const auto ds = gen_uniform_cube(2, 50, rng.next_u64());
    const double alpha = 0.05 + 0.3 * rng.uniform(), eps = 0.2 * rng.uniform();
    L2Config cfg;
    cfg.alpha = alpha;
    cfg.epsilon_2 = eps;
    cfg.T = 1;
    const auto greedy = run_l2(ds, ds, cfg);
    const auto opt = brute_force_balls(ds, alpha, eps, 1);
    EXPECT_EQ(greedy.advrisk_train, opt.optimal_advrisk);
  }
}

TEST(BallOracle, MonotoneInTAlphaEps) {
  Rng rng(62);
  for (int c = 0; c < 25; ++c) {
    const auto ds = gen_uniform_cube(2, 30, rng.next_u64());
    const double alpha = 0.1 + 0.3 * rng.uniform(), eps = 0.15 * rng.uniform();
    const double h1 = brute_force_balls(ds, alpha, eps, 1).optimal_advrisk;
    const double h2 = brute_force_balls(ds, alpha, eps, 2).optimal_advrisk;
    EXPECT_LE(h2, h1);
    EXPECT_LE(h1, brute_force_balls(ds, alpha + 0.1, eps, 1).optimal_advrisk);
    EXPECT_LE(h1, brute_force_balls(ds, alpha, eps + 0.05, 1).optimal_advrisk);
    const auto r2 = brute_force_balls(ds, alpha, eps, 2);
    const auto& region = std::get<BallUnionRegion>(r2.optimal_region);
    EXPECT_EQ(bu_advrisk(region, ds), r2.optimal_advrisk);
    EXPECT_GE(bu_risk(region, ds), alpha);
  }
}

TEST(RectOracle, SevenPointInstance) {
  const std::vector<double> xs = {0.0, 0.1, 0.2, 0.5, 0.8, 0.9, 1.0};
  const auto ds = line(xs);
  const auto r = brute_force_rects(ds, 0.14, 0.05);
  ASSERT_TRUE(r.feasible);
  EXPECT_DOUBLE_EQ(r.optimal_advrisk, scan_best_interval(xs, 0.14, 0.05));
  LinfConfig cfg;
  cfg.alpha = 0.14;
  cfg.epsilon_inf = 0.05;
  cfg.T = 1;
  cfg.k_density = 1;
  cfg.restarts = 3;
  const auto heur = run_linf(ds, ds, cfg);
  EXPECT_GE(heur.advrisk_train, r.optimal_advrisk);
}

TEST(RectOracle, MatchesIntervalScan) {
  Rng rng(63);
  for (int c = 0; c < 100; ++c) {
    const std::size_t m = 5 + rng.below(40);
    std::vector<double> xs(m);
    for (auto& x : xs) x = rng.below(2) ? rng.uniform() : static_cast<double>(rng.below(8)) / 8;
    const double alpha = 0.05 + 0.5 * rng.uniform(), eps = 0.1 * rng.uniform();
    const auto r = brute_force_rects(line(xs), alpha, eps);
    EXPECT_EQ(r.optimal_advrisk, scan_best_interval(xs, alpha, eps));
    const auto& region = std::get<RectComplementRegion>(r.optimal_region);
    EXPECT_GE(cr_risk(region, line(xs)), alpha);
    EXPECT_EQ(cr_advrisk_bound(region, line(xs)), r.optimal_advrisk);
  }
}

TEST(RectOracle, ZeroEpsilonAndInfeasible) {
  Rng rng(64);
  for (int c = 0; c < 20; ++c) {
    const auto ds = gen_uniform_cube(2, 30, rng.next_u64());
    const auto r = brute_force_rects(ds, 0.2, 0.0);
    EXPECT_EQ(r.optimal_advrisk, r.optimal_risk);
    EXPECT_DOUBLE_EQ(r.optimal_advrisk, 0.2);
  }
  EXPECT_FALSE(brute_force_rects(line({0.0, 1.0}), 1.5, 0.0).feasible);
  EXPECT_THROW(brute_force_rects(gen_uniform_cube(4, 10, 1), 0.1, 0.0), ParameterError);
  EXPECT_THROW(brute_force_rects(line({0.0, 1.0}), 0.1, 0.0, 2), ParameterError);
}

TEST(GridExpansion, BallsConvergeToExact) {
  Rng rng(65);
  for (int c = 0; c < 20; ++c) {
    const auto ds = gen_uniform_cube(2, 40, rng.next_u64());
    BallUnionRegion region{{Ball{{rng.uniform(), rng.uniform()}, 0.2 * rng.uniform()}}, 0.0};
    const double eps = 0.1 + 0.1 * rng.uniform();
    region.epsilon_2 = eps;
    const double exact = bu_advrisk(region, ds);
    const double coarse = grid_expansion_measure(ds, Region{region}, eps, Metric::L2, 0.02);
    const double fine = grid_expansion_measure(ds, Region{region}, eps, Metric::L2, 0.002);
    EXPECT_LE(coarse, exact);
    EXPECT_LE(fine, exact);
    EXPECT_LE(exact - fine, exact - coarse + 1.0 / 40.0);
    EXPECT_LE(exact - fine, 1.0 / 40.0);
  }
}

TEST(GridExpansion, OneDimensionalRectsMatchIntervals) {
  Rng rng(66);
  for (int c = 0; c < 40; ++c) {
    const std::size_t m = 20;
    std::vector<double> xs(m);
    for (auto& x : xs) x = rng.uniform();
    const auto ds = line(xs);
    RectComplementRegion region;
    region.epsilon_inf = 0.03;
    region.base_rects.push_back({{rng.uniform()}, {0.3 * rng.uniform()}});
    const double eps = 0.05;
    const double exact = concmeasure::testing::exact_cr_expansion_1d(region, eps, ds);
    const double grid = grid_expansion_measure(ds, Region{region}, eps, Metric::LINF, 1e-4);
    EXPECT_LE(grid, exact);
    EXPECT_LE(exact - grid, 1.0 / m + 1e-12);
  }
}

TEST(GridExpansion, ZeroEpsilonIsMembership) {
  const auto ds = line({0.0, 0.5, 1.0});
  const BallUnionRegion region{{Ball{{0.0}, 0.1}}, 0.0};
  EXPECT_DOUBLE_EQ(grid_expansion_measure(ds, Region{region}, 0.0, Metric::L2, 0.1), 1.0 / 3.0);
}

TEST(Analytic, Values) {
  EXPECT_NEAR(analytic_h_uniform(0.1, 0.05), 0.15, 1e-15);
  EXPECT_EQ(analytic_h_uniform(0.9, 0.5), 1.0);
  EXPECT_NEAR(analytic_h_gaussian(0.01, 0.5), 0.03389893912284281, 1e-10);
  EXPECT_EQ(analytic_h_gaussian(0.01, 0.0), 0.01);
  EXPECT_NEAR(normal_quantile(0.01), -2.3263478740408408, 1e-10);
  EXPECT_NEAR(normal_cdf(0.0), 0.5, 1e-16);
  for (double p : {1e-8, 0.001, 0.02425, 0.3, 0.5, 0.77, 0.999})
    EXPECT_NEAR(normal_cdf(normal_quantile(p)), p, 1e-12);
}

TEST(Analytic, EmpiricalConvergesOnUniform) {
  L2Config cfg;
  cfg.alpha = 0.1;
  cfg.epsilon_2 = 0.05;
  cfg.T = 1;
  std::vector<double> gaps;
  for (std::size_t m : {500u, 4000u, 20000u}) {
    const auto train = gen_uniform_cube(1, m, 100 + m);
    const auto test = gen_uniform_cube(1, m, 200 + m);
    const auto res = run_l2(train, test, cfg);
    gaps.push_back(std::abs(res.advrisk_test - analytic_h_uniform(0.1, 0.05)));
  }
  EXPECT_LE(gaps.back(), 0.02);
  EXPECT_LE(gaps.back(), gaps.front() + 0.01);
}

}  // namespace
