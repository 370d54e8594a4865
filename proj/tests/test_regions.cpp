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

#include <vector>

#include "concmeasure/oracle.hpp"
#include "concmeasure/random.hpp"
#include "concmeasure/regions.hpp"
#include "gtest/gtest.h"
#include "test_oracles.hpp"

namespace {

using namespace concmeasure;
using concmeasure::testing::line;

TEST(Rect, Expand) {
  const Hyperrectangle r{{0.0, 0.0}, {1.0, 2.0}};
  const auto e = rect_expand(r, 0.1);
  EXPECT_DOUBLE_EQ(e.edges[0], 1.2);
  EXPECT_DOUBLE_EQ(e.edges[1], 2.2);
  EXPECT_EQ(e.center, r.center);
  EXPECT_EQ(rect_expand(r, 0.0), r);
  const auto cube = rect_expand(Hyperrectangle{{0.5}, {0.0}}, 0.3);
  EXPECT_DOUBLE_EQ(cube.edges[0], 0.6);
  EXPECT_THROW(rect_expand(r, -0.1), ParameterError);
}

TEST(Rect, ClosedMembership) {
  const Hyperrectangle r{{0.0}, {2.0}};
  const std::vector<double> edge = {1.0}, out = {1.0000001};
  EXPECT_TRUE(r.contains(edge));
  EXPECT_FALSE(r.contains(out));
}

TEST(Ball, Expand) {
  const Ball b{{0.0}, 1.0};
  EXPECT_EQ(ball_expand(b, 0.5).radius, 1.5);
  EXPECT_EQ(ball_expand(b, 0.0), b);
  EXPECT_EQ(ball_expand(Ball{{0.3}, 0.0}, 0.2).radius, 0.2);
  const std::vector<double> on = {3.0, 4.0};
  EXPECT_TRUE((Ball{{0.0, 0.0}, 5.0}).contains(on));
}

TEST(Expand, SemigroupOnDyadicValues) {
  // Dyadic rationals keep the additions exact.
  Rng rng(3);
  int cases = 0;
  for (int c = 0; c < 250; ++c) {
    const double a = static_cast<double>(rng.below(64)) / 64.0;
    const double b = static_cast<double>(rng.below(64)) / 64.0;
    const Hyperrectangle r{{static_cast<double>(rng.below(16)) / 8.0},
                           {static_cast<double>(rng.below(16)) / 8.0}};
    EXPECT_EQ(rect_expand(rect_expand(r, a), b), rect_expand(r, a + b));
    const Ball ball{{0.0}, static_cast<double>(rng.below(16)) / 8.0};
    EXPECT_EQ(ball_expand(ball_expand(ball, a), b), ball_expand(ball, a + b));
    ++cases;
  }
  EXPECT_GE(cases, 200);
}

TEST(Expand, SemigroupWithinRounding) {
  Rng rng(4);
  for (int c = 0; c < 200; ++c) {
    const double a = rng.uniform(), b = rng.uniform();
    const Hyperrectangle r{{rng.uniform(), rng.uniform()}, {rng.uniform(), rng.uniform()}};
    const auto lhs = rect_expand(rect_expand(r, a), b);
    const auto rhs = rect_expand(r, a + b);
    for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(lhs.edges[j], rhs.edges[j], 1e-12);
  }
}

TEST(CrRisk, HandCountedInstance) {
  const auto ds = line({0.0, 0.1, 0.5, 0.9});
  const RectComplementRegion region{{Hyperrectangle{{0.05}, {0.1}}}, 0.05};
  EXPECT_DOUBLE_EQ(cr_risk(region, ds), 0.5);
  EXPECT_DOUBLE_EQ(cr_advrisk_bound(region, ds), 0.5);
}

TEST(CrRisk, Degenerate) {
  const auto ds = line({0.0, 0.4, 1.0});
  const RectComplementRegion all{{Hyperrectangle{{0.5}, {1.0}}}, 0.0};
  EXPECT_EQ(cr_risk(all, ds), 0.0);
  EXPECT_EQ(cr_advrisk_bound(all, ds), 0.0);
  const RectComplementRegion far{{Hyperrectangle{{50.0}, {1.0}}}, 0.1};
  EXPECT_EQ(cr_risk(far, ds), 1.0);
  EXPECT_EQ(cr_advrisk_bound(far, ds), 1.0);
  const RectComplementRegion none{{}, 0.2};
  EXPECT_EQ(cr_risk(none, ds), 1.0);
}

TEST(BuRisk, HandCountedInstance) {
  const auto ds = line({0.0, 0.5, 1.0});
  const BallUnionRegion region{{Ball{{0.0}, 0.1}}, 0.45};
  EXPECT_DOUBLE_EQ(bu_risk(region, ds), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(bu_advrisk(region, ds), 2.0 / 3.0);
  const BallUnionRegion big{{Ball{{0.0}, 2.0}}, 0.0};
  EXPECT_EQ(bu_risk(big, ds), 1.0);
  EXPECT_EQ(bu_advrisk(big, ds), 1.0);
}

TEST(BoundingRect, Examples) {
  const std::vector<std::vector<double>> pts = {{0.0, 0.0}, {1.0, 2.0}};
  const std::vector<double> origin = {0.0, 0.0};
  const auto r = bounding_rect(pts, origin);
  EXPECT_EQ(r.edges, (std::vector<double>{2.0, 4.0}));
  const std::vector<std::vector<double>> single = {{3.0, 4.0}};
  const std::vector<double> at = {3.0, 4.0};
  EXPECT_EQ(bounding_rect(single, at).edges, (std::vector<double>{0.0, 0.0}));
  const std::vector<std::vector<double>> pair = {{0.0, 0.0}, {2.0, 0.0}};
  const std::vector<double> med = {1.0, 0.0};
  EXPECT_EQ(bounding_rect(pair, med).edges, (std::vector<double>{2.0, 0.0}));
  EXPECT_THROW(bounding_rect(std::span<const std::vector<double>>{}, med), ParameterError);
}

TEST(BoundingRect, TightAndContaining) {
  Rng rng(5);
  for (int c = 0; c < 200; ++c) {
    const std::size_t n = 1 + rng.below(3), k = 1 + rng.below(8);
    std::vector<std::vector<double>> pts(k, std::vector<double>(n));
    for (auto& p : pts)
      for (auto& x : p) x = rng.uniform();
    std::vector<double> center(n);
    for (auto& x : center) x = rng.uniform();
    const auto r = bounding_rect(pts, center);
    for (const auto& p : pts) EXPECT_TRUE(r.contains(p));
    for (std::size_t j = 0; j < n; ++j) {
      if (r.edges[j] == 0.0) continue;
      auto shrunk = r;
      shrunk.edges[j] = std::nextafter(r.edges[j], 0.0) * (1 - 1e-12);
      bool lost = false;
      for (const auto& p : pts) lost |= !shrunk.contains(p);
      EXPECT_TRUE(lost);
    }
  }
}

// Random 2-D instances for the property sweeps below.
struct Instance {
  Dataset ds;
  RectComplementRegion cr;
  BallUnionRegion bu;
};

Instance random_instance(Rng& rng) {
  const std::size_t m = 5 + rng.below(40);
  std::vector<double> xs(2 * m);
  for (auto& x : xs) x = rng.uniform();
  Instance in{Dataset(xs, 2), {}, {}};
  const std::size_t t = 1 + rng.below(3);
  for (std::size_t i = 0; i < t; ++i) {
    in.cr.base_rects.push_back(
        {{rng.uniform(), rng.uniform()}, {0.5 * rng.uniform(), 0.5 * rng.uniform()}});
    in.bu.balls.push_back({{rng.uniform(), rng.uniform()}, 0.3 * rng.uniform()});
  }
  return in;
}

TEST(RegionProperties, MonotoneInEpsilonAndRiskBelowAdvrisk) {
  Rng rng(11);
  int cases = 0;
  for (int c = 0; c < 220; ++c) {
    auto in = random_instance(rng);
    const double e1 = 0.2 * rng.uniform(), e2 = e1 + 0.2 * rng.uniform();
    auto cr1 = in.cr, cr2 = in.cr;
    cr1.epsilon_inf = e1;
    cr2.epsilon_inf = e2;
    auto bu1 = in.bu, bu2 = in.bu;
    bu1.epsilon_2 = e1;
    bu2.epsilon_2 = e2;
    // The bound is measured against base rects, so it does not move with eps;
    // the exact expansion does.
    EXPECT_LE(cr_risk(cr1, in.ds), cr_advrisk_bound(cr1, in.ds));
    EXPECT_LE(bu_advrisk(bu1, in.ds), bu_advrisk(bu2, in.ds));
    EXPECT_LE(bu_risk(bu1, in.ds), bu_advrisk(bu1, in.ds));
    EXPECT_GE(cr_risk(cr1, in.ds), cr_risk(cr2, in.ds));
    ++cases;
  }
  EXPECT_GE(cases, 200);
}

TEST(RegionProperties, ZeroEpsilonCollapse) {
  Rng rng(12);
  for (int c = 0; c < 200; ++c) {
    auto in = random_instance(rng);
    in.cr.epsilon_inf = 0.0;
    in.bu.epsilon_2 = 0.0;
    EXPECT_EQ(cr_risk(in.cr, in.ds), cr_advrisk_bound(in.cr, in.ds));
    EXPECT_EQ(bu_risk(in.bu, in.ds), bu_advrisk(in.bu, in.ds));
  }
}

TEST(RegionProperties, BoundDominatesGridExpansion) {
  Rng rng(13);
  for (int c = 0; c < 60; ++c) {
    auto in = random_instance(rng);
    const double eps = 0.1 * rng.uniform();
    in.cr.epsilon_inf = eps;
    in.bu.epsilon_2 = eps;
    const double grid_cr = grid_expansion_measure(in.ds, Region{in.cr}, eps, Metric::LINF, 0.01);
    EXPECT_LE(grid_cr, cr_advrisk_bound(in.cr, in.ds));
    // Ball unions: bu_advrisk is exact and the grid is a lower approximation.
    const double grid_bu = grid_expansion_measure(in.ds, Region{in.bu}, eps, Metric::L2, 0.01);
    EXPECT_LE(grid_bu, bu_advrisk(in.bu, in.ds));
  }
}

TEST(RegionProperties, ExactOneDimensionalExpansionBelowBound) {
  Rng rng(14);
  for (int c = 0; c < 200; ++c) {
    const std::size_t m = 5 + rng.below(30);
    std::vector<double> xs(m);
    for (auto& x : xs) x = rng.uniform();
    const auto ds = line(xs);
    RectComplementRegion cr;
    cr.epsilon_inf = 0.05 * rng.uniform();
    for (std::size_t t = 0, T = 1 + rng.below(3); t < T; ++t)
      cr.base_rects.push_back({{rng.uniform()}, {0.4 * rng.uniform()}});
    const double eps = cr.epsilon_inf;
    const double exact = concmeasure::testing::exact_cr_expansion_1d(cr, eps, ds);
    EXPECT_LE(cr_risk(cr, ds), exact);
    EXPECT_LE(exact, cr_advrisk_bound(cr, ds) + 1e-15);
  }
}

TEST(RegionJson, RoundTripExact) {
  Rng rng(15);
  for (int c = 0; c < 30; ++c) {
    auto in = random_instance(rng);
    in.cr.epsilon_inf = rng.uniform();
    in.bu.epsilon_2 = rng.uniform();
    const auto cr_text = region_to_json(in.cr).dump();
    const auto bu_text = region_to_json(in.bu).dump();
    EXPECT_EQ(rect_region_from_json(nlohmann::ordered_json::parse(cr_text)), in.cr);
    EXPECT_EQ(ball_region_from_json(nlohmann::ordered_json::parse(bu_text)), in.bu);
  }
  EXPECT_THROW(rect_region_from_json(nlohmann::ordered_json::parse("{\"family\":\"x\"}")),
               ParseError);
}

}  // namespace
