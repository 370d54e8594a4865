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

#pragma once

// Candidate error regions.
//
//   RectComplementRegion: E = R^n minus the union of eps-expanded rectangles.
//   BallUnionRegion:      E = union of balls.
//
// All memberships are closed (<=).

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "data.hpp"
#include "errors.hpp"
#include "metric_index.hpp"

namespace concmeasure {

/// Rect(u, r): { x : |x_j - u_j| <= r_j / 2 for all j }.
struct Hyperrectangle {
  std::vector<double> center;
  std::vector<double> edges;

  bool contains(std::span<const double> x) const {
    for (std::size_t j = 0; j < center.size(); ++j)
      if (!(std::abs(x[j] - center[j]) <= edges[j] / 2)) return false;
    return true;
  }

  friend bool operator==(const Hyperrectangle&, const Hyperrectangle&) = default;
};

struct Ball {
  std::vector<double> center;
  double radius = 0.0;

  bool contains(std::span<const double> x) const {
    return distance_unchecked(x, center, Metric::L2) <= radius;
  }

  friend bool operator==(const Ball&, const Ball&) = default;
};

/// Exact l-infinity eps-expansion of a rectangle: every edge grows by 2 eps.
inline Hyperrectangle rect_expand(const Hyperrectangle& rect, double eps) {
  if (!(eps >= 0.0)) throw ParameterError("expansion budget must be nonnegative");
  Hyperrectangle out = rect;
  for (auto& e : out.edges) e += 2.0 * eps;
  return out;
}

/// Exact l2 eps-expansion of a ball.
inline Ball ball_expand(const Ball& ball, double eps) {
  if (!(eps >= 0.0)) throw ParameterError("expansion budget must be nonnegative");
  return Ball{ball.center, ball.radius + eps};
}

/// Smallest rectangle centered at `center` containing every point.
inline Hyperrectangle bounding_rect(std::span<const std::vector<double>> points,
                                    std::span<const double> center) {
  if (points.empty()) throw ParameterError("bounding_rect of an empty cluster");
  Hyperrectangle rect{{center.begin(), center.end()}, std::vector<double>(center.size(), 0.0)};
  for (const auto& p : points) {
    if (p.size() != center.size()) throw DimensionError(center.size(), p.size());
    for (std::size_t j = 0; j < center.size(); ++j)
      rect.edges[j] = std::max(rect.edges[j], 2.0 * std::abs(p[j] - center[j]));
  }
  return rect;
}

/// Same, for the dataset points selected by `indices`.
inline Hyperrectangle bounding_rect(const Dataset& ds, std::span<const std::size_t> indices,
                                    std::span<const double> center) {
  if (indices.empty()) throw ParameterError("bounding_rect of an empty cluster");
  if (center.size() != ds.dim()) throw DimensionError(ds.dim(), center.size());
  Hyperrectangle rect{{center.begin(), center.end()}, std::vector<double>(center.size(), 0.0)};
  for (auto i : indices) {
    const auto p = ds.point(i);
    for (std::size_t j = 0; j < center.size(); ++j)
      rect.edges[j] = std::max(rect.edges[j], 2.0 * std::abs(p[j] - center[j]));
  }
  return rect;
}

struct RectComplementRegion {
  std::vector<Hyperrectangle> base_rects;  // empty only for the degenerate "everything" region
  double epsilon_inf = 0.0;

  std::vector<Hyperrectangle> expanded_rects() const {
    std::vector<Hyperrectangle> out;
    out.reserve(base_rects.size());
    for (const auto& r : base_rects) out.push_back(rect_expand(r, epsilon_inf));
    return out;
  }

  friend bool operator==(const RectComplementRegion&, const RectComplementRegion&) = default;
};

struct BallUnionRegion {
  std::vector<Ball> balls;
  double epsilon_2 = 0.0;

  friend bool operator==(const BallUnionRegion&, const BallUnionRegion&) = default;
};

namespace detail {

inline void check_rect_dims(const std::vector<Hyperrectangle>& rects, const Dataset& ds) {
  for (const auto& r : rects) {
    if (r.center.size() != ds.dim()) throw DimensionError(ds.dim(), r.center.size());
    if (r.edges.size() != ds.dim()) throw DimensionError(ds.dim(), r.edges.size());
  }
}

inline void check_ball_dims(const std::vector<Ball>& balls, const Dataset& ds) {
  for (const auto& b : balls)
    if (b.center.size() != ds.dim()) throw DimensionError(ds.dim(), b.center.size());
}

inline double fraction_outside(const std::vector<Hyperrectangle>& rects, const Dataset& ds) {
  check_rect_dims(rects, ds);
  return EmpiricalMeasure(ds).measure([&](std::span<const double> x) {
    return std::none_of(rects.begin(), rects.end(),
                        [&](const Hyperrectangle& r) { return r.contains(x); });
  });
}

inline double fraction_inside(const std::vector<Ball>& balls, const Dataset& ds) {
  check_ball_dims(balls, ds);
  return EmpiricalMeasure(ds).measure([&](std::span<const double> x) {
    return std::any_of(balls.begin(), balls.end(), [&](const Ball& b) { return b.contains(x); });
  });
}

}  // namespace detail

/// Measure of E itself: points outside every expanded rectangle.
inline double cr_risk(const RectComplementRegion& region, const Dataset& ds) {
  return detail::fraction_outside(region.expanded_rects(), ds);
}

/// Upper bound on the measure of E's eps-expansion: points outside every
/// base rectangle. A point inside some base rectangle is more than eps away
/// (in l-infinity) from the complement of that rectangle's expansion.
inline double cr_advrisk_bound(const RectComplementRegion& region, const Dataset& ds) {
  return detail::fraction_outside(region.base_rects, ds);
}

inline double bu_risk(const BallUnionRegion& region, const Dataset& ds) {
  return detail::fraction_inside(region.balls, ds);
}

/// Exact: the expansion of a union is the union of the expansions.
inline double bu_advrisk(const BallUnionRegion& region, const Dataset& ds) {
  std::vector<Ball> grown;
  grown.reserve(region.balls.size());
  for (const auto& b : region.balls) grown.push_back(ball_expand(b, region.epsilon_2));
  return detail::fraction_inside(grown, ds);
}

// ---------------------------------------------------------------------------
// Serialization. Doubles are written in shortest round-trip form.

inline nlohmann::ordered_json region_to_json(const RectComplementRegion& region) {
  nlohmann::ordered_json j;
  j["family"] = "rect_complement";
  j["metric"] = "linf";
  j["epsilon"] = region.epsilon_inf;
  auto& prims = j["rects"] = nlohmann::ordered_json::array();
  for (const auto& r : region.base_rects)
    prims.push_back({{"center", r.center}, {"edges", r.edges}});
  return j;
}

inline nlohmann::ordered_json region_to_json(const BallUnionRegion& region) {
  nlohmann::ordered_json j;
  j["family"] = "ball_union";
  j["metric"] = "l2";
  j["epsilon"] = region.epsilon_2;
  auto& prims = j["balls"] = nlohmann::ordered_json::array();
  for (const auto& b : region.balls) prims.push_back({{"center", b.center}, {"radius", b.radius}});
  return j;
}

inline RectComplementRegion rect_region_from_json(const nlohmann::ordered_json& j) {
  try {
    if (j.at("family") != "rect_complement") throw ParseError("not a rect_complement region", 1);
    RectComplementRegion region;
    region.epsilon_inf = j.at("epsilon").get<double>();
    for (const auto& r : j.at("rects"))
      region.base_rects.push_back(
          {r.at("center").get<std::vector<double>>(), r.at("edges").get<std::vector<double>>()});
    return region;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed region document: ") + e.what(), 1);
  }
}

inline BallUnionRegion ball_region_from_json(const nlohmann::ordered_json& j) {
  try {
    if (j.at("family") != "ball_union") throw ParseError("not a ball_union region", 1);
    BallUnionRegion region;
    region.epsilon_2 = j.at("epsilon").get<double>();
    for (const auto& b : j.at("balls"))
      region.balls.push_back({b.at("center").get<std::vector<double>>(), b.at("radius").get<double>()});
    return region;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed region document: ") + e.what(), 1);
  }
}

}  // namespace concmeasure
