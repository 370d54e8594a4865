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

// k-means style clustering under the l1 metric: assignment by minimal l1
// distance, centroid update by coordinate-wise median.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "data.hpp"
#include "errors.hpp"
#include "metric_index.hpp"
#include "parallel.hpp"
#include "random.hpp"

namespace concmeasure {

/// A subset of a dataset, addressed by index. Positions 0..size()-1 refer
/// to indices[0..].
struct PointSet {
  const Dataset* ds;
  std::span<const std::size_t> indices;

  std::size_t size() const noexcept { return indices.size(); }
  std::span<const double> operator[](std::size_t pos) const { return ds->point(indices[pos]); }
};

struct Clustering {
  std::vector<std::vector<double>> centroids;
  std::vector<std::size_t> assignment;  // position in the PointSet -> cluster id
  std::size_t iterations_run = 0;
  double inertia = 0.0;
  std::vector<double> inertia_history;  // after each (assign, update) round
  std::vector<std::size_t> smallest_cluster_history;  // fewest members at each round end
};

/// Median of the values; for an even count, the midpoint of the two middle
/// order statistics.
inline double median_of(std::vector<double>& values) {
  const std::size_t n = values.size();
  const auto mid = values.begin() + static_cast<std::ptrdiff_t>(n / 2);
  std::nth_element(values.begin(), mid, values.end());
  const double upper = *mid;
  if (n % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), mid);
  return lower + (upper - lower) / 2;
}

/// Distance-weighted seeding under l1: the first centroid is uniform, each
/// further one is drawn with probability proportional to its l1 distance to
/// the nearest centroid chosen so far.
inline std::vector<std::vector<double>> seed_centroids(const PointSet& pts, std::size_t T,
                                                       std::uint64_t seed) {
  if (T == 0) throw ParameterError("cluster count must be >= 1");
  if (pts.size() < T) throw ParameterError("fewer points than clusters");
  Rng rng(seed);
  std::vector<std::vector<double>> centroids;
  centroids.reserve(T);
  auto first = static_cast<std::size_t>(rng.below(pts.size()));
  centroids.emplace_back(pts[first].begin(), pts[first].end());

  std::vector<double> nearest(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i)
    nearest[i] = distance_unchecked(pts[i], centroids[0], Metric::L1);

  while (centroids.size() < T) {
    double total = 0.0;
    for (double d : nearest) total += d;
    std::size_t pick = 0;
    if (total <= 0.0) {
      pick = static_cast<std::size_t>(rng.below(pts.size()));
    } else {
      const double target = rng.uniform() * total;
      double acc = 0.0;
      pick = pts.size();
      std::size_t last_positive = 0;
      for (std::size_t i = 0; i < pts.size(); ++i) {
        if (nearest[i] <= 0.0) continue;
        last_positive = i;
        acc += nearest[i];
        if (acc > target) {
          pick = i;
          break;
        }
      }
      if (pick == pts.size()) pick = last_positive;
    }
    centroids.emplace_back(pts[pick].begin(), pts[pick].end());
    for (std::size_t i = 0; i < pts.size(); ++i)
      nearest[i] = std::min(nearest[i], distance_unchecked(pts[i], centroids.back(), Metric::L1));
  }
  return centroids;
}

namespace detail {

inline std::size_t nearest_centroid(std::span<const double> x,
                                    const std::vector<std::vector<double>>& centroids) {
  std::size_t best = 0;
  double best_d = distance_unchecked(x, centroids[0], Metric::L1);
  for (std::size_t c = 1; c < centroids.size(); ++c) {
    const double d = distance_unchecked(x, centroids[c], Metric::L1);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

inline std::vector<double> cluster_median(const PointSet& pts,
                                          const std::vector<std::size_t>& members) {
  const std::size_t dim = pts.ds->dim();
  std::vector<double> centroid(dim);
  std::vector<double> column(members.size());
  for (std::size_t j = 0; j < dim; ++j) {
    for (std::size_t i = 0; i < members.size(); ++i) column[i] = pts[members[i]][j];
    centroid[j] = median_of(column);
  }
  return centroid;
}

inline double inertia_of(const PointSet& pts, const std::vector<std::size_t>& assignment,
                         const std::vector<std::vector<double>>& centroids) {
  double total = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i)
    total += distance_unchecked(pts[i], centroids[assignment[i]], Metric::L1);
  return total;
}

}  // namespace detail

/// Alternates l1 assignment and median update until the assignment stops
/// changing or max_iterations rounds have run. Empty clusters are repaired by
/// moving in the point farthest from its own centroid. A final assignment
/// pass makes every point's cluster an l1-nearest centroid; clusters left
/// empty by that pass keep their centroid but have no members.
inline Clustering kmeans_l1(const PointSet& pts, std::size_t T, std::size_t max_iterations,
                            std::uint64_t seed, unsigned threads = 1) {
  if (T == 0) throw ParameterError("cluster count must be >= 1");
  if (max_iterations == 0) throw ParameterError("max_iterations must be >= 1");
  if (pts.size() < T) throw ParameterError("fewer points than clusters");

  Clustering out;
  out.centroids = seed_centroids(pts, T, seed);
  std::vector<std::size_t> assignment(pts.size(), T);  // T = unassigned
  std::vector<std::size_t> next(pts.size());

  auto assign_all = [&](std::vector<std::size_t>& dest) {
    parallel_for(pts.size(), threads,
                 [&](std::size_t i) { dest[i] = detail::nearest_centroid(pts[i], out.centroids); });
  };

  for (std::size_t round = 1; round <= max_iterations; ++round) {
    assign_all(next);
    if (next == assignment) break;
    assignment.swap(next);
    out.iterations_run = round;

    std::vector<std::vector<std::size_t>> members(T);
    for (std::size_t i = 0; i < pts.size(); ++i) members[assignment[i]].push_back(i);
    parallel_for(T, threads, [&](std::size_t c) {
      if (!members[c].empty()) out.centroids[c] = detail::cluster_median(pts, members[c]);
    });

    for (std::size_t c = 0; c < T; ++c) {
      if (!members[c].empty()) continue;
      std::size_t donor_pos = pts.size();
      double far = -1.0;
      for (std::size_t i = 0; i < pts.size(); ++i) {
        if (members[assignment[i]].size() < 2) continue;
        const double d = distance_unchecked(pts[i], out.centroids[assignment[i]], Metric::L1);
        if (d > far) {
          far = d;
          donor_pos = i;
        }
      }
      const std::size_t donor = assignment[donor_pos];
      auto& dm = members[donor];
      dm.erase(std::find(dm.begin(), dm.end(), donor_pos));
      members[c].push_back(donor_pos);
      assignment[donor_pos] = c;
      out.centroids[c].assign(pts[donor_pos].begin(), pts[donor_pos].end());
      out.centroids[donor] = detail::cluster_median(pts, dm);
    }
    out.inertia_history.push_back(detail::inertia_of(pts, assignment, out.centroids));
    std::size_t smallest = pts.size();
    for (const auto& mc : members) smallest = std::min(smallest, mc.size());
    out.smallest_cluster_history.push_back(smallest);
  }

  assign_all(assignment);
  out.assignment = std::move(assignment);
  out.inertia = detail::inertia_of(pts, out.assignment, out.centroids);
  return out;
}

}  // namespace concmeasure
