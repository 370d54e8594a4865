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

// Greedy search for a robust error region in B(T) under l2. Balls are placed
// one at a time, centered at training points. Each step scans every
// (center, k) pair with k in [k_lower, k_upper], takes r_k as the distance to
// the k-th nearest point not yet covered, and keeps the pair whose
// expansion adds the fewest points beyond its own coverage.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "data.hpp"
#include "errors.hpp"
#include "metric_index.hpp"
#include "numeric.hpp"
#include "parallel.hpp"
#include "random.hpp"
#include "regions.hpp"

namespace concmeasure {

struct L2Config {
  double alpha = 0.01;
  double epsilon_2 = 1.58;
  std::size_t T = 20;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  // Fraction of training points tried as centers. 1 = all (exact search);
  // smaller values are for smoke runs only.
  double center_fraction = 1.0;

  void validate() const {
    if (!(alpha > 0.0)) throw ParameterError("alpha must be positive");
    if (!(epsilon_2 >= 0.0)) throw ParameterError("epsilon must be nonnegative");
    if (T == 0) throw ParameterError("ball count T must be >= 1");
    if (!(center_fraction > 0.0 && center_fraction <= 1.0))
      throw ParameterError("center_fraction must lie in (0, 1]");
  }
};

struct GreedyState {
  std::vector<Ball> balls;
  std::vector<std::uint8_t> covered_init;  // S_init-hat, as a mask
  std::vector<std::uint8_t> covered_exp;   // S_exp-hat, as a mask
  std::size_t init_count = 0;
  std::size_t exp_count = 0;
  std::size_t t = 1;  // next step, 1-based

  explicit GreedyState(std::size_t m) : covered_init(m, 0), covered_exp(m, 0) {}
};

struct KBounds {
  std::size_t lower, upper;
  friend bool operator==(const KBounds&, const KBounds&) = default;
};

/// Target ceil(alpha m). While unmet: k_upper is the remaining deficit and
/// k_lower spreads it over the remaining steps. Once met: (1, 1).
inline KBounds k_bounds(const GreedyState& state, const L2Config& cfg, std::size_t m) {
  const std::size_t target = snapped_ceil(cfg.alpha * static_cast<double>(m));
  if (state.init_count >= target) return {1, 1};
  const std::size_t need = target - state.init_count;
  const std::size_t steps_left = cfg.T >= state.t ? cfg.T - state.t + 1 : 1;
  return {std::max<std::size_t>(1, (need + steps_left - 1) / steps_left), need};
}

struct CandidateScore {
  std::size_t center = 0;
  std::size_t k = 0;
  double radius = 0.0;
  long long overhead = 0;
  std::size_t init_size = 0;
  std::size_t exp_size = 0;
  std::vector<std::size_t> init_members;  // ascending
  std::vector<std::size_t> exp_members;   // ascending
};

/// Scores one (center, k). Returns nothing if fewer than k points are
/// uncovered.
inline std::optional<CandidateScore> candidate_score(std::size_t center, std::size_t k,
                                                     const GreedyState& state,
                                                     const MetricTree& tree,
                                                     const L2Config& cfg) {
  const Dataset& ds = tree.dataset();
  if (k == 0 || ds.size() - state.init_count < k) return std::nullopt;
  const auto u = ds.point(center);
  const auto nn = tree.knn(u, k, MaskExclusion{state.covered_init});
  CandidateScore s;
  s.center = center;
  s.k = k;
  s.radius = nn.back().distance;
  const double grown = s.radius + cfg.epsilon_2;
  tree.for_each_in_range(u, grown, [&](std::size_t i, double d) {
    if (!state.covered_init[i] && d <= s.radius) s.init_members.push_back(i);
    if (!state.covered_exp[i]) s.exp_members.push_back(i);
  });
  std::sort(s.init_members.begin(), s.init_members.end());
  std::sort(s.exp_members.begin(), s.exp_members.end());
  s.init_size = s.init_members.size();
  s.exp_size = s.exp_members.size();
  s.overhead = static_cast<long long>(s.exp_size) - static_cast<long long>(s.init_size);
  return s;
}

struct TraceRow {
  std::size_t t, k_lower, k_upper, center, k;
  double radius;
  long long overhead;
  double risk, advrisk;  // cumulative, on the training set
};

namespace detail {

struct CenterBest {
  bool valid = false;
  long long overhead = 0;
  std::size_t exp_size = 0;
  std::size_t k = 0;
  double radius = 0.0;
};

inline bool better(const CenterBest& a, const CenterBest& b) {
  if (!b.valid) return a.valid;
  if (!a.valid) return false;
  if (a.overhead != b.overhead) return a.overhead < b.overhead;
  if (a.exp_size != b.exp_size) return a.exp_size < b.exp_size;
  return a.k < b.k;
}

// Best k in [bounds.lower, bounds.upper] for one center from a single k-NN
// and a single range query. r[k-1] is nondecreasing, so every point lands in
// the bucket of the smallest k whose (expanded) radius reaches it; prefix
// sums then give |S_init(k)| and |S_exp(k)| for all k at once.
struct CenterScratch {
  std::vector<double> init_d, exp_d, r, r_grown;
  std::vector<std::size_t> init_bucket, exp_bucket;
};

/// Scores every admissible k for one center. Only the radii for k in
/// [lower, kmax] are ranked; closer points fold into the k = lower bucket.
inline CenterBest best_k_for_center(std::size_t center, KBounds bounds, const GreedyState& state,
                                    const MetricTree& tree, double eps, CenterScratch& sc) {
  const Dataset& ds = tree.dataset();
  const std::size_t kmax = std::min(bounds.upper, ds.size() - state.init_count);
  CenterBest best;
  if (kmax < bounds.lower) return best;
  const auto u = ds.point(center);
  const double r_max = tree.kth_distance(u, kmax, MaskExclusion{state.covered_init});
  sc.init_d.clear();
  sc.exp_d.clear();
  tree.for_each_in_range(u, r_max + eps, [&](std::size_t i, double d) {
    if (!state.covered_init[i] && d <= r_max) sc.init_d.push_back(d);
    if (!state.covered_exp[i]) sc.exp_d.push_back(d);
  });
  const std::size_t lo = bounds.lower - 1;
  const auto first = sc.init_d.begin() + static_cast<std::ptrdiff_t>(lo);
  std::nth_element(sc.init_d.begin(), first, sc.init_d.end());
  std::partial_sort(first, sc.init_d.begin() + static_cast<std::ptrdiff_t>(kmax), sc.init_d.end());
  const std::size_t width = kmax - lo;
  sc.r.assign(first, first + static_cast<std::ptrdiff_t>(width));
  sc.r_grown.resize(width);
  for (std::size_t j = 0; j < width; ++j) sc.r_grown[j] = sc.r[j] + eps;
  sc.init_bucket.assign(width, 0);
  sc.exp_bucket.assign(width, 0);
  for (double d : sc.init_d)
    if (d <= sc.r.back())
      ++sc.init_bucket[static_cast<std::size_t>(std::lower_bound(sc.r.begin(), sc.r.end(), d) - sc.r.begin())];
  for (double d : sc.exp_d)
    if (d <= sc.r_grown.back())
      ++sc.exp_bucket[static_cast<std::size_t>(
          std::lower_bound(sc.r_grown.begin(), sc.r_grown.end(), d) - sc.r_grown.begin())];
  std::size_t init_acc = 0, exp_acc = 0;
  for (std::size_t j = 0; j < width; ++j) {
    init_acc += sc.init_bucket[j];
    exp_acc += sc.exp_bucket[j];
    CenterBest cand{true, static_cast<long long>(exp_acc) - static_cast<long long>(init_acc),
                    exp_acc, lo + j + 1, sc.r[j]};
    if (better(cand, best)) best = cand;
  }
  return best;
}

inline std::vector<std::size_t> candidate_centers(std::size_t m, const L2Config& cfg) {
  std::vector<std::size_t> centers(m);
  for (std::size_t i = 0; i < m; ++i) centers[i] = i;
  if (cfg.center_fraction >= 1.0) return centers;
  Rng rng(sub_seed(cfg.seed, 0x63656e74ULL));
  rng.shuffle(centers);
  centers.resize(std::max<std::size_t>(1, snapped_floor(cfg.center_fraction * static_cast<double>(m))));
  std::sort(centers.begin(), centers.end());
  return centers;
}

}  // namespace detail

/// One greedy step: scan, pick (overhead, |S_exp|, center index, k)-minimal
/// candidate, append its ball and merge its coverage.
inline TraceRow greedy_step(GreedyState& state, const MetricTree& tree, const L2Config& cfg,
                            std::span<const std::size_t> centers) {
  const Dataset& ds = tree.dataset();
  const std::size_t m = ds.size();
  const KBounds bounds = k_bounds(state, cfg, m);
  if (m - state.init_count < bounds.lower)
    throw InfeasibleError("insufficient uncovered points: step " + std::to_string(state.t) +
                          " needs " + std::to_string(bounds.lower) + ", " +
                          std::to_string(m - state.init_count) + " remain");

  std::vector<detail::CenterBest> per_center(centers.size());
  const unsigned workers = resolve_threads(cfg.threads);
  const std::size_t block = (centers.size() + workers - 1) / workers;
  parallel_for(workers, workers, [&](std::size_t w) {
    detail::CenterScratch scratch;
    const std::size_t end = std::min(centers.size(), (w + 1) * block);
    for (std::size_t c = w * block; c < end; ++c)
      per_center[c] = detail::best_k_for_center(centers[c], bounds, state, tree, cfg.epsilon_2,
                                                scratch);
  });
  // Across centers the chain is (overhead, |S_exp|, center index, k).
  auto key = [&](std::size_t c) {
    const auto& b = per_center[c];
    return std::tuple(b.overhead, b.exp_size, centers[c], b.k);
  };
  std::size_t winner = centers.size();
  for (std::size_t c = 0; c < centers.size(); ++c) {
    if (!per_center[c].valid) continue;
    if (winner == centers.size() || key(c) < key(winner)) winner = c;
  }
  if (winner == centers.size()) throw InfeasibleError("insufficient uncovered points: no valid candidate");

  const auto chosen = candidate_score(centers[winner], per_center[winner].k, state, tree, cfg);
  for (auto i : chosen->init_members) state.covered_init[i] = 1;
  for (auto i : chosen->exp_members) state.covered_exp[i] = 1;
  state.init_count += chosen->init_size;
  state.exp_count += chosen->exp_size;
  state.balls.push_back(Ball{{ds.point(chosen->center).begin(), ds.point(chosen->center).end()},
                             chosen->radius});
  TraceRow row{state.t,
               bounds.lower,
               bounds.upper,
               chosen->center,
               chosen->k,
               chosen->radius,
               chosen->overhead,
               static_cast<double>(state.init_count) / static_cast<double>(m),
               static_cast<double>(state.exp_count) / static_cast<double>(m)};
  ++state.t;
  return row;
}

struct L2Result {
  BallUnionRegion region;
  std::vector<std::size_t> centers;  // training indices of the ball centers
  double risk_train = 0.0, advrisk_train = 0.0;
  double risk_test = 0.0, advrisk_test = 0.0;
  std::vector<TraceRow> trace;
};

/// Runs up to T greedy steps. Stops early only when the risk target is met
/// and every training point is already covered.
inline L2Result run_l2(const Dataset& train, const Dataset& test, const L2Config& cfg) {
  cfg.validate();
  if (train.dim() != test.dim()) throw DimensionError(train.dim(), test.dim());
  const std::size_t m = train.size();
  const std::size_t target = snapped_ceil(cfg.alpha * static_cast<double>(m));
  if (target > m)
    throw InfeasibleError("alpha * m = " + std::to_string(target) + " exceeds the " +
                          std::to_string(m) + " training points");

  const MetricTree tree(train, Metric::L2);
  const auto centers = detail::candidate_centers(m, cfg);
  GreedyState state(m);
  L2Result out;
  for (std::size_t t = 1; t <= cfg.T; ++t) {
    if (state.init_count >= target && state.init_count == m) break;
    out.trace.push_back(greedy_step(state, tree, cfg, centers));
    out.centers.push_back(out.trace.back().center);
  }
  out.region = BallUnionRegion{state.balls, cfg.epsilon_2};
  out.risk_train = static_cast<double>(state.init_count) / static_cast<double>(m);
  out.advrisk_train = static_cast<double>(state.exp_count) / static_cast<double>(m);
  if (bu_risk(out.region, train) != out.risk_train ||
      bu_advrisk(out.region, train) != out.advrisk_train)
    throw std::logic_error("greedy coverage bookkeeping disagrees with the final region");
  out.risk_test = bu_risk(out.region, test);
  out.advrisk_test = bu_advrisk(out.region, test);
  return out;
}

inline std::string trace_to_csv(const std::vector<TraceRow>& trace) {
  std::string out = "t,k_lower,k_upper,center,k,radius,overhead,risk,advrisk\n";
  for (const auto& r : trace)
    out += std::to_string(r.t) + ',' + std::to_string(r.k_lower) + ',' + std::to_string(r.k_upper) +
           ',' + std::to_string(r.center) + ',' + std::to_string(r.k) + ',' +
           format_double(r.radius) + ',' + std::to_string(r.overhead) + ',' +
           format_double(r.risk) + ',' + format_double(r.advrisk) + '\n';
  return out;
}

}  // namespace concmeasure
