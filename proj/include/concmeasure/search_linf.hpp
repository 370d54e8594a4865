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

// Heuristic search for a robust error region in CR(T) under l-infinity:
//
//   1. rank points by the l1 distance to their k-th nearest neighbor
//      (densest first);
//   2. for a covered fraction q, cluster the top floor(q m) points into T
//      l1-clusters and cover each with its minimal centered rectangle;
//   3. E_q is the complement of the eps-expanded rectangles; q is feasible
//      when the measure of E_q is at least alpha;
//   4. bisect q in [0, 1] and keep the feasible probe whose base rectangles
//      leave the fewest points uncovered.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "cluster.hpp"
#include "data.hpp"
#include "errors.hpp"
#include "metric_index.hpp"
#include "numeric.hpp"
#include "parallel.hpp"
#include "random.hpp"
#include "regions.hpp"

namespace concmeasure {

struct LinfConfig {
  double alpha = 0.01;
  double epsilon_inf = 0.3;
  std::size_t T = 10;
  std::size_t k_density = 50;
  double delta_bin = 0.005;
  std::size_t kmeans_iters = 30;
  std::size_t restarts = 10;
  std::uint64_t seed = 0;
  unsigned threads = 1;

  void validate() const {
    if (!(alpha > 0.0)) throw ParameterError("alpha must be positive");
    if (!(epsilon_inf >= 0.0)) throw ParameterError("epsilon must be nonnegative");
    if (T == 0) throw ParameterError("rectangle count T must be >= 1");
    if (k_density == 0) throw ParameterError("k_density must be >= 1");
    if (!(delta_bin > 0.0 && delta_bin < 1.0)) throw ParameterError("delta_bin must lie in (0, 1)");
    if (kmeans_iters == 0) throw ParameterError("kmeans_iters must be >= 1");
    if (restarts == 0) throw ParameterError("restarts must be >= 1");
  }
};

struct ProbeRecord {
  double q = 0.0;
  bool feasible = false;
  double risk = 1.0;
  double advrisk = 1.0;
  RectComplementRegion region;
};

struct LinfResult {
  double best_q = 0.0;
  RectComplementRegion region;
  double risk_train = 1.0, advrisk_train = 1.0;
  double risk_test = 1.0, advrisk_test = 1.0;
  bool degenerate = false;  // no feasible probe; region covers nothing
  std::vector<ProbeRecord> probes;
  std::size_t best_restart = 0;
  SplitStats restart_stats;
};

/// Point indices sorted ascending by l1 distance to the k-th nearest other
/// point, ties by index. A precomputed l1 table with at least k columns may
/// be supplied.
inline std::vector<std::size_t> density_order(const Dataset& ds, std::size_t k,
                                              unsigned threads = 1,
                                              const KnnTable* table = nullptr) {
  if (k == 0) throw ParameterError("k_density must be >= 1");
  if (k >= ds.size())
    throw ParameterError("k_density = " + std::to_string(k) + " must be below m = " +
                         std::to_string(ds.size()));
  std::vector<double> radius(ds.size());
  if (table != nullptr) {
    if (table->metric != Metric::L1 || table->m != ds.size() || table->k < k ||
        table->content_hash != ds.content_hash())
      throw ParameterError("k-NN table does not match the dataset");
    for (std::size_t i = 0; i < ds.size(); ++i) radius[i] = table->row(i)[k - 1].distance;
  } else {
    const MetricTree tree(ds, Metric::L1);
    parallel_for(ds.size(), threads, [&](std::size_t i) {
      radius[i] = tree.knn(ds.point(i), k, [i](std::size_t j) { return j == i; }).back().distance;
    });
  }
  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return radius[a] < radius[b] || (radius[a] == radius[b] && a < b);
  });
  return order;
}

/// Builds and evaluates E_q. With fewer than T covered points no clustering
/// is possible; the region then has no rectangles (E = everything, risk 1).
inline ProbeRecord region_for_q(const Dataset& ds, std::span<const std::size_t> order, double q,
                                const LinfConfig& cfg, std::uint64_t seed) {
  if (!(q >= 0.0 && q <= 1.0)) throw ParameterError("q must lie in [0, 1]");
  ProbeRecord probe;
  probe.q = q;
  probe.region.epsilon_inf = cfg.epsilon_inf;
  const std::size_t covered = std::min(order.size(), snapped_floor(q * static_cast<double>(order.size())));
  if (covered >= cfg.T) {
    const auto top = order.first(covered);
    const PointSet pts{&ds, top};
    const auto clustering = kmeans_l1(pts, cfg.T, cfg.kmeans_iters, seed, cfg.threads);
    std::vector<std::vector<std::size_t>> members(cfg.T);
    for (std::size_t pos = 0; pos < covered; ++pos)
      members[clustering.assignment[pos]].push_back(top[pos]);
    for (std::size_t c = 0; c < cfg.T; ++c) {
      if (members[c].empty()) continue;
      probe.region.base_rects.push_back(bounding_rect(ds, members[c], clustering.centroids[c]));
    }
  }
  probe.risk = cr_risk(probe.region, ds);
  probe.advrisk = cr_advrisk_bound(probe.region, ds);
  probe.feasible = probe.risk >= cfg.alpha;
  return probe;
}

struct BisectionOutcome {
  std::size_t best = 0;  // index into probes
  bool degenerate = false;
  std::vector<ProbeRecord> probes;
};

/// One restart: bisection over q, then argmin advrisk over all feasible
/// probes. If none is feasible the q = 0 probe is appended and returned.
inline BisectionOutcome binary_search_q(const Dataset& ds, std::span<const std::size_t> order,
                                        const LinfConfig& cfg, std::uint64_t seed) {
  BisectionOutcome out;
  double lower = 0.0, upper = 1.0;
  while (upper - lower > cfg.delta_bin) {
    const double q = (lower + upper) / 2;
    out.probes.push_back(region_for_q(ds, order, q, cfg, seed));
    if (out.probes.back().feasible)
      lower = q;
    else
      upper = q;
  }
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < out.probes.size(); ++i) {
    if (!out.probes[i].feasible) continue;
    if (!best || out.probes[i].advrisk < out.probes[*best].advrisk) best = i;
  }
  if (!best) {
    out.probes.push_back(region_for_q(ds, order, 0.0, cfg, seed));
    best = out.probes.size() - 1;
    out.degenerate = true;
  }
  out.best = *best;
  return out;
}

/// Full search with restarts. The winning restart is the one with the
/// lowest training advrisk (ties: lowest restart index); the test split is
/// only evaluated, never consulted for selection.
inline LinfResult run_linf(const Dataset& train, const Dataset& test, const LinfConfig& cfg,
                           const KnnTable* density_table = nullptr) {
  cfg.validate();
  if (train.dim() != test.dim()) throw DimensionError(train.dim(), test.dim());
  const auto order = density_order(train, cfg.k_density, cfg.threads, density_table);

  struct RestartResult {
    BisectionOutcome search;
    double risk_test = 1.0, advrisk_test = 1.0;
  };
  std::vector<RestartResult> restarts(cfg.restarts);
  LinfConfig inner = cfg;
  const unsigned outer_threads = cfg.restarts > 1 ? cfg.threads : 1;
  if (cfg.restarts > 1) inner.threads = 1;
  parallel_for(cfg.restarts, outer_threads, [&](std::size_t r) {
    auto& rr = restarts[r];
    rr.search = binary_search_q(train, order, inner, sub_seed(cfg.seed, r));
    const auto& best = rr.search.probes[rr.search.best];
    rr.risk_test = cr_risk(best.region, test);
    rr.advrisk_test = cr_advrisk_bound(best.region, test);
  });

  std::size_t winner = 0;
  for (std::size_t r = 1; r < restarts.size(); ++r) {
    const auto& a = restarts[r].search;
    const auto& b = restarts[winner].search;
    if (a.probes[a.best].advrisk < b.probes[b.best].advrisk) winner = r;
  }

  std::vector<double> rtr, atr, rte, ate;
  for (const auto& rr : restarts) {
    const auto& best = rr.search.probes[rr.search.best];
    rtr.push_back(best.risk);
    atr.push_back(best.advrisk);
    rte.push_back(rr.risk_test);
    ate.push_back(rr.advrisk_test);
  }

  LinfResult result;
  auto& w = restarts[winner];
  const auto& best = w.search.probes[w.search.best];
  result.best_q = best.q;
  result.region = best.region;
  result.risk_train = best.risk;
  result.advrisk_train = best.advrisk;
  result.risk_test = w.risk_test;
  result.advrisk_test = w.advrisk_test;
  result.degenerate = w.search.degenerate;
  result.probes = std::move(w.search.probes);
  result.best_restart = winner;
  result.restart_stats = {mean_std(rtr), mean_std(atr), mean_std(rte), mean_std(ate)};
  return result;
}

/// Probe log as CSV: q,feasible,risk,advrisk.
inline std::string probes_to_csv(const std::vector<ProbeRecord>& probes) {
  std::string out = "q,feasible,risk,advrisk\n";
  for (const auto& p : probes)
    out += format_double(p.q) + ',' + (p.feasible ? "1" : "0") + ',' + format_double(p.risk) +
           ',' + format_double(p.advrisk) + '\n';
  return out;
}

struct SweepQRow {
  double q;
  bool feasible;
  double risk, advrisk;
  std::optional<double> risk_test, advrisk_test;
};

/// Evaluates region_for_q on the grid q = 0, delta_bin, 2 delta_bin, ..., 1
/// with the restart-0 clustering seed.
inline std::vector<SweepQRow> sweep_q(const Dataset& train, const Dataset* test,
                                      const LinfConfig& cfg) {
  cfg.validate();
  if (test && test->dim() != train.dim()) throw DimensionError(train.dim(), test->dim());
  const auto order = density_order(train, cfg.k_density, cfg.threads);
  const std::size_t steps = snapped_floor(1.0 / cfg.delta_bin);
  std::vector<double> grid;
  for (std::size_t i = 0; i <= steps; ++i) grid.push_back(std::min(1.0, static_cast<double>(i) * cfg.delta_bin));
  if (grid.back() < 1.0 - 1e-12) grid.push_back(1.0);

  std::vector<SweepQRow> rows(grid.size());
  const std::uint64_t seed = sub_seed(cfg.seed, 0);
  LinfConfig inner = cfg;
  inner.threads = 1;
  parallel_for(grid.size(), cfg.threads, [&](std::size_t i) {
    const auto probe = region_for_q(train, order, grid[i], inner, seed);
    rows[i] = {probe.q, probe.feasible, probe.risk, probe.advrisk, std::nullopt, std::nullopt};
    if (test) {
      rows[i].risk_test = cr_risk(probe.region, *test);
      rows[i].advrisk_test = cr_advrisk_bound(probe.region, *test);
    }
  });
  return rows;
}

}  // namespace concmeasure
