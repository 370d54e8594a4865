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

// Ground truth at desk scale:
//   - exhaustive optimizers over B(T) (T <= 2) and CR(1) on tiny datasets,
//   - lattice-refined expansion measures for n <= 2,
//   - closed-form concentration of the 1-D uniform and Gaussian laws.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "data.hpp"
#include "errors.hpp"
#include "metric_index.hpp"
#include "numeric.hpp"
#include "parallel.hpp"
#include "regions.hpp"
#include "theory.hpp"

namespace concmeasure {

struct OracleResult {
  bool feasible = false;
  double optimal_advrisk = 1.0;
  double optimal_risk = 1.0;
  Region optimal_region;
  std::size_t candidates_examined = 0;
  // For rectangle optima: the closed per-axis interval [lo, hi] of the base
  // rectangle (exact; the center/edge form may round).
  std::vector<double> rect_lo, rect_hi;
};

inline constexpr std::size_t kOracleMaxPoints = 200;

namespace detail {

class Bits {
 public:
  explicit Bits(std::size_t m = 0) : words_((m + 63) / 64, 0) {}
  void set(std::size_t i) { words_[i / 64] |= std::uint64_t{1} << (i % 64); }
  std::size_t count() const {
    std::size_t c = 0;
    for (auto w : words_) c += static_cast<std::size_t>(std::popcount(w));
    return c;
  }
  static std::size_t union_count(const Bits& a, const Bits& b) {
    std::size_t c = 0;
    for (std::size_t i = 0; i < a.words_.size(); ++i)
      c += static_cast<std::size_t>(std::popcount(a.words_[i] | b.words_[i]));
    return c;
  }
  static Bits intersect(const Bits& a, const Bits& b) {
    Bits out;
    out.words_.resize(a.words_.size());
    for (std::size_t i = 0; i < a.words_.size(); ++i) out.words_[i] = a.words_[i] & b.words_[i];
    return out;
  }
  friend bool operator==(const Bits&, const Bits&) = default;
  friend auto operator<=>(const Bits&, const Bits&) = default;

 private:
  std::vector<std::uint64_t> words_;
};

}  // namespace detail

/// Exhaustive minimum of the expanded ball-union measure over unions of T
/// balls (T in {1, 2}) centered at data points with radii in the set of
/// center-to-point distances, subject to risk >= alpha.
inline OracleResult brute_force_balls(const Dataset& ds, double alpha, double eps2, std::size_t T) {
  if (T != 1 && T != 2) throw ParameterError("ball oracle supports T in {1, 2}");
  if (ds.size() > kOracleMaxPoints)
    throw ParameterError("ball oracle guard: m = " + std::to_string(ds.size()) + " exceeds " +
                         std::to_string(kOracleMaxPoints));
  if (!(alpha > 0.0)) throw ParameterError("alpha must be positive");
  if (!(eps2 >= 0.0)) throw ParameterError("epsilon must be nonnegative");
  const std::size_t m = ds.size();
  const std::size_t target = snapped_ceil(alpha * static_cast<double>(m));

  struct Candidate {
    std::size_t center;
    double radius;
    detail::Bits base, grown;
    std::size_t base_count, grown_count;
  };
  std::vector<Candidate> cands;
  for (std::size_t c = 0; c < m; ++c) {
    std::vector<double> dist(m);
    for (std::size_t i = 0; i < m; ++i) dist[i] = distance_unchecked(ds.point(c), ds.point(i), Metric::L2);
    std::vector<double> radii = dist;
    std::sort(radii.begin(), radii.end());
    radii.erase(std::unique(radii.begin(), radii.end()), radii.end());
    for (double r : radii) {
      Candidate cand{c, r, detail::Bits(m), detail::Bits(m), 0, 0};
      const double grown = r + eps2;
      for (std::size_t i = 0; i < m; ++i) {
        if (dist[i] <= r) cand.base.set(i);
        if (dist[i] <= grown) cand.grown.set(i);
      }
      cand.base_count = cand.base.count();
      cand.grown_count = cand.grown.count();
      cands.push_back(std::move(cand));
    }
  }

  OracleResult out;
  out.optimal_region = BallUnionRegion{{}, eps2};
  if (target > m) return out;

  std::size_t best_grown = m + 1, best_base = 0;
  std::size_t best_i = 0, best_j = 0;
  if (T == 1) {
    for (std::size_t i = 0; i < cands.size(); ++i) {
      ++out.candidates_examined;
      if (cands[i].base_count >= target && cands[i].grown_count < best_grown) {
        best_grown = cands[i].grown_count;
        best_base = cands[i].base_count;
        best_i = best_j = i;
      }
    }
  } else {
    // Visit candidates by ascending expanded count; a pair can never beat the
    // larger of its two expanded counts, which bounds both loops.
    std::vector<std::size_t> by_grown(cands.size());
    for (std::size_t i = 0; i < by_grown.size(); ++i) by_grown[i] = i;
    std::stable_sort(by_grown.begin(), by_grown.end(), [&](std::size_t a, std::size_t b) {
      return cands[a].grown_count < cands[b].grown_count;
    });
    for (std::size_t a = 0; a < by_grown.size(); ++a) {
      const auto& ca = cands[by_grown[a]];
      if (ca.grown_count > best_grown) break;
      for (std::size_t b = a; b < by_grown.size(); ++b) {
        const auto& cb = cands[by_grown[b]];
        if (cb.grown_count > best_grown) break;
        ++out.candidates_examined;
        const std::size_t base = detail::Bits::union_count(ca.base, cb.base);
        if (base < target) continue;
        const std::size_t grown = detail::Bits::union_count(ca.grown, cb.grown);
        const std::size_t i = std::min(by_grown[a], by_grown[b]);
        const std::size_t j = std::max(by_grown[a], by_grown[b]);
        if (grown < best_grown || (grown == best_grown && std::pair(i, j) < std::pair(best_i, best_j))) {
          best_grown = grown;
          best_base = base;
          best_i = i;
          best_j = j;
        }
      }
    }
  }
  if (best_grown > m) return out;

  out.feasible = true;
  out.optimal_advrisk = static_cast<double>(best_grown) / static_cast<double>(m);
  out.optimal_risk = static_cast<double>(best_base) / static_cast<double>(m);
  BallUnionRegion region{{}, eps2};
  for (std::size_t idx : {best_i, best_j}) {
    const auto& c = cands[idx];
    region.balls.push_back({{ds.point(c.center).begin(), ds.point(c.center).end()}, c.radius});
    if (best_i == best_j) break;
  }
  out.optimal_region = std::move(region);
  return out;
}

/// Exhaustive minimum over CR(1) with the search's region semantics: risk
/// counts points outside the eps-expanded rectangle, advrisk points outside
/// the base rectangle. Faces range over data coordinates: shrinking a
/// rectangle to the bounding box of the points it holds keeps advrisk and
/// can only raise risk, so these candidates contain an optimum.
inline OracleResult brute_force_rects(const Dataset& ds, double alpha, double eps_inf,
                                      std::size_t T = 1) {
  if (T != 1) throw ParameterError("rectangle oracle supports T = 1 only");
  if (ds.dim() > 3) throw ParameterError("rectangle oracle supports n <= 3");
  if (ds.size() > kOracleMaxPoints)
    throw ParameterError("rectangle oracle guard: m = " + std::to_string(ds.size()) +
                         " exceeds " + std::to_string(kOracleMaxPoints));
  if (!(alpha > 0.0)) throw ParameterError("alpha must be positive");
  if (!(eps_inf >= 0.0)) throw ParameterError("epsilon must be nonnegative");
  const std::size_t m = ds.size();
  const std::size_t n = ds.dim();
  const std::size_t target = snapped_ceil(alpha * static_cast<double>(m));

  // Each candidate face pair is stored as the (center, edge) rectangle side
  // the evaluators use, and membership is counted with that same formula.
  struct Interval {
    double lo, hi, center, edge;
    detail::Bits base, grown;
  };
  std::vector<std::vector<Interval>> axes(n);
  double total = 1.0;
  for (std::size_t j = 0; j < n; ++j) {
    std::vector<double> values(m);
    for (std::size_t i = 0; i < m; ++i) values[i] = ds.point(i)[j];
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    total *= static_cast<double>(values.size() * (values.size() + 1) / 2);
    if (total > 5e8) throw ParameterError("rectangle oracle guard: too many candidate rectangles");
    for (std::size_t a = 0; a < values.size(); ++a) {
      for (std::size_t b = a; b < values.size(); ++b) {
        const double lo = values[a], hi = values[b];
        const double center = lo + (hi - lo) / 2;
        const double edge = 2 * std::max(center - lo, hi - center);
        const Hyperrectangle side{{center}, {edge}};
        const Hyperrectangle grown_side = rect_expand(side, eps_inf);
        Interval iv{lo, hi, center, edge, detail::Bits(m), detail::Bits(m)};
        for (std::size_t i = 0; i < m; ++i) {
          const std::span<const double> x(&ds.point(i)[j], 1);
          if (side.contains(x)) iv.base.set(i);
          if (grown_side.contains(x)) iv.grown.set(i);
        }
        axes[j].push_back(std::move(iv));
      }
    }
  }

  OracleResult out;
  // The empty rectangle (E = everything) is always a candidate.
  out.candidates_examined = 1;
  std::size_t best_inside = 0;
  bool have_rect = false;
  std::vector<std::size_t> best_choice, choice(n);
  if (target > m) {
    out.optimal_region = RectComplementRegion{{}, eps_inf};
    return out;
  }
  out.feasible = true;

  // Depth-first over axes; the base intersection only shrinks, so a partial
  // choice holding no more points than the incumbent cannot win.
  auto recurse = [&](auto&& self, std::size_t axis, const detail::Bits* base,
                     const detail::Bits* grown) -> void {
    for (std::size_t k = 0; k < axes[axis].size(); ++k) {
      const auto& iv = axes[axis][k];
      const detail::Bits b = base ? detail::Bits::intersect(*base, iv.base) : iv.base;
      const std::size_t inside = b.count();
      if (inside == 0 || (have_rect && inside <= best_inside)) {
        ++out.candidates_examined;
        continue;
      }
      const detail::Bits g = grown ? detail::Bits::intersect(*grown, iv.grown) : iv.grown;
      choice[axis] = k;
      if (axis + 1 < n) {
        self(self, axis + 1, &b, &g);
        continue;
      }
      ++out.candidates_examined;
      if (m - g.count() < target) continue;
      best_inside = inside;
      have_rect = true;
      best_choice = choice;
    }
  };
  recurse(recurse, 0, nullptr, nullptr);

  if (!have_rect) {
    out.optimal_region = RectComplementRegion{{}, eps_inf};
    out.optimal_advrisk = out.optimal_risk = 1.0;
    return out;
  }
  Hyperrectangle rect;
  detail::Bits grown_all;
  for (std::size_t j = 0; j < n; ++j) {
    const auto& iv = axes[j][best_choice[j]];
    out.rect_lo.push_back(iv.lo);
    out.rect_hi.push_back(iv.hi);
    rect.center.push_back(iv.center);
    rect.edges.push_back(iv.edge);
    grown_all = j == 0 ? iv.grown : detail::Bits::intersect(grown_all, iv.grown);
  }
  out.optimal_advrisk = static_cast<double>(m - best_inside) / static_cast<double>(m);
  out.optimal_risk = static_cast<double>(m - grown_all.count()) / static_cast<double>(m);
  out.optimal_region = RectComplementRegion{{rect}, eps_inf};
  return out;
}

namespace detail {

inline bool in_error_region(const Region& region, std::span<const double> x) {
  if (const auto* cr = std::get_if<RectComplementRegion>(&region)) {
    for (const auto& r : cr->base_rects)
      if (rect_expand(r, cr->epsilon_inf).contains(x)) return false;
    return true;
  }
  const auto& bu = std::get<BallUnionRegion>(region);
  return std::any_of(bu.balls.begin(), bu.balls.end(), [&](const Ball& b) { return b.contains(x); });
}

}  // namespace detail

/// Fraction of points x for which E contains x itself or a lattice point
/// (spacing grid_step) within eps of x. Lattice witnesses are genuine, so
/// this never exceeds the exact measure of E_eps and converges to it as the
/// step shrinks.
inline double grid_expansion_measure(const Dataset& ds, const Region& region, double eps,
                                     Metric metric, double grid_step) {
  if (ds.dim() > 2) throw ParameterError("grid expansion supports n <= 2");
  if (!(grid_step > 0.0)) throw ParameterError("grid_step must be positive");
  if (!(eps >= 0.0)) throw ParameterError("epsilon must be nonnegative");
  const std::size_t n = ds.dim();
  return EmpiricalMeasure(ds).measure([&](std::span<const double> x) {
    if (detail::in_error_region(region, x)) return true;
    std::vector<long long> lo(n), hi(n);
    for (std::size_t j = 0; j < n; ++j) {
      lo[j] = static_cast<long long>(std::ceil((x[j] - eps) / grid_step));
      hi[j] = static_cast<long long>(std::floor((x[j] + eps) / grid_step));
      if (lo[j] > hi[j]) return false;
    }
    std::vector<double> g(n);
    std::vector<long long> k = lo;
    while (true) {
      for (std::size_t j = 0; j < n; ++j) g[j] = static_cast<double>(k[j]) * grid_step;
      if (distance_unchecked(x, g, metric) <= eps && detail::in_error_region(region, g)) return true;
      std::size_t j = 0;
      while (j < n && k[j] == hi[j]) {
        k[j] = lo[j];
        ++j;
      }
      if (j == n) return false;
      ++k[j];
    }
  });
}

/// Standard normal CDF.
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// Inverse standard normal CDF: Acklam's rational approximation followed by
/// one Halley step against normal_cdf (absolute error well below 1e-12).
inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw ParameterError("normal quantile needs p in (0, 1)");
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  } else if (p <= 1 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
  } else {
    const double q = std::sqrt(-2 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  }
  const double e = normal_cdf(x) - p;
  const double u = e * std::sqrt(2 * std::numbers::pi) * std::exp(x * x / 2);
  return x - u / (1 + x * u / 2);
}

/// Uniform on [0, 1]: an end interval of mass alpha is optimal.
inline double analytic_h_uniform(double alpha, double eps) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ParameterError("alpha must lie in (0, 1)");
  if (!(eps >= 0.0)) throw ParameterError("epsilon must be nonnegative");
  return std::min(1.0, alpha + eps);
}

/// Standard normal on R: a half-line of mass alpha is optimal.
inline double analytic_h_gaussian(double alpha, double eps) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ParameterError("alpha must lie in (0, 1)");
  if (!(eps >= 0.0)) throw ParameterError("epsilon must be nonnegative");
  if (eps == 0.0) return alpha;
  return normal_cdf(normal_quantile(alpha) + eps);
}

}  // namespace concmeasure
