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

// Calculators for the generalization side of concentration estimates:
// the VC complexity penalty for T-fold rectangle / ball families, the
// two-sided generalization certificate, the (m, delta) schedule and its
// summability check, the l-infinity to l2 budget conversion, and the
// ConcentrationEstimate record that reports carry.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <variant>

#include <json.hpp>

#include "errors.hpp"
#include "metric_index.hpp"
#include "numeric.hpp"
#include "regions.hpp"

namespace concmeasure {

struct PenaltyParams {
  double n = 1;      // dimension
  double T = 1;      // primitives per region
  double m = 2;      // samples
  double delta = 0;  // deviation

  void validate() const {
    if (!(n >= 1)) throw ParameterError("penalty: n must be >= 1");
    if (!(T >= 1)) throw ParameterError("penalty: T must be >= 1");
    if (!(m >= 2)) throw ParameterError("penalty: m must be >= 2");
    if (!(delta >= 0.0 && delta <= 1.0)) throw ParameterError("penalty: delta must lie in [0, 1]");
  }
};

/// ln of 8 exp(n T ln T ln m - m delta^2 / 128), unclamped. Natural logs.
inline double log_complexity_penalty(const PenaltyParams& p) {
  p.validate();
  return std::log(8.0) + p.n * p.T * std::log(p.T) * std::log(p.m) - p.m * p.delta * p.delta / 128.0;
}

/// min(1, 8 exp(n T ln T ln m - m delta^2 / 128)).
inline double complexity_penalty(const PenaltyParams& p) {
  const double lg = log_complexity_penalty(p);
  return lg >= 0.0 ? 1.0 : std::exp(lg);
}

/// With probability >= confidence over the sample,
///   h(mu, alpha - delta, eps, G) - delta <= h_empirical <= h(mu, alpha + delta, eps, G) + delta.
/// The same penalty is used for G and for its eps-expansions, which are
/// contained in G for both families.
struct GeneralizationCertificate {
  double h_empirical = 0.0;
  double delta = 0.0;
  double penalty = 1.0;
  double confidence = 0.0;
  // Consequences of the bracket, clamped to [0, 1].
  double true_h_at_alpha_minus_delta_at_most = 1.0;  // h_emp + delta
  double true_h_at_alpha_plus_delta_at_least = 0.0;  // h_emp - delta

  std::string statement() const {
    return "with probability >= " + format_double(confidence) +
           ": h(mu, alpha-delta, eps, G) - delta <= " + format_double(h_empirical) +
           " <= h(mu, alpha+delta, eps, G) + delta, delta = " + format_double(delta);
  }

  bool vacuous() const noexcept { return confidence <= 0.0; }
};

inline GeneralizationCertificate generalization_certificate(double h_empirical,
                                                            const PenaltyParams& p) {
  if (!(h_empirical >= 0.0 && h_empirical <= 1.0))
    throw ParameterError("empirical concentration must lie in [0, 1]");
  GeneralizationCertificate c;
  c.h_empirical = h_empirical;
  c.delta = p.delta;
  c.penalty = complexity_penalty(p);
  c.confidence = std::max(0.0, 1.0 - 4.0 * c.penalty);
  c.true_h_at_alpha_minus_delta_at_most = std::min(1.0, h_empirical + p.delta);
  c.true_h_at_alpha_plus_delta_at_least = std::max(0.0, h_empirical - p.delta);
  return c;
}

struct Schedule {
  std::uint64_t m_required;
  double delta;
  friend bool operator==(const Schedule&, const Schedule&) = default;
};

/// m(T) = T^4 samples, delta(T) = 1/T.
inline Schedule schedule(std::uint64_t T) {
  if (T == 0) throw ParameterError("schedule: T must be >= 1");
  if (T > 65535) throw ParameterError("schedule: T^4 overflows 64 bits");
  return {T * T * T * T, 1.0 / static_cast<double>(T)};
}

/// ln of the unclamped penalty along the schedule:
///   ln 8 + 4 n T (ln T)^2 - T^2 / 128.
inline double log_schedule_term(double n, double T) {
  const double lt = std::log(T);
  return std::log(8.0) + 4.0 * n * T * lt * lt - T * T / 128.0;
}

inline double schedule_term(double n, double T) {
  const double lg = log_schedule_term(n, T);
  return lg >= 0.0 ? 1.0 : std::exp(lg);
}

/// Mechanical check that the schedule makes sum_T penalty(m(T), delta(T))
/// finite and delta(T) -> 0. From tail_start on, each term is below 1 and at
/// most `ratio` times its predecessor, so the series is dominated by
/// (tail_start - 1) + term(tail_start) / (1 - ratio).
struct ScheduleCheck {
  double n = 1;
  double ratio = 0.5;
  double concave_from = 1;  // the log-term is concave on [concave_from, inf)
  double tail_start = 1;
  double log_term_at_tail_start = 0;
  double partial_sum_bound = 0;
  bool penalties_summable = false;
  bool delta_vanishes = false;
};

inline ScheduleCheck check_schedule(double n, double ratio = 0.5) {
  if (!(n >= 1)) throw ParameterError("schedule check: n must be >= 1");
  if (!(ratio > 0.0 && ratio < 1.0)) throw ParameterError("schedule check: ratio must lie in (0, 1)");
  ScheduleCheck out;
  out.n = n;
  out.ratio = ratio;

  // Second derivative of the log-term: 8 n (ln T + 1) / T - 1/64.
  auto concave = [&](double T) { return 8.0 * n * (std::log(T) + 1.0) / T < 1.0 / 64.0; };
  double hi = 2;
  while (!concave(hi)) hi *= 2;
  double lo = hi / 2;
  while (hi - lo > 1) {
    const double mid = std::floor((lo + hi) / 2);
    (concave(mid) ? hi : lo) = mid;
  }
  out.concave_from = hi;

  // Past concave_from the increment is decreasing, so the first T where the
  // step ratio and the unit bound hold stays good forever.
  const double log_ratio = std::log(ratio);
  auto good = [&](double T) {
    return log_schedule_term(n, T) < 0.0 &&
           log_schedule_term(n, T + 1) - log_schedule_term(n, T) <= log_ratio;
  };
  hi = out.concave_from;
  while (!good(hi)) hi *= 2;
  lo = out.concave_from;
  if (!good(lo)) {
    while (hi - lo > 1) {
      const double mid = std::floor((lo + hi) / 2);
      (good(mid) ? hi : lo) = mid;
    }
    out.tail_start = hi;
  } else {
    out.tail_start = lo;
  }
  out.log_term_at_tail_start = log_schedule_term(n, out.tail_start);
  out.partial_sum_bound =
      (out.tail_start - 1) + std::exp(out.log_term_at_tail_start) / (1.0 - ratio);
  out.penalties_summable = std::isfinite(out.partial_sum_bound);
  out.delta_vanishes = true;  // delta(T) = 1/T
  return out;
}

/// eps_2 = sqrt(n / pi) * eps_inf: equal-volume l2 budget for an l-infinity one.
inline double eps_convert(double n, double eps_inf) {
  if (!(n >= 1)) throw ParameterError("convert: n must be >= 1");
  if (!(eps_inf >= 0.0)) throw ParameterError("convert: eps_inf must be nonnegative");
  return std::sqrt(n / std::numbers::pi) * eps_inf;
}

/// 1 - advrisk: an upper estimate of the best robustness any classifier
/// with risk >= alpha can reach, since the found region's expansion measure
/// upper-bounds the concentration function.
inline double intrinsic_robustness(double advrisk) {
  if (!(advrisk >= 0.0 && advrisk <= 1.0)) throw ParameterError("advrisk must lie in [0, 1]");
  return 1.0 - advrisk;
}

using Region = std::variant<RectComplementRegion, BallUnionRegion>;

/// One measured row: the found region and its measures on both splits.
struct ConcentrationEstimate {
  double alpha = 0.0;
  double epsilon = 0.0;
  Metric metric = Metric::LINF;
  std::size_t T = 0;
  double risk_train = 0.0, advrisk_train = 0.0;
  double risk_test = 0.0, advrisk_test = 0.0;
  bool feasible = true;  // train risk >= alpha
  Region region;
  std::optional<double> best_q;  // l-infinity search only
  std::optional<SplitStats> restart_stats;
};

inline nlohmann::ordered_json stats_to_json(const MeanStd& s) {
  return {{"mean", s.mean}, {"stddev", s.stddev}};
}

inline nlohmann::ordered_json to_json(const ConcentrationEstimate& e) {
  nlohmann::ordered_json j;
  j["alpha"] = e.alpha;
  j["epsilon"] = e.epsilon;
  j["metric"] = std::string(to_string(e.metric));
  j["T"] = e.T;
  j["feasible"] = e.feasible;
  if (e.best_q) j["best_q"] = *e.best_q;
  j["train"] = {{"risk", e.risk_train}, {"advrisk", e.advrisk_train}};
  j["test"] = {{"risk", e.risk_test}, {"advrisk", e.advrisk_test}};
  if (e.restart_stats) {
    const auto& s = *e.restart_stats;
    j["restart_stats"] = {{"risk_train", stats_to_json(s.risk_train)},
                          {"advrisk_train", stats_to_json(s.advrisk_train)},
                          {"risk_test", stats_to_json(s.risk_test)},
                          {"advrisk_test", stats_to_json(s.advrisk_test)}};
  }
  j["region"] = std::visit([](const auto& r) { return region_to_json(r); }, e.region);
  return j;
}

inline nlohmann::ordered_json to_json(const GeneralizationCertificate& c) {
  return {{"h_empirical", c.h_empirical},
          {"delta", c.delta},
          {"penalty", c.penalty},
          {"confidence", c.confidence},
          {"vacuous", c.vacuous()},
          {"true_h_at_alpha_minus_delta_at_most", c.true_h_at_alpha_minus_delta_at_most},
          {"true_h_at_alpha_plus_delta_at_least", c.true_h_at_alpha_plus_delta_at_least},
          {"statement", c.statement()}};
}

}  // namespace concmeasure
