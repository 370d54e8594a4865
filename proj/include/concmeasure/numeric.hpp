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

#include <cmath>
#include <cstddef>
#include <span>

namespace concmeasure {

// Products like alpha * m and q * m are meant as exact rationals; 0.29 * 100
// evaluates to 28.999999999999996. Snap to the nearest integer when within
// this distance before rounding.
inline constexpr double kIntegerSnap = 1e-9;

inline std::size_t snapped_floor(double x) {
  if (x <= 0.0) return 0;
  const double nearest = std::round(x);
  if (std::abs(x - nearest) <= kIntegerSnap) return static_cast<std::size_t>(nearest);
  return static_cast<std::size_t>(std::floor(x));
}

inline std::size_t snapped_ceil(double x) {
  if (x <= 0.0) return 0;
  const double nearest = std::round(x);
  if (std::abs(x - nearest) <= kIntegerSnap) return static_cast<std::size_t>(nearest);
  return static_cast<std::size_t>(std::ceil(x));
}

struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;  // sample (n - 1) standard deviation; 0 for a single value
};

/// Mean and spread of a quantity over restarts, per split.
struct SplitStats {
  MeanStd risk_train, advrisk_train, risk_test, advrisk_test;
};

inline MeanStd mean_std(std::span<const double> values) {
  MeanStd out;
  if (values.empty()) return out;
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return out;
}

}  // namespace concmeasure
