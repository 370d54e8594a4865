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

// l1 / l2 / l-infinity distances and an exact metric ball tree.
//
// The tree answers k-NN and closed-ball range queries with results identical
// to a linear scan, including the tie order (distance, then index).

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "data.hpp"
#include "errors.hpp"
#include "parallel.hpp"

namespace concmeasure {

enum class Metric : std::uint32_t { L1 = 1, L2 = 2, LINF = 3 };

inline std::string_view to_string(Metric m) {
  switch (m) {
    case Metric::L1: return "l1";
    case Metric::L2: return "l2";
    case Metric::LINF: return "linf";
  }
  return "unknown";
}

inline Metric metric_from_string(std::string_view s) {
  if (s == "l1") return Metric::L1;
  if (s == "l2") return Metric::L2;
  if (s == "linf") return Metric::LINF;
  throw ParameterError("unknown metric '" + std::string(s) + "' (expected l1, l2 or linf)");
}

/// No dimension check; callers guarantee a.size() == b.size().
inline double distance_unchecked(std::span<const double> a, std::span<const double> b,
                                 Metric metric) {
  const std::size_t n = a.size();
  switch (metric) {
    case Metric::L1: {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += std::abs(a[i] - b[i]);
      return s;
    }
    case Metric::L2: {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double d = a[i] - b[i];
        s += d * d;
      }
      return std::sqrt(s);
    }
    case Metric::LINF: {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s = std::max(s, std::abs(a[i] - b[i]));
      return s;
    }
  }
  return 0.0;
}

inline double distance(std::span<const double> a, std::span<const double> b, Metric metric) {
  if (a.size() != b.size()) throw DimensionError(a.size(), b.size());
  return distance_unchecked(a, b, metric);
}

struct Neighbor {
  std::size_t index;
  double distance;

  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// Strict weak order used for every neighbor ranking in the library.
inline bool neighbor_less(const Neighbor& a, const Neighbor& b) {
  return a.distance < b.distance || (a.distance == b.distance && a.index < b.index);
}

struct NoExclusion {
  constexpr bool operator()(std::size_t) const noexcept { return false; }
};

/// Exclusion predicate over a byte mask (nonzero = excluded).
struct MaskExclusion {
  std::span<const std::uint8_t> mask;
  bool operator()(std::size_t i) const noexcept { return mask[i] != 0; }
};

struct RangeResult {
  std::size_t count = 0;
  std::vector<std::size_t> indices;  // ascending
};

class MetricTree {
 public:
  static constexpr std::size_t kLeafSize = 16;

  MetricTree(const Dataset& ds, Metric metric) : ds_(&ds), metric_(metric) {
    order_.resize(ds.size());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    nodes_.reserve(2 * (ds.size() / kLeafSize + 1));
    build_node(0, ds.size());
    // Leaf scans read points in tree order, so keep a copy laid out that way.
    const std::size_t dim = ds.dim();
    packed_.resize(ds.size() * dim);
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const auto p = ds.point(order_[i]);
      std::copy(p.begin(), p.end(), packed_.begin() + static_cast<std::ptrdiff_t>(i * dim));
    }
  }

  const Dataset& dataset() const noexcept { return *ds_; }
  Metric metric() const noexcept { return metric_; }
  std::size_t node_count() const noexcept { return nodes_.size(); }

  /// The k closest non-excluded points, ascending by (distance, index).
  template <class Excluded = NoExclusion>
  std::vector<Neighbor> knn(std::span<const double> query, std::size_t k,
                            Excluded excluded = {}) const {
    check_query(query);
    if (k == 0) throw ParameterError("knn requires k >= 1");
    // Candidates at or below the current k-th distance accumulate in a
    // buffer that is cut back to k whenever it doubles.
    KnnBuffer buf{k, std::numeric_limits<double>::infinity(), {}};
    buf.items.reserve(2 * k + kLeafSize);
    knn_visit(0, query, excluded, buf);
    if (buf.items.size() < k)
      throw ParameterError("knn: k = " + std::to_string(k) + " exceeds the " +
                           std::to_string(buf.items.size()) + " available points");
    buf.shrink();
    std::sort(buf.items.begin(), buf.items.end(), neighbor_less);
    return std::move(buf.items);
  }

  /// Distance to the k-th closest non-excluded point, without ranking the
  /// others.
  template <class Excluded = NoExclusion>
  double kth_distance(std::span<const double> query, std::size_t k, Excluded excluded = {}) const {
    check_query(query);
    if (k == 0) throw ParameterError("knn requires k >= 1");
    KnnBuffer buf{k, std::numeric_limits<double>::infinity(), {}};
    buf.items.reserve(2 * k + kLeafSize);
    knn_visit(0, query, excluded, buf);
    if (buf.items.size() < k)
      throw ParameterError("knn: k = " + std::to_string(k) + " exceeds the " +
                           std::to_string(buf.items.size()) + " available points");
    buf.shrink();
    return buf.bound == std::numeric_limits<double>::infinity()
               ? std::max_element(buf.items.begin(), buf.items.end(), neighbor_less)->distance
               : buf.bound;
  }

  /// Calls visit(index, distance) for every non-excluded point with
  /// distance <= radius, in unspecified order.
  template <class Visitor, class Excluded = NoExclusion>
  void for_each_in_range(std::span<const double> query, double radius, Visitor&& visit,
                         Excluded excluded = {}) const {
    check_query(query);
    range_visit(0, query, radius, excluded, visit);
  }

  template <class Excluded = NoExclusion>
  RangeResult range_count(std::span<const double> query, double radius,
                          Excluded excluded = {}) const {
    if (radius < 0.0) throw ParameterError("range radius must be nonnegative");
    RangeResult out;
    for_each_in_range(
        query, radius, [&](std::size_t i, double) { out.indices.push_back(i); }, excluded);
    std::sort(out.indices.begin(), out.indices.end());
    out.count = out.indices.size();
    return out;
  }

  /// Checks the covering-radius and partition invariants; used by tests.
  bool check_invariants() const {
    std::vector<int> seen(ds_->size(), 0);
    for (const auto& node : nodes_) {
      for (std::size_t i = node.begin; i < node.end; ++i) {
        const double d = distance_unchecked(pivot(node), ds_->point(order_[i]), metric_);
        if (d > node.radius) return false;
        if (node.left < 0) ++seen[order_[i]];
      }
    }
    return std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; });
  }

 private:
  struct Node {
    std::size_t begin, end;
    std::size_t pivot_offset;
    double radius;
    std::ptrdiff_t left = -1, right = -1;
  };

  std::span<const double> pivot(const Node& node) const {
    return {pivots_.data() + node.pivot_offset, ds_->dim()};
  }

  void check_query(std::span<const double> query) const {
    if (query.size() != ds_->dim()) throw DimensionError(ds_->dim(), query.size());
  }

  // Lower bound on the distance from the query to anything in the node,
  // shaded down so floating-point rounding can never prune a true answer.
  static double lower_bound(double to_pivot, double radius) {
    const double lb = to_pivot - radius;
    return lb - 1e-9 * (to_pivot + radius);
  }

  std::size_t build_node(std::size_t begin, std::size_t end) {
    const std::size_t dim = ds_->dim();
    const std::size_t id = nodes_.size();
    nodes_.push_back(Node{begin, end, pivots_.size(), 0.0});
    pivots_.resize(pivots_.size() + dim, 0.0);
    double* piv = pivots_.data() + nodes_[id].pivot_offset;

    std::vector<double> lo(dim, std::numeric_limits<double>::infinity());
    std::vector<double> hi(dim, -std::numeric_limits<double>::infinity());
    for (std::size_t i = begin; i < end; ++i) {
      const auto p = ds_->point(order_[i]);
      for (std::size_t j = 0; j < dim; ++j) {
        piv[j] += p[j];
        lo[j] = std::min(lo[j], p[j]);
        hi[j] = std::max(hi[j], p[j]);
      }
    }
    const double count = static_cast<double>(end - begin);
    for (std::size_t j = 0; j < dim; ++j) piv[j] /= count;

    double radius = 0.0;
    for (std::size_t i = begin; i < end; ++i)
      radius = std::max(radius, distance_unchecked({piv, dim}, ds_->point(order_[i]), metric_));
    nodes_[id].radius = radius;

    std::size_t axis = 0;
    double spread = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
      if (hi[j] - lo[j] > spread) {
        spread = hi[j] - lo[j];
        axis = j;
      }
    }
    if (end - begin <= kLeafSize || spread <= 0.0) return id;

    const std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                     order_.begin() + static_cast<std::ptrdiff_t>(mid),
                     order_.begin() + static_cast<std::ptrdiff_t>(end),
                     [&](std::size_t a, std::size_t b) {
                       const double xa = ds_->point(a)[axis], xb = ds_->point(b)[axis];
                       return xa < xb || (xa == xb && a < b);
                     });
    const auto left = static_cast<std::ptrdiff_t>(build_node(begin, mid));
    const auto right = static_cast<std::ptrdiff_t>(build_node(mid, end));
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
  }

  struct KnnBuffer {
    std::size_t k;
    double bound;  // k-th smallest distance seen so far once k are held
    std::vector<Neighbor> items;

    void shrink() {
      if (items.size() <= k) return;
      std::nth_element(items.begin(), items.begin() + static_cast<std::ptrdiff_t>(k - 1), items.end(),
                       neighbor_less);
      items.resize(k);
      bound = items[k - 1].distance;
    }
    bool full() const noexcept { return items.size() >= k; }
  };

  template <class Excluded>
  void knn_visit(std::size_t id, std::span<const double> query, const Excluded& excluded,
                 KnnBuffer& buf) const {
    const Node& node = nodes_[id];
    if (node.left < 0) {
      const std::size_t dim = ds_->dim();
      for (std::size_t i = node.begin; i < node.end; ++i) {
        const std::size_t idx = order_[i];
        if (excluded(idx)) continue;
        const double d = distance_unchecked(query, {packed_.data() + i * dim, dim}, metric_);
        if (d <= buf.bound) buf.items.push_back({idx, d});
      }
      if (buf.items.size() >= 2 * buf.k) buf.shrink();
      if (buf.full() && buf.bound == std::numeric_limits<double>::infinity()) buf.shrink();
      return;
    }
    const Node& l = nodes_[static_cast<std::size_t>(node.left)];
    const Node& r = nodes_[static_cast<std::size_t>(node.right)];
    const double lb_l = lower_bound(distance_unchecked(query, pivot(l), metric_), l.radius);
    const double lb_r = lower_bound(distance_unchecked(query, pivot(r), metric_), r.radius);
    const bool left_first = lb_l <= lb_r;
    const std::size_t first = static_cast<std::size_t>(left_first ? node.left : node.right);
    const std::size_t second = static_cast<std::size_t>(left_first ? node.right : node.left);
    const double lb_first = left_first ? lb_l : lb_r;
    const double lb_second = left_first ? lb_r : lb_l;
    if (lb_first <= buf.bound) knn_visit(first, query, excluded, buf);
    if (lb_second <= buf.bound) knn_visit(second, query, excluded, buf);
  }

  template <class Excluded, class Visitor>
  void range_visit(std::size_t id, std::span<const double> query, double radius,
                   const Excluded& excluded, Visitor& visit) const {
    const Node& node = nodes_[id];
    if (lower_bound(distance_unchecked(query, pivot(node), metric_), node.radius) > radius)
      return;
    if (node.left < 0) {
      const std::size_t dim = ds_->dim();
      for (std::size_t i = node.begin; i < node.end; ++i) {
        const std::size_t idx = order_[i];
        if (excluded(idx)) continue;
        const double d = distance_unchecked(query, {packed_.data() + i * dim, dim}, metric_);
        if (d <= radius) visit(idx, d);
      }
      return;
    }
    range_visit(static_cast<std::size_t>(node.left), query, radius, excluded, visit);
    range_visit(static_cast<std::size_t>(node.right), query, radius, excluded, visit);
  }

  const Dataset* ds_;
  Metric metric_;
  std::vector<std::size_t> order_;
  std::vector<double> pivots_;
  std::vector<double> packed_;  // coordinates in order_ sequence
  std::vector<Node> nodes_;
};

// ---------------------------------------------------------------------------
// k-NN table and its on-disk cache.
//
// Layout (little-endian):
//   0  "CMKN"      4 bytes
//   4  version     u32 (= 1)
//   8  m           u64
//  16  k           u64
//  24  metric tag  u32 (1 = l1, 2 = l2, 3 = linf)
//  28  reserved    u32 (= 0)
//  32  content     u64 (Dataset::content_hash)
//  40  m * k pairs of (u64 index, f64 distance), row i = neighbors of point i

/// For each point, its k nearest other points (self index excluded).
struct KnnTable {
  std::size_t m = 0;
  std::size_t k = 0;
  Metric metric = Metric::L2;
  std::uint64_t content_hash = 0;
  std::vector<Neighbor> entries;

  std::span<const Neighbor> row(std::size_t i) const { return {entries.data() + i * k, k}; }

  friend bool operator==(const KnnTable&, const KnnTable&) = default;
};

inline KnnTable compute_knn_table(const MetricTree& tree, std::size_t k, unsigned threads = 0) {
  const Dataset& ds = tree.dataset();
  if (k == 0 || k >= ds.size())
    throw ParameterError("k-NN table needs 1 <= k < m (k = " + std::to_string(k) +
                         ", m = " + std::to_string(ds.size()) + ")");
  KnnTable table{ds.size(), k, tree.metric(), ds.content_hash(), {}};
  table.entries.resize(ds.size() * k);
  parallel_for(ds.size(), threads, [&](std::size_t i) {
    const auto nn = tree.knn(ds.point(i), k, [i](std::size_t j) { return j == i; });
    std::copy(nn.begin(), nn.end(), table.entries.begin() + static_cast<std::ptrdiff_t>(i * k));
  });
  return table;
}

namespace detail {

inline void put_le(std::string& out, std::uint64_t v, int bytes) {
  for (int b = 0; b < bytes; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xFF));
}

inline std::uint64_t get_le(std::span<const std::uint8_t> in, std::size_t offset, int bytes) {
  std::uint64_t v = 0;
  for (int b = 0; b < bytes; ++b) v |= std::uint64_t{in[offset + b]} << (8 * b);
  return v;
}

}  // namespace detail

inline constexpr std::size_t kKnnHeaderBytes = 40;

inline std::string encode_knn_table(const KnnTable& t) {
  std::string out = "CMKN";
  detail::put_le(out, 1, 4);
  detail::put_le(out, t.m, 8);
  detail::put_le(out, t.k, 8);
  detail::put_le(out, static_cast<std::uint32_t>(t.metric), 4);
  detail::put_le(out, 0, 4);
  detail::put_le(out, t.content_hash, 8);
  out.reserve(out.size() + t.entries.size() * 16);
  for (const auto& e : t.entries) {
    detail::put_le(out, e.index, 8);
    detail::put_le(out, std::bit_cast<std::uint64_t>(e.distance), 8);
  }
  return out;
}

inline KnnTable decode_knn_table(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kKnnHeaderBytes) throw FormatError("k-NN cache header truncated", bytes.size());
  if (!std::equal(bytes.begin(), bytes.begin() + 4, "CMKN"))
    throw FormatError("bad k-NN cache magic", 0);
  if (detail::get_le(bytes, 4, 4) != 1) throw FormatError("unsupported k-NN cache version", 4);
  KnnTable t;
  t.m = detail::get_le(bytes, 8, 8);
  t.k = detail::get_le(bytes, 16, 8);
  const auto tag = detail::get_le(bytes, 24, 4);
  if (tag < 1 || tag > 3) throw FormatError("bad metric tag in k-NN cache", 24);
  t.metric = static_cast<Metric>(tag);
  t.content_hash = detail::get_le(bytes, 32, 8);
  if (t.k != 0 && t.m > (bytes.size() - kKnnHeaderBytes) / 16 / t.k)
    throw FormatError("k-NN cache payload truncated", bytes.size());
  const std::size_t expected = kKnnHeaderBytes + t.m * t.k * 16;
  if (bytes.size() != expected)
    throw FormatError("k-NN cache payload has wrong length", std::min(bytes.size(), expected));
  t.entries.resize(t.m * t.k);
  for (std::size_t e = 0; e < t.entries.size(); ++e) {
    const std::size_t off = kKnnHeaderBytes + 16 * e;
    t.entries[e].index = detail::get_le(bytes, off, 8);
    if (t.entries[e].index >= t.m) throw FormatError("neighbor index out of range", off);
    t.entries[e].distance = std::bit_cast<double>(detail::get_le(bytes, off + 8, 8));
  }
  return t;
}

inline std::filesystem::path knn_cache_path(const std::filesystem::path& dir, const Dataset& ds,
                                            Metric metric, std::size_t k) {
  std::ostringstream name;
  name << std::hex << ds.content_hash() << std::dec << '-' << to_string(metric) << "-k" << k
       << ".knn";
  return dir / name.str();
}

inline void write_knn_table(const KnnTable& t, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  const auto bytes = encode_knn_table(t);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline KnnTable read_knn_table(const std::filesystem::path& path) {
  const auto bytes = detail::read_file_bytes(path);
  return decode_knn_table(bytes);
}

/// Loads a cached table matching (dataset, metric, k) from dir, or computes
/// and stores it. An unreadable or stale cache file is recomputed.
inline KnnTable cached_knn_table(const std::filesystem::path& dir, const MetricTree& tree,
                                 std::size_t k, unsigned threads = 0) {
  const auto path = knn_cache_path(dir, tree.dataset(), tree.metric(), k);
  if (std::filesystem::exists(path)) {
    try {
      auto t = read_knn_table(path);
      if (t.m == tree.dataset().size() && t.k == k && t.metric == tree.metric() &&
          t.content_hash == tree.dataset().content_hash())
        return t;
    } catch (const FormatError&) {
    }
  }
  auto t = compute_knn_table(tree, k, threads);
  std::filesystem::create_directories(dir);
  write_knn_table(t, path);
  return t;
}

}  // namespace concmeasure
