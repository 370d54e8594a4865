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

// Datasets: loaders for IDX / CIFAR-10 binary / CSV, synthetic generators,
// seeded train/test splitting, and the empirical (counting) measure.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "numeric.hpp"
#include "random.hpp"

namespace concmeasure {

/// m points in R^n stored row-major. Immutable once built.
class Dataset {
 public:
  Dataset(std::vector<double> coords, std::size_t dim, std::string source_tag = {})
      : coords_(std::move(coords)), dim_(dim), tag_(std::move(source_tag)) {
    if (dim_ == 0) throw ParameterError("dataset dimension must be >= 1");
    if (coords_.empty()) throw ParameterError("dataset must contain at least one point");
    if (coords_.size() % dim_ != 0)
      throw ParameterError("coordinate count is not a multiple of the dimension");
  }

  static Dataset from_points(const std::vector<std::vector<double>>& points,
                             std::string source_tag = {}) {
    if (points.empty()) throw ParameterError("dataset must contain at least one point");
    const std::size_t dim = points.front().size();
    std::vector<double> coords;
    coords.reserve(points.size() * dim);
    for (const auto& p : points) {
      if (p.size() != dim) throw DimensionError(dim, p.size());
      coords.insert(coords.end(), p.begin(), p.end());
    }
    return Dataset(std::move(coords), dim, std::move(source_tag));
  }

  std::size_t size() const noexcept { return coords_.size() / dim_; }
  std::size_t dim() const noexcept { return dim_; }
  const std::string& source_tag() const noexcept { return tag_; }

  std::span<const double> point(std::size_t i) const {
    return {coords_.data() + i * dim_, dim_};
  }
  std::span<const double> coords() const noexcept { return coords_; }

  Dataset subset(std::span<const std::size_t> indices, std::string tag) const {
    std::vector<double> out;
    out.reserve(indices.size() * dim_);
    for (auto i : indices) {
      auto p = point(i);
      out.insert(out.end(), p.begin(), p.end());
    }
    return Dataset(std::move(out), dim_, std::move(tag));
  }

  /// FNV-1a over the dimension and the raw coordinate bytes.
  std::uint64_t content_hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](const void* data, std::size_t len) {
      const auto* b = static_cast<const unsigned char*>(data);
      for (std::size_t i = 0; i < len; ++i) {
        h ^= b[i];
        h *= 0x100000001b3ULL;
      }
    };
    const std::uint64_t d = dim_;
    mix(&d, sizeof d);
    mix(coords_.data(), coords_.size() * sizeof(double));
    return h;
  }

  friend bool operator==(const Dataset& a, const Dataset& b) {
    return a.dim_ == b.dim_ && a.coords_ == b.coords_;
  }

 private:
  std::vector<double> coords_;
  std::size_t dim_;
  std::string tag_;
};

/// The counting measure mu_S(A) = |S ∩ A| / |S|.
class EmpiricalMeasure {
 public:
  explicit EmpiricalMeasure(const Dataset& ds) : ds_(&ds) {}

  template <class Pred>
  std::size_t count(Pred&& contains) const {
    std::size_t c = 0;
    for (std::size_t i = 0; i < ds_->size(); ++i)
      if (contains(ds_->point(i))) ++c;
    return c;
  }

  template <class Pred>
  double measure(Pred&& contains) const {
    return static_cast<double>(count(std::forward<Pred>(contains))) /
           static_cast<double>(ds_->size());
  }

  const Dataset& dataset() const noexcept { return *ds_; }

 private:
  const Dataset* ds_;
};

// ---------------------------------------------------------------------------
// Binary loaders

namespace detail {

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::uint32_t read_be_u32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

}  // namespace detail

/// IDX with unsigned-byte payload. Leading dimension is the sample count,
/// the rest are flattened; bytes are scaled by 1/255.
inline Dataset load_idx_bytes(std::span<const std::uint8_t> bytes, std::string tag = "idx") {
  if (bytes.size() < 4) throw FormatError("IDX header truncated", bytes.size());
  if (bytes[0] != 0 || bytes[1] != 0) throw FormatError("bad IDX magic", bytes[0] != 0 ? 0 : 1);
  if (bytes[2] != 0x08) throw FormatError("IDX type code is not unsigned byte (0x08)", 2);
  const std::size_t ndim = bytes[3];
  if (ndim == 0) throw FormatError("IDX dimension count is zero", 3);
  const std::size_t header = 4 + 4 * ndim;
  if (bytes.size() < header) throw FormatError("IDX dimension sizes truncated", bytes.size());

  const std::size_t m = detail::read_be_u32(bytes, 4);
  if (m == 0) throw FormatError("IDX leading dimension is zero", 4);
  std::size_t n = 1;
  for (std::size_t d = 1; d < ndim; ++d) {
    const std::size_t extent = detail::read_be_u32(bytes, 4 + 4 * d);
    if (extent == 0) throw FormatError("IDX dimension size is zero", 4 + 4 * d);
    n *= extent;
  }
  const std::size_t payload = m * n;
  if (bytes.size() - header < payload)
    throw FormatError("IDX payload truncated: expected " + std::to_string(payload) + " bytes",
                      bytes.size());
  if (bytes.size() - header > payload)
    throw FormatError("IDX file has trailing bytes", header + payload);

  std::vector<double> coords(payload);
  for (std::size_t i = 0; i < payload; ++i) coords[i] = bytes[header + i] / 255.0;
  return Dataset(std::move(coords), n, std::move(tag));
}

inline Dataset load_idx(const std::filesystem::path& path) {
  const auto bytes = detail::read_file_bytes(path);
  return load_idx_bytes(bytes, path.filename().string());
}

inline constexpr std::size_t kCifarRecordBytes = 3073;
inline constexpr std::size_t kCifarPixels = 3072;

/// CIFAR-10 binary batches. Labels are skipped.
inline Dataset load_cifar_binary(const std::vector<std::filesystem::path>& paths) {
  if (paths.empty()) throw ParameterError("no input");
  std::vector<double> coords;
  for (const auto& path : paths) {
    const auto bytes = detail::read_file_bytes(path);
    if (bytes.empty() || bytes.size() % kCifarRecordBytes != 0)
      throw FormatError(path.string() + ": length " + std::to_string(bytes.size()) +
                            " is not a positive multiple of 3073",
                        bytes.size() - bytes.size() % kCifarRecordBytes);
    const std::size_t records = bytes.size() / kCifarRecordBytes;
    coords.reserve(coords.size() + records * kCifarPixels);
    for (std::size_t r = 0; r < records; ++r) {
      const std::size_t base = r * kCifarRecordBytes + 1;
      for (std::size_t j = 0; j < kCifarPixels; ++j) coords.push_back(bytes[base + j] / 255.0);
    }
  }
  return Dataset(std::move(coords), kCifarPixels, "cifar10");
}

// ---------------------------------------------------------------------------
// CSV

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? comma : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

inline bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace detail

/// Comma-separated, one point per row. A first row containing any
/// non-numeric cell is treated as a header.
inline Dataset parse_csv(std::string_view text, std::string tag = "csv") {
  std::vector<double> coords;
  std::size_t dim = 0;
  std::size_t row = 0;
  bool first_content_row = true;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    const auto line = detail::trim(text.substr(pos, nl - pos));
    pos = nl + 1;
    ++row;
    if (line.empty()) continue;

    const auto fields = detail::split_fields(line);
    std::vector<double> values(fields.size());
    bool numeric = true;
    std::size_t bad = 0;
    for (std::size_t j = 0; j < fields.size(); ++j) {
      if (!detail::parse_double(fields[j], values[j])) {
        numeric = false;
        bad = j;
        break;
      }
    }
    if (!numeric) {
      if (first_content_row) {
        first_content_row = false;
        continue;
      }
      throw ParseError("non-numeric cell in column " + std::to_string(bad + 1), row);
    }
    if (dim == 0) dim = values.size();
    if (values.size() != dim)
      throw ParseError("expected " + std::to_string(dim) + " cells, found " +
                           std::to_string(values.size()),
                       row);
    first_content_row = false;
    coords.insert(coords.end(), values.begin(), values.end());
  }
  if (coords.empty()) throw ParseError("no data rows", row);
  return Dataset(std::move(coords), dim, std::move(tag));
}

inline Dataset load_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str(), path.filename().string());
}

/// Shortest round-trip decimal, so reloading gives identical doubles.
inline std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

inline std::string to_csv(const Dataset& ds) {
  std::string out;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto p = ds.point(i);
    for (std::size_t j = 0; j < p.size(); ++j) {
      if (j) out += ',';
      out += format_double(p[j]);
    }
    out += '\n';
  }
  return out;
}

inline void write_csv(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out << to_csv(ds);
}

// ---------------------------------------------------------------------------
// Synthetic distributions

inline Dataset gen_uniform_cube(std::size_t n, std::size_t m, std::uint64_t seed) {
  if (n == 0 || m == 0) throw ParameterError("uniform cube needs n >= 1 and m >= 1");
  Rng rng(seed);
  std::vector<double> coords(n * m);
  for (auto& c : coords) c = rng.uniform();
  return Dataset(std::move(coords), n, "uniform");
}

inline Dataset gen_gaussian(std::size_t n, std::size_t m, double sigma, std::uint64_t seed) {
  if (n == 0 || m == 0) throw ParameterError("gaussian needs n >= 1 and m >= 1");
  if (!(sigma >= 0.0)) throw ParameterError("sigma must be nonnegative");
  Rng rng(seed);
  std::vector<double> coords(n * m);
  for (auto& c : coords) c = sigma * rng.normal();
  return Dataset(std::move(coords), n, "gaussian");
}

/// Isotropic Gaussian mixture; weights must sum to 1.
inline Dataset gen_mixture(const std::vector<std::vector<double>>& centers,
                           const std::vector<double>& weights, double sigma, std::size_t m,
                           std::uint64_t seed) {
  if (centers.empty() || centers.size() != weights.size())
    throw ParameterError("mixture needs one weight per center");
  if (m == 0) throw ParameterError("mixture needs m >= 1");
  if (!(sigma >= 0.0)) throw ParameterError("sigma must be nonnegative");
  const std::size_t n = centers.front().size();
  if (n == 0) throw ParameterError("mixture centers must have dimension >= 1");
  double total = 0.0;
  for (std::size_t c = 0; c < centers.size(); ++c) {
    if (centers[c].size() != n) throw DimensionError(n, centers[c].size());
    if (weights[c] < 0.0) throw ParameterError("mixture weights must be nonnegative");
    total += weights[c];
  }
  if (std::abs(total - 1.0) > 1e-9) throw ParameterError("mixture weights must sum to 1");

  Rng rng(seed);
  std::vector<double> coords;
  coords.reserve(n * m);
  for (std::size_t i = 0; i < m; ++i) {
    const double u = rng.uniform();
    std::size_t c = 0;
    double acc = weights[0];
    while (c + 1 < centers.size() && u >= acc) acc += weights[++c];
    for (std::size_t j = 0; j < n; ++j) coords.push_back(centers[c][j] + sigma * rng.normal());
  }
  return Dataset(std::move(coords), n, "mixture");
}

// ---------------------------------------------------------------------------
// Splitting

struct SplitOptions {
  double train_fraction = 0.5;
  std::uint64_t seed = 0;
};

/// Seeded uniform shuffle; the first floor(m * f) shuffled indices form the
/// training part. Each part keeps the original point order.
inline std::pair<Dataset, Dataset> split(const Dataset& ds, const SplitOptions& opts) {
  if (!(opts.train_fraction > 0.0 && opts.train_fraction < 1.0))
    throw ParameterError("train fraction must lie in (0, 1)");
  const std::size_t m = ds.size();
  const std::size_t train_size =
      snapped_floor(static_cast<double>(m) * opts.train_fraction);
  if (train_size == 0 || train_size == m)
    throw ParameterError("split leaves an empty part (m = " + std::to_string(m) + ")");

  std::vector<std::size_t> perm(m);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(opts.seed);
  rng.shuffle(perm);
  std::vector<std::size_t> train(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(train_size));
  std::vector<std::size_t> test(perm.begin() + static_cast<std::ptrdiff_t>(train_size), perm.end());
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {ds.subset(train, ds.source_tag() + ":train"), ds.subset(test, ds.source_tag() + ":test")};
}

}  // namespace concmeasure
