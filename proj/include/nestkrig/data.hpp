#pragma once

// Dataset ingestion and partitioning of design points into sub-model groups.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "nestkrig/errors.hpp"
#include "nestkrig/kernels.hpp"
#include "nestkrig/random.hpp"

namespace nestkrig {

struct Dataset {
  PointSet X;
  Vector y;
  std::vector<std::string> ids;          ///< empty unless an id column was selected
  std::vector<std::string> input_names;
  std::string response_name;
  double response_offset = 0.0;          ///< subtracted from y at load time

  Index size() const { return X.rows(); }
  Index dimension() const { return X.cols(); }
  /// Responses on the original (uncentred) scale.
  Vector original_responses() const { return y.array() + response_offset; }
};

/// Column roles for load_csv. Empty `inputs` means every column that is not
/// the response or the id; empty `response` means the last column.
struct CsvSchema {
  std::vector<std::string> inputs;
  std::string response;
  std::string id_column;
  bool center_response = false;
  bool has_response = true;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline double parse_finite(std::string_view field, std::size_t line, std::size_t column) {
  double value = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  if (!field.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (field.empty() || ec != std::errc() || ptr != last)
    throw ParseError(line, column, "not a number: '" + std::string(field) + "'");
  if (!std::isfinite(value)) throw ParseError(line, column, "non-finite value '" + std::string(field) + "'");
  return value;
}

inline bool skippable(std::string_view line) {
  line = trim(line);
  return line.empty() || line.front() == '#';
}

}  // namespace detail

/// Reads a comma-separated file with a header row. Lines starting with '#'
/// are comments.
inline Dataset load_csv(const std::string& path, const CsvSchema& schema = {}) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::FileNotFound, "cannot open '" + path + "'");

  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::skippable(line)) continue;
    for (auto f : detail::split_commas(line)) header.emplace_back(f);
    have_header = true;
    break;
  }
  if (!have_header) fail(ErrorKind::EmptyFile, "'" + path + "' has no header row");

  auto find_column = [&](const std::string& name) -> std::size_t {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ParseError(line_no, 1, "column '" + name + "' not found in header");
    return static_cast<std::size_t>(it - header.begin());
  };

  std::optional<std::size_t> response_col;
  if (schema.has_response) {
    response_col = schema.response.empty() ? header.size() - 1 : find_column(schema.response);
  }
  std::optional<std::size_t> id_col;
  if (!schema.id_column.empty()) id_col = find_column(schema.id_column);

  std::vector<std::size_t> input_cols;
  if (schema.inputs.empty()) {
    for (std::size_t c = 0; c < header.size(); ++c)
      if (c != response_col && c != id_col) input_cols.push_back(c);
  } else {
    for (const auto& name : schema.inputs) input_cols.push_back(find_column(name));
  }
  if (input_cols.empty()) throw ParseError(line_no, 1, "no input columns");

  std::vector<double> xs;
  std::vector<double> ys;
  Dataset data;
  for (auto c : input_cols) data.input_names.push_back(header[c]);
  if (response_col) data.response_name = header[*response_col];

  while (std::getline(in, line)) {
    ++line_no;
    if (detail::skippable(line)) continue;
    const auto fields = detail::split_commas(line);
    if (fields.size() != header.size())
      throw ParseError(line_no, std::min(fields.size(), header.size()) + 1,
                       "expected " + std::to_string(header.size()) + " fields, found " +
                           std::to_string(fields.size()));
    for (auto c : input_cols) xs.push_back(detail::parse_finite(fields[c], line_no, c + 1));
    if (response_col) ys.push_back(detail::parse_finite(fields[*response_col], line_no, *response_col + 1));
    if (id_col) data.ids.emplace_back(fields[*id_col]);
  }
  const Index n = static_cast<Index>(xs.size() / input_cols.size());
  if (n == 0) fail(ErrorKind::EmptyFile, "'" + path + "' has no data rows");

  data.X = Eigen::Map<PointSet>(xs.data(), n, static_cast<Index>(input_cols.size()));
  data.y = response_col ? Vector(Eigen::Map<Vector>(ys.data(), n)) : Vector::Zero(n);
  if (schema.center_response && response_col) {
    data.response_offset = data.y.mean();
    data.y.array() -= data.response_offset;
  }
  return data;
}

/// Query points: the named columns, or every column when `columns` is empty.
inline PointSet load_points(const std::string& path, const std::vector<std::string>& columns = {}) {
  CsvSchema schema;
  schema.inputs = columns;
  schema.has_response = false;
  return load_csv(path, schema).X;
}

/// Group labels for each design point; labels are 0-based internally and
/// written 1-based wherever they are serialized.
struct Partition {
  std::vector<std::size_t> labels;
  std::size_t groups = 0;

  Partition() = default;
  Partition(std::vector<std::size_t> labels_, std::size_t groups_) : labels(std::move(labels_)), groups(groups_) {}

  std::size_t size() const { return labels.size(); }

  std::vector<std::vector<Index>> members() const {
    std::vector<std::vector<Index>> out(groups);
    for (std::size_t i = 0; i < labels.size(); ++i) out[labels[i]].push_back(static_cast<Index>(i));
    return out;
  }

  std::vector<std::size_t> group_sizes() const {
    std::vector<std::size_t> out(groups, 0);
    for (auto l : labels) ++out[l];
    return out;
  }
};

namespace detail {
inline void check_group_count(std::size_t n, std::size_t p) {
  if (p == 0 || p > n)
    fail(ErrorKind::InvalidGroupCount,
         "group count " + std::to_string(p) + " must be in [1, " + std::to_string(n) + "]");
}
}  // namespace detail

/// Balanced random groups (sizes differ by at most one).
inline Partition partition_random(std::size_t n, std::size_t p, std::uint64_t seed) {
  detail::check_group_count(n, p);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng = make_rng(seed, 17);
  std::shuffle(order.begin(), order.end(), rng);
  Partition part{std::vector<std::size_t>(n), p};
  for (std::size_t r = 0; r < n; ++r) part.labels[order[r]] = r % p;
  return part;
}

/// Contiguous balanced blocks after a stable sort on the first coordinate;
/// the first n mod p blocks carry one extra point.
inline Partition partition_consecutive(const PointSet& X, std::size_t p) {
  const std::size_t n = static_cast<std::size_t>(X.rows());
  detail::check_group_count(n, p);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return X(static_cast<Index>(a), 0) < X(static_cast<Index>(b), 0); });
  Partition part{std::vector<std::size_t>(n), p};
  const std::size_t base = n / p;
  const std::size_t extra = n % p;
  std::size_t pos = 0;
  for (std::size_t g = 0; g < p; ++g) {
    const std::size_t len = base + (g < extra ? 1 : 0);
    for (std::size_t k = 0; k < len; ++k) part.labels[order[pos++]] = g;
  }
  return part;
}

struct KMeansResult {
  Partition partition;
  Matrix centroids;                      ///< p x d
  std::vector<double> objective_trace;   ///< within-cluster sum of squares after each iteration
  int iterations = 0;
};

namespace detail {

inline double squared_distance(const PointSet& X, Index i, const Matrix& centroids, Index c) {
  double s = 0.0;
  for (Index j = 0; j < X.cols(); ++j) {
    const double diff = X(i, j) - centroids(c, j);
    s += diff * diff;
  }
  return s;
}

inline double kmeans_objective(const PointSet& X, const std::vector<std::size_t>& labels, const Matrix& centroids) {
  double total = 0.0;
  for (Index i = 0; i < X.rows(); ++i) total += squared_distance(X, i, centroids, static_cast<Index>(labels[i]));
  return total;
}

inline void update_centroids(const PointSet& X, const std::vector<std::size_t>& labels, Matrix& centroids) {
  const Index p = centroids.rows();
  Matrix sums = Matrix::Zero(p, X.cols());
  std::vector<double> counts(static_cast<std::size_t>(p), 0.0);
  for (Index i = 0; i < X.rows(); ++i) {
    sums.row(static_cast<Index>(labels[i])) += X.row(i);
    counts[labels[i]] += 1.0;
  }
  for (Index c = 0; c < p; ++c)
    if (counts[static_cast<std::size_t>(c)] > 0) centroids.row(c) = sums.row(c) / counts[static_cast<std::size_t>(c)];
}

}  // namespace detail

/// Lloyd's algorithm with k-means++ seeding. Stops after max_iterations or when
/// no centroid moves by more than `tolerance`. An empty cluster takes the point
/// of the largest cluster that lies farthest from that cluster's centroid.
inline KMeansResult kmeans(const PointSet& X, std::size_t p, std::uint64_t seed, int max_iterations = 100,
                           double tolerance = 1e-8) {
  const std::size_t n = static_cast<std::size_t>(X.rows());
  detail::check_group_count(n, p);
  const Index d = X.cols();
  Rng rng = make_rng(seed, 29);

  // k-means++ seeding.
  Matrix centroids(static_cast<Index>(p), d);
  std::vector<char> chosen(n, 0);
  std::uniform_int_distribution<std::size_t> first(0, n - 1);
  std::size_t pick = first(rng);
  chosen[pick] = 1;
  centroids.row(0) = X.row(static_cast<Index>(pick));
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  for (std::size_t c = 1; c < p; ++c) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], detail::squared_distance(X, static_cast<Index>(i), centroids, static_cast<Index>(c - 1)));
      if (!chosen[i]) total += d2[i];
    }
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      double target = u(rng);
      pick = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (chosen[i] || d2[i] <= 0.0) continue;
        pick = i;
        target -= d2[i];
        if (target <= 0.0) break;
      }
    } else {
      // Remaining points coincide with chosen centres: take one uniformly.
      std::vector<std::size_t> free;
      for (std::size_t i = 0; i < n; ++i)
        if (!chosen[i]) free.push_back(i);
      std::uniform_int_distribution<std::size_t> any(0, free.size() - 1);
      pick = free[any(rng)];
    }
    chosen[pick] = 1;
    centroids.row(static_cast<Index>(c)) = X.row(static_cast<Index>(pick));
  }

  KMeansResult result;
  std::vector<std::size_t> labels(n, 0);
  for (int iter = 0; iter < max_iterations; ++iter) {
    // Assignment; ties go to the lowest centroid index.
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      std::size_t arg = 0;
      for (std::size_t c = 0; c < p; ++c) {
        const double dist = detail::squared_distance(X, static_cast<Index>(i), centroids, static_cast<Index>(c));
        if (dist < best) {
          best = dist;
          arg = c;
        }
      }
      labels[i] = arg;
    }
    // Repair empty clusters.
    for (std::size_t c = 0; c < p; ++c) {
      std::vector<std::size_t> sizes(p, 0);
      for (auto l : labels) ++sizes[l];
      if (sizes[c] > 0) continue;
      const std::size_t largest =
          static_cast<std::size_t>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
      double far = -1.0;
      std::size_t victim = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] != largest) continue;
        const double dist = detail::squared_distance(X, static_cast<Index>(i), centroids, static_cast<Index>(largest));
        if (dist > far) {
          far = dist;
          victim = i;
        }
      }
      labels[victim] = c;
      centroids.row(static_cast<Index>(c)) = X.row(static_cast<Index>(victim));
    }
    const Matrix previous = centroids;
    detail::update_centroids(X, labels, centroids);
    result.objective_trace.push_back(detail::kmeans_objective(X, labels, centroids));
    result.iterations = iter + 1;
    const double movement = (centroids - previous).rowwise().norm().maxCoeff();
    if (movement < tolerance) break;
  }
  result.partition = Partition{labels, p};
  result.centroids = centroids;
  return result;
}

inline Partition partition_kmeans(const PointSet& X, std::size_t p, std::uint64_t seed) {
  return kmeans(X, p, seed).partition;
}

}  // namespace nestkrig
