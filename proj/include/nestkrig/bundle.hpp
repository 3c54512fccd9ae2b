#pragma once

// Fitted-model bundle: a line-oriented text file holding everything needed to
// predict (kernel, training data, partition, tree) plus a data fingerprint.
//
//   nestkrig-bundle 1
//   fingerprint <16 hex digits>
//   kernel <family>
//   variance <sigma^2>
//   variance_estimated <true|false>
//   lengthscales <theta_1> ... <theta_d>
//   response_offset <value>
//   inputs <name_1>,...,<name_d>
//   response <name>
//   points <n> <d> <p>
//   <x_1> ... <x_d> <y> <group label, 1-based>      (n lines)
//   tree <number of aggregation layers>
//   layer <node count>
//   <children of one node, 1-based>                  (one line per node)
//   end
//
// Reals are written in shortest round-trip form, so a bundle reproduces the
// fitted model bit for bit.

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "nestkrig/config.hpp"
#include "nestkrig/data.hpp"
#include "nestkrig/errors.hpp"
#include "nestkrig/gp_core.hpp"
#include "nestkrig/nested_tree.hpp"

namespace nestkrig {

inline constexpr int kBundleVersion = 1;

/// FNV-1a over the dimensions and the raw bytes of X (row-major) and y.
inline std::uint64_t data_fingerprint(const PointSet& X, const Vector& y) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&](const void* data, std::size_t bytes) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < bytes; ++i) {
      h ^= p[i];
      h *= 0x100000001b3ULL;
    }
  };
  const std::int64_t dims[2] = {static_cast<std::int64_t>(X.rows()), static_cast<std::int64_t>(X.cols())};
  mix(dims, sizeof dims);
  mix(X.data(), sizeof(double) * static_cast<std::size_t>(X.size()));
  mix(y.data(), sizeof(double) * static_cast<std::size_t>(y.size()));
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

struct ModelBundle {
  KernelSpec kernel = KernelSpec::isotropic(KernelFamily::Matern52, 1.0, 1.0);
  bool variance_estimated = false;
  double response_offset = 0.0;
  std::vector<std::string> input_names;
  std::string response_name;
  PointSet X;
  Vector y;
  Partition partition;
  AggregationTree tree = AggregationTree::two_layer(1);

  std::uint64_t fingerprint() const { return data_fingerprint(X, y); }
  SubModelBank bank() const { return SubModelBank(kernel, X, y, partition); }
};

inline void write_bundle(std::ostream& out, const ModelBundle& b) {
  using detail::format_double;
  out << "nestkrig-bundle " << kBundleVersion << '\n';
  out << "fingerprint " << hex64(b.fingerprint()) << '\n';
  out << "kernel " << to_string(b.kernel.family()) << '\n';
  out << "variance " << format_double(b.kernel.variance()) << '\n';
  out << "variance_estimated " << (b.variance_estimated ? "true" : "false") << '\n';
  out << "lengthscales";
  for (Index j = 0; j < b.kernel.dimension(); ++j) out << ' ' << format_double(b.kernel.lengthscales()(j));
  out << '\n';
  out << "response_offset " << format_double(b.response_offset) << '\n';
  out << "inputs " << detail::join(b.input_names) << '\n';
  out << "response " << b.response_name << '\n';
  out << "points " << b.X.rows() << ' ' << b.X.cols() << ' ' << b.partition.groups << '\n';
  for (Index i = 0; i < b.X.rows(); ++i) {
    for (Index j = 0; j < b.X.cols(); ++j) out << format_double(b.X(i, j)) << ' ';
    out << format_double(b.y(i)) << ' ' << b.partition.labels[static_cast<std::size_t>(i)] + 1 << '\n';
  }
  out << "tree " << b.tree.layers().size() << '\n';
  for (const auto& layer : b.tree.layers()) {
    out << "layer " << layer.size() << '\n';
    for (const auto& kids : layer) {
      for (std::size_t c = 0; c < kids.size(); ++c) out << (c ? " " : "") << kids[c] + 1;
      out << '\n';
    }
  }
  out << "end\n";
}

namespace detail {

class BundleReader {
 public:
  explicit BundleReader(std::istream& in) : in_(in) {}

  std::vector<std::string> line() {
    std::string raw;
    if (!std::getline(in_, raw)) throw ParseError(line_ + 1, 1, "unexpected end of bundle");
    ++line_;
    std::istringstream ss(raw);
    std::vector<std::string> tokens;
    for (std::string t; ss >> t;) tokens.push_back(t);
    return tokens;
  }

  /// Line starting with `key`; returns the remaining tokens.
  std::vector<std::string> keyed(const std::string& key, std::size_t min_values = 1) {
    auto t = line();
    if (t.empty() || t[0] != key) throw ParseError(line_, 1, "expected '" + key + "'");
    if (t.size() < 1 + min_values) throw ParseError(line_, 1, "missing value after '" + key + "'");
    t.erase(t.begin());
    return t;
  }

  double real(const std::string& s) const {
    double v = 0.0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) throw ParseError(line_, 1, "bad number '" + s + "'");
    return v;
  }

  long long integer(const std::string& s) const {
    long long v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) throw ParseError(line_, 1, "bad integer '" + s + "'");
    return v;
  }

  std::size_t line_number() const { return line_; }

 private:
  std::istream& in_;
  std::size_t line_ = 0;
};

}  // namespace detail

inline ModelBundle read_bundle(std::istream& in) {
  detail::BundleReader r(in);
  const auto head = r.line();
  if (head.size() != 2 || head[0] != "nestkrig-bundle") throw ParseError(1, 1, "not a nestkrig bundle");
  if (r.integer(head[1]) != kBundleVersion)
    throw ParseError(1, 17, "unsupported bundle version " + head[1]);
  const std::string stored_fp = r.keyed("fingerprint")[0];
  const auto family = parse_kernel_family(r.keyed("kernel")[0]);
  if (!family) throw ParseError(r.line_number(), 8, "unknown kernel family");
  const double variance = r.real(r.keyed("variance")[0]);
  const bool estimated = r.keyed("variance_estimated")[0] == "true";
  const auto ls_tokens = r.keyed("lengthscales");
  Vector ls(static_cast<Index>(ls_tokens.size()));
  for (std::size_t j = 0; j < ls_tokens.size(); ++j) ls(static_cast<Index>(j)) = r.real(ls_tokens[j]);
  const double offset = r.real(r.keyed("response_offset")[0]);
  const auto inputs = r.keyed("inputs", 0);
  const auto response = r.keyed("response", 0);
  const auto dims = r.keyed("points", 3);
  const Index n = r.integer(dims[0]);
  const Index d = r.integer(dims[1]);
  const long long p = r.integer(dims[2]);
  if (n < 1 || d < 1 || p < 1 || p > n) throw ParseError(r.line_number(), 1, "bad point counts");
  if (d != ls.size()) throw ParseError(r.line_number(), 1, "dimension disagrees with the length-scales");

  ModelBundle b;
  b.kernel = KernelSpec(*family, variance, ls);
  b.variance_estimated = estimated;
  b.response_offset = offset;
  if (!inputs.empty()) b.input_names = detail::parse_list(inputs[0]);
  if (!response.empty()) b.response_name = response[0];
  b.X.resize(n, d);
  b.y.resize(n);
  b.partition.groups = static_cast<std::size_t>(p);
  b.partition.labels.resize(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    const auto t = r.line();
    if (static_cast<Index>(t.size()) != d + 2) throw ParseError(r.line_number(), 1, "expected d + 2 fields");
    for (Index j = 0; j < d; ++j) b.X(i, j) = r.real(t[static_cast<std::size_t>(j)]);
    b.y(i) = r.real(t[static_cast<std::size_t>(d)]);
    const long long label = r.integer(t[static_cast<std::size_t>(d + 1)]);
    if (label < 1 || label > p) throw ParseError(r.line_number(), 1, "group label out of range");
    b.partition.labels[static_cast<std::size_t>(i)] = static_cast<std::size_t>(label - 1);
  }
  const long long layers = r.integer(r.keyed("tree")[0]);
  if (layers < 1) throw ParseError(r.line_number(), 1, "tree needs a layer");
  std::vector<AggregationTree::ChildSets> sets;
  for (long long l = 0; l < layers; ++l) {
    const long long nodes = r.integer(r.keyed("layer")[0]);
    AggregationTree::ChildSets layer;
    for (long long k = 0; k < nodes; ++k) {
      std::vector<Index> kids;
      for (const auto& t : r.line()) kids.push_back(static_cast<Index>(r.integer(t)) - 1);
      layer.push_back(std::move(kids));
    }
    sets.push_back(std::move(layer));
  }
  if (r.line() != std::vector<std::string>{"end"}) throw ParseError(r.line_number(), 1, "expected 'end'");
  b.tree = AggregationTree(static_cast<Index>(p), std::move(sets));
  if (hex64(b.fingerprint()) != stored_fp) throw ParseError(2, 13, "fingerprint does not match the stored data");
  return b;
}

inline ModelBundle load_bundle(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::FileNotFound, "cannot open bundle '" + path + "'");
  return read_bundle(in);
}

}  // namespace nestkrig
