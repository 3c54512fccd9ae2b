#pragma once

// Run configuration: a plain-text file of [section] headers and key = value
// lines. Every field has a default and unknown keys are rejected.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "nestkrig/baselines.hpp"
#include "nestkrig/data.hpp"
#include "nestkrig/errors.hpp"
#include "nestkrig/kernels.hpp"
#include "nestkrig/nested_tree.hpp"

namespace nestkrig {

enum class PartitionMode { KMeans, Random, Consecutive };

inline std::string_view to_string(PartitionMode m) {
  switch (m) {
    case PartitionMode::KMeans: return "kmeans";
    case PartitionMode::Random: return "random";
    case PartitionMode::Consecutive: return "consecutive";
  }
  return "unknown";
}

inline std::optional<PartitionMode> parse_partition_mode(std::string_view s) {
  if (s == "kmeans") return PartitionMode::KMeans;
  if (s == "random") return PartitionMode::Random;
  if (s == "consecutive") return PartitionMode::Consecutive;
  return std::nullopt;
}

struct RunConfig {
  // [kernel]
  KernelFamily kernel_family = KernelFamily::Matern52;
  double kernel_variance = 1.0;
  std::vector<double> kernel_lengthscales{0.1};  ///< one value is broadcast to every dimension
  // [data]
  std::string response;  ///< empty: last column
  std::vector<std::string> inputs;
  std::string id_column;
  bool center = false;
  // [partition]
  PartitionMode partition_mode = PartitionMode::KMeans;
  std::size_t groups = 0;  ///< 0: chosen by the tree planner
  std::uint64_t partition_seed = 1;
  // [tree]
  PlanMode tree_mode = PlanMode::TwoLayerSqrt;
  int tree_height = 2;
  // [estimation]
  bool estimate_theta = false;
  bool estimate_variance = false;
  double sgd_a = 0.1;
  double sgd_A = -1.0;
  double sgd_alpha = 0.602;
  double sgd_c = 0.1;
  double sgd_gamma = 0.101;
  Index sgd_q = 100;
  int sgd_iterations = 300;
  std::uint64_t sgd_seed = 1;
  bool sgd_two_phase = true;
  int sgd_gain_calibration = 20;
  double sgd_max_step = 0.2;
  // [predict]
  Method method = Method::Nested;
  Index full_cap = 5000;

  /// Kernel for a design of dimension d.
  KernelSpec kernel(Index d) const {
    Vector ls(d);
    if (kernel_lengthscales.size() == 1) {
      ls.setConstant(kernel_lengthscales.front());
    } else {
      if (static_cast<Index>(kernel_lengthscales.size()) != d)
        fail(ErrorKind::DimensionMismatch, "config gives " + std::to_string(kernel_lengthscales.size()) +
                                               " length-scales for " + std::to_string(d) + " input columns");
      for (Index j = 0; j < d; ++j) ls(j) = kernel_lengthscales[static_cast<std::size_t>(j)];
    }
    return KernelSpec(kernel_family, kernel_variance, ls);
  }
};

namespace detail {

[[noreturn]] inline void config_error(std::size_t line, const std::string& msg) {
  fail(ErrorKind::ConfigError, (line ? "line " + std::to_string(line) + ": " : std::string()) + msg);
}

template <typename T>
T parse_number(std::string_view text, std::size_t line, const std::string& key) {
  T value{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size())
    config_error(line, "bad value '" + std::string(text) + "' for " + key);
  return value;
}

inline bool parse_bool(std::string_view text, std::size_t line, const std::string& key) {
  if (text == "true" || text == "yes" || text == "on" || text == "1") return true;
  if (text == "false" || text == "no" || text == "off" || text == "0") return false;
  config_error(line, "bad boolean '" + std::string(text) + "' for " + key);
}

inline std::vector<std::string> parse_list(std::string_view text) {
  std::vector<std::string> out;
  for (auto item : split_commas(text))
    if (!item.empty()) out.emplace_back(item);
  return out;
}

inline std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + items[i];
  return out;
}

inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace detail

/// Applies one key (qualified as section.key) to the configuration.
inline void set_config_value(RunConfig& cfg, const std::string& key, std::string_view value, std::size_t line = 0) {
  using namespace detail;
  if (key == "kernel.family") {
    auto f = parse_kernel_family(value);
    if (!f) config_error(line, "unknown kernel family '" + std::string(value) + "'");
    cfg.kernel_family = *f;
  } else if (key == "kernel.variance") {
    cfg.kernel_variance = parse_number<double>(value, line, key);
  } else if (key == "kernel.lengthscales") {
    cfg.kernel_lengthscales.clear();
    for (const auto& item : parse_list(value)) cfg.kernel_lengthscales.push_back(parse_number<double>(item, line, key));
    if (cfg.kernel_lengthscales.empty()) config_error(line, "kernel.lengthscales is empty");
  } else if (key == "data.response") {
    cfg.response = std::string(value);
  } else if (key == "data.inputs") {
    cfg.inputs = parse_list(value);
  } else if (key == "data.id") {
    cfg.id_column = std::string(value);
  } else if (key == "data.center") {
    cfg.center = parse_bool(value, line, key);
  } else if (key == "partition.mode") {
    auto m = parse_partition_mode(value);
    if (!m) config_error(line, "unknown partition mode '" + std::string(value) + "'");
    cfg.partition_mode = *m;
  } else if (key == "partition.groups") {
    cfg.groups = parse_number<std::size_t>(value, line, key);
  } else if (key == "partition.seed") {
    cfg.partition_seed = parse_number<std::uint64_t>(value, line, key);
  } else if (key == "tree.mode") {
    auto m = parse_plan_mode(value);
    if (!m) config_error(line, "unknown tree mode '" + std::string(value) + "'");
    cfg.tree_mode = *m;
  } else if (key == "tree.height") {
    cfg.tree_height = parse_number<int>(value, line, key);
  } else if (key == "estimation.theta") {
    cfg.estimate_theta = parse_bool(value, line, key);
  } else if (key == "estimation.variance") {
    cfg.estimate_variance = parse_bool(value, line, key);
  } else if (key == "estimation.a") {
    cfg.sgd_a = parse_number<double>(value, line, key);
  } else if (key == "estimation.A") {
    cfg.sgd_A = parse_number<double>(value, line, key);
  } else if (key == "estimation.alpha") {
    cfg.sgd_alpha = parse_number<double>(value, line, key);
  } else if (key == "estimation.c") {
    cfg.sgd_c = parse_number<double>(value, line, key);
  } else if (key == "estimation.gamma") {
    cfg.sgd_gamma = parse_number<double>(value, line, key);
  } else if (key == "estimation.q") {
    cfg.sgd_q = parse_number<Index>(value, line, key);
  } else if (key == "estimation.iterations") {
    cfg.sgd_iterations = parse_number<int>(value, line, key);
  } else if (key == "estimation.seed") {
    cfg.sgd_seed = parse_number<std::uint64_t>(value, line, key);
  } else if (key == "estimation.two_phase") {
    cfg.sgd_two_phase = parse_bool(value, line, key);
  } else if (key == "estimation.gain_calibration") {
    cfg.sgd_gain_calibration = parse_number<int>(value, line, key);
  } else if (key == "estimation.max_step") {
    cfg.sgd_max_step = parse_number<double>(value, line, key);
  } else if (key == "predict.method") {
    auto m = parse_method(value);
    if (!m) config_error(line, "unknown method '" + std::string(value) + "'");
    cfg.method = *m;
  } else if (key == "predict.full_cap") {
    cfg.full_cap = parse_number<Index>(value, line, key);
  } else {
    config_error(line, "unknown key '" + key + "'");
  }
}

inline RunConfig parse_config(std::istream& in) {
  RunConfig cfg;
  std::string raw;
  std::string section;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string_view text = detail::trim(raw);
    if (const auto hash = text.find('#'); hash != std::string_view::npos) text = detail::trim(text.substr(0, hash));
    if (text.empty()) continue;
    if (text.front() == '[') {
      if (text.back() != ']') detail::config_error(line, "unterminated section header");
      section = std::string(detail::trim(text.substr(1, text.size() - 2)));
      if (section.empty()) detail::config_error(line, "empty section name");
      continue;
    }
    const auto eq = text.find('=');
    if (eq == std::string_view::npos) detail::config_error(line, "expected key = value");
    const std::string key(detail::trim(text.substr(0, eq)));
    const std::string_view value = detail::trim(text.substr(eq + 1));
    if (key.empty()) detail::config_error(line, "missing key");
    if (section.empty()) detail::config_error(line, "key '" + key + "' outside any [section]");
    set_config_value(cfg, section + "." + key, value, line);
  }
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::FileNotFound, "cannot open config '" + path + "'");
  return parse_config(in);
}

/// Every setting as section.key = value, in a fixed order.
inline std::vector<std::pair<std::string, std::string>> config_entries(const RunConfig& c) {
  using detail::format_double;
  std::vector<std::string> ls;
  for (double v : c.kernel_lengthscales) ls.push_back(format_double(v));
  auto b = [](bool v) { return std::string(v ? "true" : "false"); };
  return {
      {"kernel.family", std::string(to_string(c.kernel_family))},
      {"kernel.variance", format_double(c.kernel_variance)},
      {"kernel.lengthscales", detail::join(ls)},
      {"data.response", c.response},
      {"data.inputs", detail::join(c.inputs)},
      {"data.id", c.id_column},
      {"data.center", b(c.center)},
      {"partition.mode", std::string(to_string(c.partition_mode))},
      {"partition.groups", std::to_string(c.groups)},
      {"partition.seed", std::to_string(c.partition_seed)},
      {"tree.mode", std::string(to_string(c.tree_mode))},
      {"tree.height", std::to_string(c.tree_height)},
      {"estimation.theta", b(c.estimate_theta)},
      {"estimation.variance", b(c.estimate_variance)},
      {"estimation.a", format_double(c.sgd_a)},
      {"estimation.A", format_double(c.sgd_A)},
      {"estimation.alpha", format_double(c.sgd_alpha)},
      {"estimation.c", format_double(c.sgd_c)},
      {"estimation.gamma", format_double(c.sgd_gamma)},
      {"estimation.q", std::to_string(c.sgd_q)},
      {"estimation.iterations", std::to_string(c.sgd_iterations)},
      {"estimation.seed", std::to_string(c.sgd_seed)},
      {"estimation.two_phase", b(c.sgd_two_phase)},
      {"estimation.gain_calibration", std::to_string(c.sgd_gain_calibration)},
      {"estimation.max_step", format_double(c.sgd_max_step)},
      {"predict.method", std::string(to_string(c.method))},
      {"predict.full_cap", std::to_string(c.full_cap)},
  };
}

}  // namespace nestkrig
