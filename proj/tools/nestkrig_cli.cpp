// nestkrig: command-line front end.
//
//   nestkrig simulate    --points N | --grid N  [--count K] [--seed S] [-o out.csv]
//   nestkrig fit         --train data.csv -o model.nkb [--force]
//   nestkrig predict     --model model.nkb --query q.csv [--method m] [--with-variance] [-o out.csv]
//   nestkrig loo-estimate --train data.csv [--q Q] [--seed S] [-o out.csv]
//   nestkrig benchmark   [--replications R] [--seed S] --output-dir dir
//   nestkrig consistency [--method m] [--ns 50,100,200,400] [--replicates R] [-o out.csv]
//
// Every command accepts --config FILE and --threads N. Exit status: 0 success,
// 1 usage or configuration error, 2 input/output error, 3 numerical failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "nestkrig/nestkrig.hpp"

namespace fs = std::filesystem;
using namespace nestkrig;
using detail::format_double;

namespace {

struct Common {
  std::string config_path;
  unsigned threads = 0;
  bool force = false;
};

RunConfig load_run_config(const Common& c) { return c.config_path.empty() ? RunConfig{} : load_config(c.config_path); }

unsigned thread_count(const Common& c) {
  if (c.threads > 0) return c.threads;
  if (std::getenv("NESTKRIG_THREADS")) return default_thread_count();
  return std::max(1u, std::thread::hardware_concurrency());
}

using Echo = std::vector<std::pair<std::string, std::string>>;

void write_echo(std::ostream& out, const std::string& command, const RunConfig& cfg, const Echo& extra) {
  out << "# nestkrig " << command << '\n';
  for (const auto& [k, v] : config_entries(cfg)) out << "# " << k << " = " << v << '\n';
  for (const auto& [k, v] : extra) out << "# " << k << " = " << v << '\n';
}

void check_writable(const std::string& path, bool force) {
  if (!force && fs::exists(path))
    fail(ErrorKind::InvalidArgument, "'" + path + "' exists; pass --force to overwrite");
}

/// Opens `path` for writing, or returns nullptr to mean standard output.
std::unique_ptr<std::ofstream> open_output(const std::string& path, bool force) {
  if (path.empty() || path == "-") return nullptr;
  check_writable(path, force);
  auto out = std::make_unique<std::ofstream>(path, std::ios::binary);
  if (!*out) fail(ErrorKind::IoError, "cannot write '" + path + "'");
  return out;
}

std::ostream& sink(const std::unique_ptr<std::ofstream>& f) { return f ? static_cast<std::ostream&>(*f) : std::cout; }

std::string join_doubles(const Vector& v, char sep = ',') {
  std::string s;
  for (Index i = 0; i < v.size(); ++i) s += (i ? std::string(1, sep) : std::string()) + format_double(v(i));
  return s;
}

Dataset load_training(const RunConfig& cfg, const std::string& path) {
  CsvSchema schema;
  schema.inputs = cfg.inputs;
  schema.response = cfg.response;
  schema.id_column = cfg.id_column;
  schema.center_response = cfg.center;
  return load_csv(path, schema);
}

struct Structure {
  Partition partition;
  AggregationTree tree = AggregationTree::two_layer(1);
};

/// Partition and tree from the configuration. With partition.groups = 0 the
/// tree planner picks both the group count and the tree.
Structure build_structure(const RunConfig& cfg, const PointSet& X) {
  const Index n = X.rows();
  std::size_t p = cfg.groups;
  Structure s;
  if (p == 0) {
    const TreePlan plan = plan_tree(n, cfg.tree_mode, cfg.tree_height);
    p = plan.group_count;
    s.tree = plan.tree;
  } else if (cfg.tree_mode == PlanMode::TwoLayerSqrt || cfg.tree_height <= 2) {
    if (cfg.tree_height < 2) fail(ErrorKind::InvalidHeight, "tree height must be at least 2");
    s.tree = AggregationTree::two_layer(static_cast<Index>(p));
  } else {
    const double fan = std::pow(double(p), 1.0 / double(cfg.tree_height - 1));
    const Index c = std::max<Index>(2, std::llround(fan));
    s.tree = AggregationTree::regular(static_cast<Index>(p), std::vector<Index>(cfg.tree_height - 2, c));
  }
  switch (cfg.partition_mode) {
    case PartitionMode::KMeans: s.partition = partition_kmeans(X, p, cfg.partition_seed); break;
    case PartitionMode::Random: s.partition = partition_random(static_cast<std::size_t>(n), p, cfg.partition_seed); break;
    case PartitionMode::Consecutive: s.partition = partition_consecutive(X, p); break;
  }
  return s;
}

SgdConfig sgd_config(const RunConfig& cfg, const KernelSpec& kernel, unsigned threads) {
  SgdConfig s;
  s.theta0 = kernel.lengthscales();
  s.a = cfg.sgd_a;
  s.A = cfg.sgd_A;
  s.alpha = cfg.sgd_alpha;
  s.c = cfg.sgd_c;
  s.gamma = cfg.sgd_gamma;
  s.q = cfg.sgd_q;
  s.n_iter = cfg.sgd_iterations;
  s.seed = cfg.sgd_seed;
  s.two_phase = cfg.sgd_two_phase;
  s.gain_calibration = cfg.sgd_gain_calibration;
  s.max_step = cfg.sgd_max_step;
  s.threads = threads;
  return s;
}

/// Leave-one-out indices for variance estimation: every point up to 2000,
/// otherwise a seeded subset of 2000.
std::vector<Index> variance_indices(Index n, std::uint64_t seed) {
  std::vector<Index> all(static_cast<std::size_t>(n));
  std::iota(all.begin(), all.end(), 0);
  constexpr Index kMax = 2000;
  if (n <= kMax) return all;
  Rng rng = make_rng(seed, 41);
  std::shuffle(all.begin(), all.end(), rng);
  all.resize(kMax);
  std::sort(all.begin(), all.end());
  return all;
}

/// Fits length-scales (optional) and the process variance (optional).
KernelSpec estimate(const RunConfig& cfg, KernelSpec kernel, const Dataset& data, const Structure& st,
                    unsigned threads, bool& variance_estimated) {
  const auto groups = st.partition.members();
  if (cfg.estimate_theta) {
    const SgdResult r = sgd_fit(kernel, data.X, data.y, groups, st.tree, sgd_config(cfg, kernel, threads),
                                [](const SgdIteration& it) {
                                  std::cerr << "iter " << it.iteration << " criterion "
                                            << (it.rejected ? std::string("rejected") : format_double(it.criterion))
                                            << " theta " << join_doubles(it.theta) << '\n';
                                });
    kernel = kernel.with_lengthscales(r.theta);
  }
  variance_estimated = false;
  if (cfg.estimate_variance) {
    const SubModelBank unit(kernel.with_variance(1.0), data.X, data.y, groups);
    const LooResult loo = loo_predict(unit, st.tree, variance_indices(data.size(), cfg.sgd_seed), threads);
    kernel = kernel.with_variance(estimate_sigma2(loo.records, data.y));
    variance_estimated = true;
  }
  return kernel;
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
  Index points = 0;
  Index grid = 0;
  Index count = 1;
  std::uint64_t seed = 1;
  std::string output;
};

int cmd_simulate(const Common& common, const SimulateArgs& a) {
  const RunConfig cfg = load_run_config(common);
  const Index d = static_cast<Index>(cfg.kernel_lengthscales.size());
  const KernelSpec kernel = cfg.kernel(d);
  if ((a.points > 0) == (a.grid > 0)) fail(ErrorKind::InvalidArgument, "give exactly one of --points and --grid");
  if (a.count < 1) fail(ErrorKind::InvalidArgument, "--count must be positive");
  PointSet X;
  if (a.grid > 0) {
    if (d != 1) fail(ErrorKind::InvalidArgument, "--grid needs a one-dimensional kernel");
    if (a.grid < 2) fail(ErrorKind::InvalidArgument, "--grid needs at least 2 points");
    X.resize(a.grid, 1);
    for (Index i = 0; i < a.grid; ++i) X(i, 0) = double(i) / double(a.grid - 1);
  } else {
    Rng rng = make_rng(a.seed, 5);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    X.resize(a.points, d);
    for (Index i = 0; i < a.points; ++i)
      for (Index j = 0; j < d; ++j) X(i, j) = unif(rng);
  }
  const Matrix paths = sample_paths(kernel, X, a.count, mix_seed(a.seed, 6));

  const auto file = open_output(a.output, common.force);
  std::ostream& out = sink(file);
  write_echo(out, "simulate", cfg,
             {{"points", std::to_string(a.points)}, {"grid", std::to_string(a.grid)},
              {"count", std::to_string(a.count)}, {"seed", std::to_string(a.seed)}});
  for (Index j = 0; j < d; ++j) out << (j ? "," : "") << (d == 1 ? std::string("x") : "x" + std::to_string(j + 1));
  for (Index k = 0; k < a.count; ++k) out << ',' << (a.count == 1 ? std::string("y") : "y" + std::to_string(k + 1));
  out << '\n';
  for (Index i = 0; i < X.rows(); ++i) {
    for (Index j = 0; j < d; ++j) out << (j ? "," : "") << format_double(X(i, j));
    for (Index k = 0; k < a.count; ++k) out << ',' << format_double(paths(k, i));
    out << '\n';
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct FitArgs {
  std::string train;
  std::string output;
};

int cmd_fit(const Common& common, const FitArgs& a) {
  const RunConfig cfg = load_run_config(common);
  check_writable(a.output, common.force);
  const Dataset data = load_training(cfg, a.train);
  const unsigned threads = thread_count(common);
  const Structure st = build_structure(cfg, data.X);
  ModelBundle b;
  b.kernel = estimate(cfg, cfg.kernel(data.dimension()), data, st, threads, b.variance_estimated);
  b.response_offset = data.response_offset;
  b.input_names = data.input_names;
  b.response_name = data.response_name;
  b.X = data.X;
  b.y = data.y;
  b.partition = st.partition;
  b.tree = st.tree;
  b.bank();  // fails now rather than at prediction time if a group cannot be factored

  const auto file = open_output(a.output, true);
  if (!file) fail(ErrorKind::InvalidArgument, "fit needs --output");
  write_bundle(*file, b);
  write_echo(*file, "fit", cfg, {});
  std::cerr << "fitted " << data.size() << " points in " << b.partition.groups << " groups; theta "
            << join_doubles(b.kernel.lengthscales()) << ", variance " << format_double(b.kernel.variance()) << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

struct PredictArgs {
  std::string model;
  std::string query;
  std::string method = "nested";
  bool with_variance = false;
  std::string check_data;
  std::string output;
  Index full_cap = -1;
};

int cmd_predict(const Common& common, const PredictArgs& a) {
  const RunConfig cfg = load_run_config(common);
  const ModelBundle b = load_bundle(a.model);
  const Method method = *parse_method(a.method);
  if (!a.check_data.empty()) {
    const Dataset d = load_training(cfg, a.check_data);
    if (data_fingerprint(d.X, d.y) != b.fingerprint())
      std::cerr << "warning: '" << a.check_data << "' does not match the data the model was fitted on\n";
  }
  const PointSet Xq = load_points(a.query, b.input_names);
  require_dims(Xq.cols() == b.X.cols(), "query has " + std::to_string(Xq.cols()) + " input columns, model expects " +
                                            std::to_string(b.X.cols()));
  PredictOptions opts;
  opts.threads = thread_count(common);
  opts.full_cap = a.full_cap >= 0 ? a.full_cap : cfg.full_cap;
  const BatchPrediction p = predict(method, b.bank(), b.tree, Xq, opts);

  const auto file = open_output(a.output, common.force);
  std::ostream& out = sink(file);
  write_echo(out, "predict", cfg,
             {{"model.fingerprint", hex64(b.fingerprint())}, {"method", std::string(to_string(method))}});
  out << (a.with_variance ? "mean,variance,method\n" : "mean,method\n");
  for (Index i = 0; i < Xq.rows(); ++i) {
    out << format_double(p.mean(i) + b.response_offset);
    if (a.with_variance) out << ',' << format_double(p.variance(i));
    out << ',' << to_string(method) << '\n';
  }
  if (p.degenerate_count > 0)
    std::cerr << "note: " << p.degenerate_count << " queries used the pseudo-inverse or an interpolating expert\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct LooArgs {
  std::string train;
  Index q = 0;
  std::uint64_t seed = 1;
  std::string output;
};

int cmd_loo(const Common& common, const LooArgs& a) {
  const RunConfig cfg = load_run_config(common);
  const Dataset data = load_training(cfg, a.train);
  const unsigned threads = thread_count(common);
  const Structure st = build_structure(cfg, data.X);
  bool variance_estimated = false;
  const KernelSpec kernel = estimate(cfg, cfg.kernel(data.dimension()), data, st, threads, variance_estimated);

  std::vector<Index> idx(static_cast<std::size_t>(data.size()));
  std::iota(idx.begin(), idx.end(), 0);
  if (a.q > 0 && a.q < data.size()) {
    Rng rng = make_rng(a.seed, 43);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(static_cast<std::size_t>(a.q));
    std::sort(idx.begin(), idx.end());
  }
  const SubModelBank unit(kernel.with_variance(1.0), data.X, data.y, st.partition);
  const LooResult loo = loo_predict(unit, st.tree, idx, threads);
  if (loo.records.empty()) fail(ErrorKind::InvalidArgument, "no leave-one-out prediction possible (singleton groups)");
  const double crit = loo_criterion(loo.records, data.y);
  const double s2 = estimate_sigma2(loo.records, data.y);

  const auto file = open_output(a.output, common.force);
  std::ostream& out = sink(file);
  write_echo(out, "loo-estimate", cfg,
             {{"q", std::to_string(a.q)},
              {"seed", std::to_string(a.seed)},
              {"theta", join_doubles(kernel.lengthscales())},
              {"criterion", format_double(crit)},
              {"sigma2", format_double(s2)},
              {"skipped", std::to_string(loo.skipped.size())}});
  out << "index,response,loo_mean,loo_variance\n";
  for (const LooRecord& r : loo.records)
    out << r.index + 1 << ',' << format_double(data.y(r.index) + data.response_offset) << ','
        << format_double(r.mean + data.response_offset) << ',' << format_double(s2 * r.variance) << '\n';
  std::cerr << "criterion " << format_double(crit) << " sigma2 " << format_double(s2) << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

struct BenchmarkArgs {
  std::size_t replications = 50;
  std::uint64_t seed = 7;
  std::string family = "matern52";
  double theta = 0.05;
  Index design = 30;
  std::size_t groups = 15;
  Index grid = 101;
  std::string output_dir;
};

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

int cmd_benchmark(const Common& common, const BenchmarkArgs& a) {
  const RunConfig cfg = load_run_config(common);
  if (a.output_dir.empty()) fail(ErrorKind::InvalidArgument, "benchmark needs --output-dir");
  const fs::path dir(a.output_dir);
  const fs::path reports_path = dir / "reports.csv", summary_path = dir / "summary.json", plot_path = dir / "plot.csv";
  for (const auto& p : {reports_path, summary_path, plot_path}) check_writable(p.string(), common.force);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorKind::IoError, "cannot create '" + dir.string() + "': " + ec.message());

  BenchmarkConfig bc;
  bc.kernel = KernelSpec::isotropic(*parse_kernel_family(a.family), 1.0, a.theta);
  bc.design_size = a.design;
  bc.group_count = a.groups;
  bc.grid_size = a.grid;
  bc.threads = thread_count(common);
  const auto seeds = replication_seeds(a.seed, a.replications);
  const BenchmarkResult res = run_benchmark_51(seeds, bc);

  const Echo echo{{"replications", std::to_string(a.replications)}, {"seed", std::to_string(a.seed)},
                  {"family", a.family},
                  {"theta", format_double(a.theta)},
                  {"design", std::to_string(a.design)},
                  {"groups", std::to_string(a.groups)},
                  {"grid", std::to_string(a.grid)}};
  {
    std::ofstream out(reports_path, std::ios::binary);
    if (!out) fail(ErrorKind::IoError, "cannot write " + reports_path.string());
    write_echo(out, "benchmark", cfg, echo);
    out << "replication,seed,method,mse,mve,mnlp,mnse\n";
    for (const auto& r : res.reports)
      out << r.replication + 1 << ',' << r.seed << ',' << to_string(r.method) << ',' << format_double(r.values.mse)
          << ',' << format_double(r.values.mve) << ',' << format_double(r.values.mnlp) << ','
          << format_double(r.values.mnse) << '\n';
  }
  {
    nlohmann::ordered_json j;
    for (const auto& [k, v] : echo) j["settings"][k] = v;
    j["replications"] = a.replications;
    for (Method m : benchmark_methods()) {
      std::vector<double> mse, mve, mnlp, mnse;
      for (const auto& r : res.reports)
        if (r.method == m) {
          mse.push_back(r.values.mse);
          mve.push_back(r.values.mve);
          mnlp.push_back(r.values.mnlp);
          mnse.push_back(r.values.mnse);
        }
      auto& node = j["median"][std::string(to_string(m))];
      node["mse"] = median(mse);
      node["mve"] = median(mve);
      node["mnlp"] = median(mnlp);
      node["mnse"] = median(mnse);
    }
    j["median"]["full"]["mnlp"] = median(res.full_mnlp);
    std::ofstream out(summary_path, std::ios::binary);
    if (!out) fail(ErrorKind::IoError, "cannot write " + summary_path.string());
    out << j.dump(2) << '\n';
  }
  {
    std::ofstream out(plot_path, std::ios::binary);
    if (!out) fail(ErrorKind::IoError, "cannot write " + plot_path.string());
    write_echo(out, "benchmark", cfg, echo);
    const ReplicationDetail& d = res.first;
    out << "# design:";
    for (Index i = 0; i < d.design.size(); ++i) out << ' ' << format_double(d.design(i)) << ':' << format_double(d.responses(i));
    out << "\nx,truth";
    for (Method m : d.methods) out << ',' << to_string(m) << "_mean," << to_string(m) << "_variance";
    out << '\n';
    for (Index i = 0; i < d.grid.size(); ++i) {
      out << format_double(d.grid(i)) << ',' << format_double(d.truth(i));
      for (std::size_t k = 0; k < d.methods.size(); ++k)
        out << ',' << format_double(d.means[k](i)) << ',' << format_double(d.variances[k](i));
      out << '\n';
    }
  }
  std::cerr << "wrote " << res.reports.size() << " reports to " << dir.string() << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

struct ConsistencyArgs {
  std::string method = "nested";
  std::vector<Index> ns{50, 100, 200, 400};
  Index replicates = 200;
  std::uint64_t seed = 1;
  std::string output;
};

int cmd_consistency(const Common& common, const ConsistencyArgs& a) {
  const RunConfig cfg = load_run_config(common);
  const Method method = *parse_method(a.method);
  ConsistencyConfig cc;
  cc.replicates = a.replicates;
  cc.seed = a.seed;
  const auto pts = run_consistency_demo(a.ns, method, cc);

  const auto file = open_output(a.output, common.force);
  std::ostream& out = sink(file);
  std::string ns;
  for (Index n : a.ns) ns += (ns.empty() ? "" : ",") + std::to_string(n);
  write_echo(out, "consistency", cfg,
             {{"method", std::string(to_string(method))},
              {"ns", ns},
              {"replicates", std::to_string(a.replicates)},
              {"seed", std::to_string(a.seed)}});
  out << "n,mse,exact_mse\n";
  for (const auto& p : pts) out << p.n << ',' << format_double(p.mse) << ',' << format_double(p.exact_mse) << '\n';
  if (pts.size() >= 2 && pts.front().mse > 0)
    out << "# last/first = " << format_double(pts.back().mse / pts.front().mse) << '\n';
  return 0;
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::FileNotFound:
    case ErrorKind::EmptyFile:
    case ErrorKind::ParseError:
    case ErrorKind::IoError:
      return 2;
    case ErrorKind::NotFactorizable:
    case ErrorKind::NonPositiveVariance:
    case ErrorKind::NonFiniteCriterion:
      return 3;
    default:
      return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nested Kriging: aggregation of Gaussian-process sub-models"};
  app.require_subcommand(1);
  app.fallthrough();
  Common common;
  app.add_option("--config", common.config_path, "Run configuration file");
  app.add_option("--threads", common.threads, "Worker threads (default: NESTKRIG_THREADS or all cores)");
  app.add_flag("--force", common.force, "Overwrite existing output files");

  std::vector<std::string> method_names;
  for (Method m : {Method::Nested, Method::Full, Method::PoE, Method::GPoE1, Method::GPoE2, Method::BCM, Method::RBCM,
                   Method::SPV})
    method_names.emplace_back(to_string(m));

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Sample Gaussian-process paths");
  simulate->add_option("--points", sim.points, "Uniform random points in the unit cube");
  simulate->add_option("--grid", sim.grid, "Regular grid on [0, 1]");
  simulate->add_option("--count", sim.count, "Number of paths");
  simulate->add_option("--seed", sim.seed, "Random seed");
  simulate->add_option("-o,--output", sim.output, "Output CSV (default: stdout)");

  FitArgs fit;
  auto* fitcmd = app.add_subcommand("fit", "Build a model bundle from training data");
  fitcmd->add_option("--train", fit.train, "Training CSV")->required();
  fitcmd->add_option("-o,--output", fit.output, "Bundle path")->required();

  PredictArgs pred;
  auto* predcmd = app.add_subcommand("predict", "Predict at query points from a bundle");
  predcmd->add_option("--model", pred.model, "Model bundle")->required();
  predcmd->add_option("--query", pred.query, "Query CSV")->required();
  predcmd->add_option("--method", pred.method, "Prediction method")->check(CLI::IsMember(method_names));
  predcmd->add_flag("--with-variance", pred.with_variance, "Also write prediction variances");
  predcmd->add_option("--check-data", pred.check_data, "Warn if this CSV differs from the training data");
  predcmd->add_option("--full-cap", pred.full_cap, "Largest n for the full model (default from config)");
  predcmd->add_option("-o,--output", pred.output, "Output CSV (default: stdout)");

  LooArgs loo;
  auto* loocmd = app.add_subcommand("loo-estimate", "Leave-one-out errors and variance estimate");
  loocmd->add_option("--train", loo.train, "Training CSV")->required();
  loocmd->add_option("--q", loo.q, "Random subset size (default: all points)");
  loocmd->add_option("--seed", loo.seed, "Subset seed");
  loocmd->add_option("-o,--output", loo.output, "Output CSV (default: stdout)");

  BenchmarkArgs bench;
  auto* benchcmd = app.add_subcommand("benchmark", "Simulated comparison of aggregation methods");
  benchcmd->add_option("--replications", bench.replications, "Number of replications");
  benchcmd->add_option("--seed", bench.seed, "Master seed");
  benchcmd->add_option("--family", bench.family, "Covariance family")
      ->check(CLI::IsMember({"squared_exponential", "exponential", "matern32", "matern52"}));
  benchcmd->add_option("--theta", bench.theta, "Length-scale");
  benchcmd->add_option("--design", bench.design, "Design points per replication");
  benchcmd->add_option("--groups", bench.groups, "Sub-models (consecutive groups)");
  benchcmd->add_option("--grid", bench.grid, "Test grid size");
  benchcmd->add_option("--output-dir", bench.output_dir, "Directory for reports.csv, summary.json, plot.csv")
      ->required();

  ConsistencyArgs cons;
  auto* conscmd = app.add_subcommand("consistency", "Error at x0 on the adversarial design");
  conscmd->alias("consistency-demo");
  conscmd->add_option("--method", cons.method, "Prediction method")->check(CLI::IsMember(method_names));
  conscmd->add_option("--ns", cons.ns, "Design sizes")->delimiter(',');
  conscmd->add_option("--replicates", cons.replicates, "Sampled paths per size");
  conscmd->add_option("--seed", cons.seed, "Random seed");
  conscmd->add_option("-o,--output", cons.output, "Output CSV (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*simulate) return cmd_simulate(common, sim);
    if (*fitcmd) return cmd_fit(common, fit);
    if (*predcmd) return cmd_predict(common, pred);
    if (*loocmd) return cmd_loo(common, loo);
    if (*benchcmd) return cmd_benchmark(common, bench);
    if (*conscmd) return cmd_consistency(common, cons);
  } catch (const Error& e) {
    std::cerr << "nestkrig: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "nestkrig: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
