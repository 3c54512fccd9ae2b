#pragma once

// Prediction-quality criteria, the simulated comparison study and the
// adversarial-design consistency study.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "nestkrig/aggregation.hpp"
#include "nestkrig/data.hpp"
#include "nestkrig/predictors.hpp"
#include "nestkrig/random.hpp"

namespace nestkrig {

struct Criteria {
  double mse = 0.0;   ///< mean (m - m_ref)^2
  double mve = 0.0;   ///< mean (v - v_ref), signed
  double mnlp = 0.0;  ///< mean negative log predictive density of the truth
  double mnse = 0.0;  ///< mean (m - f)^2 / v
};

inline Criteria criteria(const Vector& m, const Vector& v, const Vector& m_ref, const Vector& v_ref, const Vector& f) {
  const Index n = m.size();
  require_dims(v.size() == n && m_ref.size() == n && v_ref.size() == n && f.size() == n,
               "criteria: all inputs must have the same length");
  if (n == 0) fail(ErrorKind::InvalidArgument, "criteria: empty input");
  constexpr double kTwoPi = 6.283185307179586;
  Criteria c;
  for (Index i = 0; i < n; ++i) {
    if (!(v(i) > 0.0))
      fail(ErrorKind::NonPositiveVariance, "criteria: variance " + std::to_string(v(i)) + " at index " +
                                               std::to_string(i));
    const double dm = m(i) - m_ref(i);
    const double e = m(i) - f(i);
    c.mse += dm * dm;
    c.mve += v(i) - v_ref(i);
    c.mnlp += 0.5 * std::log(kTwoPi * v(i)) + e * e / (2.0 * v(i));
    c.mnse += e * e / v(i);
  }
  c.mse /= double(n);
  c.mve /= double(n);
  c.mnlp /= double(n);
  c.mnse /= double(n);
  return c;
}

struct CriteriaReport {
  std::size_t replication = 0;
  std::uint64_t seed = 0;
  Method method = Method::Nested;
  Criteria values;
};

struct BenchmarkConfig {
  KernelSpec kernel = KernelSpec::isotropic(KernelFamily::Matern52, 1.0, 0.05);
  Index design_size = 30;
  std::size_t group_count = 15;
  Index grid_size = 101;
  /// Variances are floored at this multiple of the process variance before
  /// the log-density and normalised-error criteria.
  double variance_floor = 1e-12;
  unsigned threads = 1;
};

/// Predictions of every method on the test grid of one replication.
struct ReplicationDetail {
  Vector grid;
  Vector truth;
  Vector design;
  Vector responses;
  std::vector<Method> methods;  ///< Full first
  std::vector<Vector> means;
  std::vector<Vector> variances;
};

struct BenchmarkResult {
  std::vector<CriteriaReport> reports;  ///< one per method per replication
  std::vector<double> full_mnlp;        ///< full model against the truth, per replication
  ReplicationDetail first;              ///< plot data of the first replication
};

inline const std::vector<Method>& benchmark_methods() {
  static const std::vector<Method> methods{Method::Nested, Method::PoE,  Method::GPoE1, Method::GPoE2,
                                           Method::BCM,    Method::RBCM, Method::SPV};
  return methods;
}

/// Replication seeds derived from a master seed.
inline std::vector<std::uint64_t> replication_seeds(std::uint64_t master, std::size_t count) {
  std::vector<std::uint64_t> out;
  for (std::size_t r = 0; r < count; ++r) out.push_back(mix_seed(master, 1000 + r));
  return out;
}

/// One-dimensional simulated study: a GP path is drawn jointly on a regular
/// grid and on uniform design points; sub-models are consecutive pairs of the
/// sorted design and every method is scored against the full model.
inline BenchmarkResult run_benchmark_51(const std::vector<std::uint64_t>& seeds, const BenchmarkConfig& cfg = {}) {
  if (cfg.kernel.dimension() != 1) fail(ErrorKind::InvalidArgument, "benchmark kernel must be one-dimensional");
  const auto& methods = benchmark_methods();
  BenchmarkResult result;
  const double s2 = cfg.kernel.variance();
  std::vector<Method> all{Method::Full};
  all.insert(all.end(), methods.begin(), methods.end());

  for (std::size_t r = 0; r < seeds.size(); ++r) {
    const std::uint64_t seed = seeds[r];
    Rng rng = make_rng(seed, 1);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    PointSet design(cfg.design_size, 1);
    for (Index i = 0; i < cfg.design_size; ++i) design(i, 0) = unif(rng);
    PointSet grid(cfg.grid_size, 1);
    for (Index i = 0; i < cfg.grid_size; ++i) grid(i, 0) = double(i) / double(cfg.grid_size - 1);

    PointSet joint(cfg.grid_size + cfg.design_size, 1);
    joint.topRows(cfg.grid_size) = grid;
    joint.bottomRows(cfg.design_size) = design;
    const Matrix path = sample_paths(cfg.kernel, joint, 1, mix_seed(seed, 2));
    const Vector truth = path.row(0).head(cfg.grid_size).transpose();
    const Vector y = path.row(0).tail(cfg.design_size).transpose();

    const Partition part = partition_consecutive(design, cfg.group_count);
    const SubModelBank bank(cfg.kernel, design, y, part);
    const AggregationTree tree = AggregationTree::two_layer(static_cast<Index>(cfg.group_count));
    PredictOptions opts;
    opts.threads = cfg.threads;
    const std::vector<BatchPrediction> preds = predict_methods(all, bank, tree, grid, opts);
    const Vector& m_full = preds[0].mean;
    const Vector& v_full = preds[0].variance;
    const double floor = cfg.variance_floor * s2;

    const Vector vf = v_full.cwiseMax(floor);
    result.full_mnlp.push_back(criteria(m_full, vf, m_full, v_full, truth).mnlp);
    for (std::size_t k = 0; k < methods.size(); ++k) {
      const BatchPrediction& p = preds[k + 1];
      Criteria c = criteria(p.mean, p.variance.cwiseMax(floor), m_full, v_full, truth);
      // MVE is reported on the unfloored variances.
      c.mve = (p.variance - v_full).mean();
      result.reports.push_back(CriteriaReport{r, seed, methods[k], c});
    }
    if (r == 0) {
      ReplicationDetail& d = result.first;
      d.grid = grid.col(0);
      d.truth = truth;
      d.design = design.col(0);
      d.responses = y;
      d.methods = all;
      for (const auto& p : preds) {
        d.means.push_back(p.mean);
        d.variances.push_back(p.variance);
      }
    }
  }
  return result;
}

/// Design on [0, 1] where variance-weighted fusion rules fail at x0: a
/// space-filling u-sequence kept n^(-1/4) away from x0, and a w-sequence
/// accumulating at a distant point. Groups: k_n u-groups and the remaining
/// w-groups, all of size C_n except the last.
struct AdversarialDesign {
  PointSet X;
  std::vector<std::vector<Index>> groups;
  Index u_count = 0;
};

struct AdversarialGeometry {
  double x0 = 0.1;
  double cluster_center = 0.9;
  double cluster_radius = 0.05;
};

inline AdversarialDesign adversarial_design(Index n, const AdversarialGeometry& geo = {}) {
  if (n < 8) fail(ErrorKind::InvalidArgument, "adversarial design needs n >= 8");
  const double nd = double(n);
  const Index p = std::max<Index>(2, std::llround(std::pow(nd, 0.8)));
  const Index kn = static_cast<Index>(std::ceil(std::pow(nd, 0.2)));
  const Index C = (n - 1) / (p - 1);  // largest m with m (p - 1) < n
  if (kn >= p - 1 || C < 1) fail(ErrorKind::InvalidArgument, "adversarial design: n too small");
  const double excl = std::pow(nd, -0.25);

  AdversarialDesign d;
  d.u_count = kn * C;
  d.X.resize(n, 1);
  const double lo = geo.x0 + excl;
  for (Index j = 0; j < d.u_count; ++j)
    d.X(j, 0) = d.u_count == 1 ? lo : lo + (1.0 - lo) * double(j) / double(d.u_count - 1);
  for (Index j = d.u_count; j < n; ++j)
    d.X(j, 0) = geo.cluster_center - geo.cluster_radius / (1.0 + double(j - d.u_count + 1));

  for (Index g = 0; g < kn; ++g) {
    std::vector<Index> members;
    for (Index j = g * C; j < (g + 1) * C; ++j) members.push_back(j);
    d.groups.push_back(std::move(members));
  }
  for (Index g = 0; g < p - kn; ++g) {
    const Index start = d.u_count + g * C;
    const Index stop = g == p - kn - 1 ? n : start + C;
    std::vector<Index> members;
    for (Index j = start; j < stop; ++j) members.push_back(j);
    d.groups.push_back(std::move(members));
  }
  return d;
}

/// Coefficients c with prediction(x) = c^T f(X) for a method that is linear in
/// the observations at fixed design.
template <typename Derived>
Vector linear_coefficients(Method method, const SubModelBank& bank, const AggregationTree& tree,
                           const Eigen::MatrixBase<Derived>& x) {
  const KernelSpec& kernel = bank.kernel();
  if (method == Method::Full) {
    const FullModel full(kernel, bank.X(), Vector::Zero(bank.size()), bank.jitter());
    return full.factor().solve(cross_vector(kernel, bank.X(), x));
  }
  const double kxx = eval(kernel, x, x);
  LayerState s = submodel_predict(bank, x);
  const Index p = s.M.size();
  Vector w(p);
  for (Index g = 0; g < p; ++g) {
    s.M = Vector::Unit(p, g);
    w(g) = method == Method::Nested ? nested_aggregate(kxx, s, tree).mean : fuse_experts(method, kxx, s).mean;
  }
  Vector lambda = Vector::Zero(bank.size());
  for (std::size_t g = 0; g < bank.group_count(); ++g) {
    const Vector a = bank.factor(g).solve(cross_vector(kernel, bank.group_points(g), x));
    const auto& idx = bank.group(g);
    for (std::size_t r = 0; r < idx.size(); ++r) lambda(idx[r]) += w(static_cast<Index>(g)) * a(static_cast<Index>(r));
  }
  return lambda;
}

struct ConsistencyConfig {
  KernelSpec kernel = KernelSpec::isotropic(KernelFamily::Matern52, 1.0, 0.8);
  AdversarialGeometry geometry;
  Index replicates = 200;
  std::uint64_t seed = 0;
};

struct ConsistencyPoint {
  Index n = 0;
  double mse = 0.0;        ///< Monte Carlo average over sampled paths
  double exact_mse = 0.0;  ///< closed form for the same linear predictor
};

/// Squared prediction error at x0 on the adversarial design, for each n.
inline std::vector<ConsistencyPoint> run_consistency_demo(const std::vector<Index>& ns, Method method,
                                                          const ConsistencyConfig& cfg = {}) {
  if (cfg.kernel.dimension() != 1) fail(ErrorKind::InvalidArgument, "consistency kernel must be one-dimensional");
  std::vector<ConsistencyPoint> out;
  for (Index n : ns) {
    const AdversarialDesign design = adversarial_design(n, cfg.geometry);
    const SubModelBank bank(cfg.kernel, design.X, Vector::Zero(n), design.groups);
    const AggregationTree tree = AggregationTree::two_layer(static_cast<Index>(design.groups.size()));
    Vector x0(1);
    x0(0) = cfg.geometry.x0;
    const Vector lambda = linear_coefficients(method, bank, tree, x0);

    PointSet joint(n + 1, 1);
    joint.topRows(n) = design.X;
    joint(n, 0) = cfg.geometry.x0;
    // Paths are drawn through this root, so the exact error below is the one
    // the Monte Carlo average estimates.
    const Matrix root = gaussian_root(gram_matrix(cfg.kernel, joint));
    Vector c(n + 1);
    c.head(n) = -lambda;
    c(n) = 1.0;
    ConsistencyPoint pt;
    pt.n = n;
    pt.exact_mse = (root.transpose() * c).squaredNorm();

    Rng rng = make_rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(n)), 3);
    const Matrix errors = c.transpose() * root * standard_normal(rng, n + 1, cfg.replicates);
    double total = 0.0;
    for (Index r = 0; r < cfg.replicates; ++r) total += errors(0, r) * errors(0, r);
    pt.mse = cfg.replicates > 0 ? total / double(cfg.replicates) : 0.0;
    out.push_back(pt);
  }
  return out;
}

}  // namespace nestkrig
