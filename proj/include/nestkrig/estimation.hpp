#pragma once

// Leave-one-out prediction under the nested scheme and covariance-parameter
// estimation by stochastic gradient descent on the leave-one-out error.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "nestkrig/gp_core.hpp"
#include "nestkrig/nested_tree.hpp"
#include "nestkrig/parallel.hpp"
#include "nestkrig/random.hpp"

namespace nestkrig {

struct LooRecord {
  Index index = 0;
  double mean = 0.0;
  double variance = 0.0;
};

struct LooResult {
  std::vector<LooRecord> records;
  std::vector<Index> skipped;  ///< indices whose group would become empty
};

namespace detail {

/// Group containing each design point; the leave-one-out scheme needs a partition.
inline std::vector<std::size_t> owner_groups(const SubModelBank& bank) {
  std::vector<std::size_t> owner(static_cast<std::size_t>(bank.size()), bank.group_count());
  for (std::size_t g = 0; g < bank.group_count(); ++g)
    for (Index i : bank.group(g)) {
      if (owner[static_cast<std::size_t>(i)] != bank.group_count())
        fail(ErrorKind::InvalidArgument, "leave-one-out needs disjoint groups; point " + std::to_string(i) +
                                             " belongs to several");
      owner[static_cast<std::size_t>(i)] = g;
    }
  return owner;
}

}  // namespace detail

/// Leave-one-out nested predictions at the selected design points. Only the
/// group holding the deleted point is refitted; the partition is otherwise kept.
inline LooResult loo_predict(const SubModelBank& bank, const AggregationTree& tree, const std::vector<Index>& indices,
                             unsigned threads = 1) {
  require_dims(static_cast<Index>(bank.group_count()) == tree.leaf_count(), "loo_predict: tree and bank disagree");
  const auto owner = detail::owner_groups(bank);
  LooResult result;
  std::vector<Index> kept;
  for (Index i : indices) {
    if (i < 0 || i >= bank.size()) fail(ErrorKind::InvalidArgument, "loo index out of range");
    const std::size_t g = owner[static_cast<std::size_t>(i)];
    if (g == bank.group_count()) fail(ErrorKind::InvalidArgument, "point " + std::to_string(i) + " is in no group");
    if (bank.group(g).size() < 2)
      result.skipped.push_back(i);
    else
      kept.push_back(i);
  }

  const Index q = static_cast<Index>(kept.size());
  PointSet Xq(q, bank.X().cols());
  std::vector<std::optional<WeightOverride>> overrides(static_cast<std::size_t>(q));
  for (Index r = 0; r < q; ++r) Xq.row(r) = bank.X().row(kept[static_cast<std::size_t>(r)]);
  parallel_for(static_cast<std::size_t>(q), threads, [&](std::size_t r) {
    const Index i = kept[r];
    const std::size_t g = owner[static_cast<std::size_t>(i)];
    const auto& members = bank.group(g);
    std::vector<Index> reduced;
    Index slot = 0;
    for (std::size_t t = 0; t < members.size(); ++t) {
      if (members[t] == i)
        slot = static_cast<Index>(t);
      else
        reduced.push_back(members[t]);
    }
    const PointSet pts = select_rows(bank.X(), reduced);
    const SpdFactor factor = factor_spd(gram_matrix(bank.kernel(), pts), bank.jitter());
    const Vector a = factor.solve(cross_vector(bank.kernel(), pts, bank.X().row(i)));
    Vector embedded = Vector::Zero(static_cast<Index>(members.size()));
    for (Index t = 0, s = 0; t < embedded.size(); ++t)
      if (t != slot) embedded(t) = a(s++);
    overrides[r] = WeightOverride{g, std::move(embedded)};
  });

  result.records.resize(static_cast<std::size_t>(q));
  for_each_layer_state(
      bank, Xq, threads,
      [&](Index r, const LayerState& s, double kxx) {
        const NestedResult nr = nested_aggregate(kxx, s, tree);
        result.records[static_cast<std::size_t>(r)] = LooRecord{kept[static_cast<std::size_t>(r)], nr.mean, nr.variance};
      },
      &overrides);
  return result;
}

/// Mean squared leave-one-out error.
inline double loo_criterion(const std::vector<LooRecord>& records, const Vector& y) {
  if (records.empty()) fail(ErrorKind::InvalidArgument, "loo_criterion: no records");
  double s = 0.0;
  for (const auto& r : records) {
    const double e = y(r.index) - r.mean;
    s += e * e;
  }
  return s / double(records.size());
}

/// Process variance making the normalised leave-one-out errors unit-variance.
/// The records must come from a unit-variance kernel. Records whose variance is
/// at rounding level (<= 1e-12, e.g. a near-duplicate design point) carry no
/// usable normalised error and are left out of the average.
inline double estimate_sigma2(const std::vector<LooRecord>& records, const Vector& y) {
  if (records.empty()) fail(ErrorKind::InvalidArgument, "estimate_sigma2: no records");
  constexpr double kFloor = 1e-12;
  double s = 0.0;
  std::size_t used = 0;
  for (const auto& r : records) {
    if (!(r.variance > kFloor)) continue;
    const double e = y(r.index) - r.mean;
    s += e * e / r.variance;
    ++used;
  }
  if (used == 0)
    fail(ErrorKind::NonPositiveVariance, "estimate_sigma2: every leave-one-out variance is at rounding level");
  return s / double(used);
}

/// Sum of the sub-models' Gaussian log-likelihoods. A cheap objective for
/// choosing a starting point.
inline double submodel_log_likelihood(const SubModelBank& bank) {
  constexpr double kLog2Pi = 1.8378770664093453;
  double total = 0.0;
  for (std::size_t g = 0; g < bank.group_count(); ++g) {
    const double quad = bank.group_responses(g).dot(bank.weights(g));
    const double ng = double(bank.group(g).size());
    total += -0.5 * (quad + bank.factor(g).log_determinant() + ng * kLog2Pi);
  }
  return total;
}

struct SgdConfig {
  Vector theta0;            ///< initial length-scales
  double a = 0.1;
  double A = -1.0;          ///< negative: n_iter / 10
  double alpha = 0.602;
  double c = 0.1;
  double gamma = 0.101;
  Index q = 100;
  int n_iter = 300;
  std::uint64_t seed = 0;
  bool two_phase = false;   ///< a first pass with alpha = 0.2 seeds a pass with `alpha`
  /// When positive, `a` is the size of the first log-space step: the gain is
  /// rescaled by the mean |gradient estimate| over this many draws at theta0.
  int gain_calibration = 0;
  /// When positive, each coordinate's log-space step is clipped to this size.
  double max_step = 0.0;
  unsigned threads = 1;
};

struct SgdIteration {
  int iteration = 0;
  double criterion = 0.0;   ///< mean of the two perturbed criteria
  Vector theta;             ///< length-scales after the update
  bool rejected = false;
};

struct SgdResult {
  Vector theta;
  double gain = 0.0;        ///< `a` actually used after calibration and halvings
  int rejected_steps = 0;
  std::vector<SgdIteration> trace;
};

/// Simultaneous-perturbation descent of the leave-one-out error over
/// log length-scales. Deterministic given the seed, whatever the thread count.
inline SgdResult sgd_fit(const KernelSpec& kernel, const PointSet& X, const Vector& y,
                         const std::vector<std::vector<Index>>& groups, const AggregationTree& tree,
                         const SgdConfig& cfg,
                         const std::function<void(const SgdIteration&)>& on_iteration = {}) {
  const Index d = kernel.dimension();
  require_dims(cfg.theta0.size() == d, "sgd_fit: theta0 has " + std::to_string(cfg.theta0.size()) +
                                           " entries, kernel dimension is " + std::to_string(d));
  if (!(cfg.a > 0.0 && cfg.c > 0.0 && cfg.alpha > 0.0 && cfg.gamma > 0.0) || cfg.q < 1 || cfg.n_iter < 0)
    fail(ErrorKind::InvalidArgument, "sgd_fit: step constants must be positive");
  for (Index j = 0; j < d; ++j)
    if (!(cfg.theta0(j) > 0.0)) fail(ErrorKind::InvalidArgument, "sgd_fit: theta0 must be positive");

  const KernelSpec unit = kernel.with_variance(1.0);
  // Points whose group has a single member have no leave-one-out prediction.
  std::vector<Index> eligible;
  for (const auto& g : groups)
    if (g.size() >= 2) eligible.insert(eligible.end(), g.begin(), g.end());
  std::sort(eligible.begin(), eligible.end());
  if (eligible.empty()) fail(ErrorKind::InvalidArgument, "sgd_fit: every group is a singleton");
  const std::size_t q = std::min<std::size_t>(static_cast<std::size_t>(cfg.q), eligible.size());

  auto criterion = [&](const Vector& log_theta, const std::vector<Index>& subset) {
    try {
      const SubModelBank bank(unit.with_lengthscales(log_theta.array().exp().matrix()), X, y, groups);
      const LooResult loo = loo_predict(bank, tree, subset, cfg.threads);
      return loo_criterion(loo.records, y);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::NotFactorizable || e.kind() == ErrorKind::InvalidArgument)
        return std::numeric_limits<double>::quiet_NaN();
      throw;
    }
  };

  auto draw = [&](std::uint64_t stream, std::vector<Index>& subset, Vector& h) {
    Rng rng = make_rng(cfg.seed, stream);
    std::vector<Index> pool = eligible;
    // Partial Fisher-Yates: the first q entries are a uniform subset.
    for (std::size_t t = 0; t < q; ++t) {
      std::uniform_int_distribution<std::size_t> pick(t, pool.size() - 1);
      std::swap(pool[t], pool[pick(rng)]);
    }
    subset.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(q));
    std::sort(subset.begin(), subset.end());
    std::bernoulli_distribution coin(0.5);
    h.resize(d);
    for (Index j = 0; j < d; ++j) h(j) = coin(rng) ? 1.0 : -1.0;
  };

  SgdResult result;
  Vector phi = cfg.theta0.array().log().matrix();
  const double A = cfg.A < 0.0 ? cfg.n_iter / 10.0 : cfg.A;
  double a = cfg.a;

  if (cfg.gain_calibration > 0 && cfg.n_iter > 0) {
    double total = 0.0;
    int used = 0;
    for (int t = 0; t < cfg.gain_calibration; ++t) {
      std::vector<Index> subset;
      Vector h;
      draw(0x5eed0000ULL + static_cast<std::uint64_t>(t), subset, h);
      const double delta = cfg.c;
      const double plus = criterion(phi + delta * h, subset);
      const double minus = criterion(phi - delta * h, subset);
      if (!std::isfinite(plus) || !std::isfinite(minus)) continue;
      total += std::abs(plus - minus) / (2.0 * delta);
      ++used;
    }
    if (used > 0 && total > 0.0) a = cfg.a * std::pow(A + 1.0, cfg.two_phase ? 0.2 : cfg.alpha) / (total / used);
  }

  auto run_phase = [&](double alpha, std::uint64_t phase) {
    for (int i = 0; i < cfg.n_iter; ++i) {
      std::vector<Index> subset;
      Vector h;
      draw((phase << 32) + static_cast<std::uint64_t>(i) + 1, subset, h);
      const double delta = cfg.c / std::pow(double(i + 1), cfg.gamma);
      const double plus = criterion(phi + delta * h, subset);
      const double minus = criterion(phi - delta * h, subset);
      SgdIteration it;
      it.iteration = static_cast<int>(result.trace.size());
      if (!std::isfinite(plus) || !std::isfinite(minus)) {
        a *= 0.5;
        ++result.rejected_steps;
        it.rejected = true;
        it.criterion = std::numeric_limits<double>::quiet_NaN();
      } else {
        const double grad = (plus - minus) / (2.0 * delta);
        const double step = a / std::pow(A + double(i) + 1.0, alpha);
        double move = step * grad;
        if (cfg.max_step > 0.0) move = std::clamp(move, -cfg.max_step, cfg.max_step);
        phi -= move * h;
        it.criterion = 0.5 * (plus + minus);
      }
      it.theta = phi.array().exp().matrix();
      if (on_iteration) on_iteration(it);
      result.trace.push_back(std::move(it));
    }
  };

  if (cfg.two_phase) run_phase(0.2, 1);
  run_phase(cfg.alpha, 2);
  result.theta = phi.array().exp().matrix();
  result.gain = a;
  return result;
}

}  // namespace nestkrig
