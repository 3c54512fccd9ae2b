#pragma once

// Multi-layer aggregation over a tree of sub-models, and tree planning.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "nestkrig/aggregation.hpp"
#include "nestkrig/errors.hpp"
#include "nestkrig/gp_core.hpp"
#include "nestkrig/parallel.hpp"

namespace nestkrig {

/// Layered child sets. Layer 1 holds the leaf_count() sub-models; layers()[l]
/// describes layer l + 2, each node as the list of its children in the layer
/// below (0-based). The last layer is the single root.
class AggregationTree {
 public:
  using ChildSets = std::vector<std::vector<Index>>;

  AggregationTree(Index leaf_count, std::vector<ChildSets> layers)
      : leaf_count_(leaf_count), layers_(std::move(layers)) {
    if (leaf_count_ < 1) fail(ErrorKind::InvalidTree, "tree needs at least one leaf");
    if (layers_.empty()) fail(ErrorKind::InvalidTree, "tree needs at least one aggregation layer");
    Index below = leaf_count_;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const std::string where = "layer " + std::to_string(l + 2);
      if (layers_[l].empty()) fail(ErrorKind::InvalidTree, where + " has no nodes");
      std::vector<char> covered(static_cast<std::size_t>(below), 0);
      for (const auto& children : layers_[l]) {
        if (children.empty()) fail(ErrorKind::InvalidTree, where + " has a node without children");
        for (Index c : children) {
          if (c < 0 || c >= below)
            fail(ErrorKind::InvalidTree, where + ": child index " + std::to_string(c) + " out of range [0, " +
                                             std::to_string(below) + ")");
          covered[static_cast<std::size_t>(c)] = 1;
        }
      }
      for (Index c = 0; c < below; ++c)
        if (!covered[static_cast<std::size_t>(c)])
          fail(ErrorKind::InvalidTree, where + ": node " + std::to_string(c) + " of the layer below has no parent");
      below = static_cast<Index>(layers_[l].size());
    }
    if (below != 1) fail(ErrorKind::InvalidTree, "top layer must hold a single root, found " + std::to_string(below));
  }

  /// One root over all leaves.
  static AggregationTree two_layer(Index leaf_count) {
    std::vector<Index> all(static_cast<std::size_t>(leaf_count));
    for (Index i = 0; i < leaf_count; ++i) all[static_cast<std::size_t>(i)] = i;
    return AggregationTree(leaf_count, {ChildSets{all}});
  }

  /// Consecutive blocks of `fanout[l]` nodes per parent at each intermediate
  /// layer; a root over whatever remains closes the tree.
  static AggregationTree regular(Index leaf_count, const std::vector<Index>& fanout) {
    std::vector<ChildSets> layers;
    Index below = leaf_count;
    for (Index c : fanout) {
      if (below <= 1) break;
      if (c < 2) fail(ErrorKind::InvalidTree, "fan-out must be at least 2");
      if (c >= below) break;
      ChildSets layer;
      for (Index start = 0; start < below; start += c) {
        std::vector<Index> kids;
        for (Index i = start; i < std::min(below, start + c); ++i) kids.push_back(i);
        layer.push_back(std::move(kids));
      }
      below = static_cast<Index>(layer.size());
      layers.push_back(std::move(layer));
    }
    if (below > 1 || layers.empty()) {
      std::vector<Index> all(static_cast<std::size_t>(below));
      for (Index i = 0; i < below; ++i) all[static_cast<std::size_t>(i)] = i;
      layers.push_back(ChildSets{all});
    }
    return AggregationTree(leaf_count, std::move(layers));
  }

  Index leaf_count() const { return leaf_count_; }
  /// Height counting the leaf layer: 2 for a single root over the leaves.
  int height() const { return static_cast<int>(layers_.size()) + 1; }
  const std::vector<ChildSets>& layers() const { return layers_; }
  /// Node counts n_1, ..., n_top.
  std::vector<Index> layer_sizes() const {
    std::vector<Index> out{leaf_count_};
    for (const auto& l : layers_) out.push_back(static_cast<Index>(l.size()));
    return out;
  }

 private:
  Index leaf_count_;
  std::vector<ChildSets> layers_;
};

struct NestedResult {
  double mean = 0.0;
  double variance = 0.0;
  bool degenerate = false;
};

/// Layer-by-layer aggregation from layer-one predictors up to the root.
/// At layer 2 the node weights use layer1.k; above that, the diagonal of the
/// previous layer's covariance.
inline NestedResult nested_aggregate(double kxx, const LayerState& layer1, const AggregationTree& tree) {
  require_dims(layer1.M.size() == tree.leaf_count() && layer1.k.size() == tree.leaf_count() &&
                   layer1.K.rows() == tree.leaf_count() && layer1.K.cols() == tree.leaf_count(),
               "nested_aggregate: layer-one state has " + std::to_string(layer1.M.size()) +
                   " predictors, tree has " + std::to_string(tree.leaf_count()) + " leaves");
  NestedResult out;
  Vector M = layer1.M;
  Vector k = layer1.k;
  Matrix K = layer1.K;
  for (const auto& layer : tree.layers()) {
    const Index m = static_cast<Index>(layer.size());
    std::vector<Vector> alpha(static_cast<std::size_t>(m));
    Vector nextM(m);
    Vector nextk(m);
    Matrix nextK(m, m);
    for (Index i = 0; i < m; ++i) {
      const auto& kids = layer[static_cast<std::size_t>(i)];
      const Index c = static_cast<Index>(kids.size());
      Matrix sub(c, c);
      Vector rhs(c);
      Vector sm(c);
      for (Index a = 0; a < c; ++a) {
        rhs(a) = k(kids[static_cast<std::size_t>(a)]);
        sm(a) = M(kids[static_cast<std::size_t>(a)]);
        for (Index b = 0; b < c; ++b) sub(a, b) = K(kids[static_cast<std::size_t>(a)], kids[static_cast<std::size_t>(b)]);
      }
      BlueWeights blue = blue_weights(sub, rhs);
      out.degenerate = out.degenerate || blue.degenerate;
      nextM(i) = blue.weights.dot(sm);
      nextK(i, i) = blue.weights.dot(rhs);
      alpha[static_cast<std::size_t>(i)] = std::move(blue.weights);
    }
    for (Index i = 0; i < m; ++i) {
      const auto& ki = layer[static_cast<std::size_t>(i)];
      const Vector& ai = alpha[static_cast<std::size_t>(i)];
      for (Index j = 0; j < i; ++j) {
        const auto& kj = layer[static_cast<std::size_t>(j)];
        const Vector& aj = alpha[static_cast<std::size_t>(j)];
        double v = 0.0;
        for (std::size_t a = 0; a < ki.size(); ++a) {
          double row = 0.0;
          for (std::size_t b = 0; b < kj.size(); ++b) row += K(ki[a], kj[b]) * aj(static_cast<Index>(b));
          v += ai(static_cast<Index>(a)) * row;
        }
        nextK(i, j) = v;
        nextK(j, i) = v;
      }
    }
    nextk = nextK.diagonal();
    M = std::move(nextM);
    k = std::move(nextk);
    K = std::move(nextK);
  }
  out.mean = M(0);
  out.variance = std::max(0.0, kxx - K(0, 0));
  return out;
}

template <typename Derived>
NestedResult nested_predict(const SubModelBank& bank, const AggregationTree& tree, const Eigen::MatrixBase<Derived>& x) {
  require_dims(static_cast<Index>(bank.group_count()) == tree.leaf_count(),
               "nested_predict: bank has " + std::to_string(bank.group_count()) + " sub-models, tree has " +
                   std::to_string(tree.leaf_count()) + " leaves");
  const LayerState s = submodel_predict(bank, x);
  return nested_aggregate(eval(bank.kernel(), x, x), s, tree);
}

struct BatchPrediction {
  Vector mean;
  Vector variance;
  Index degenerate_count = 0;
};

/// Nested predictions at every row of Xq.
inline BatchPrediction nested_predict(const SubModelBank& bank, const AggregationTree& tree, const PointSet& Xq,
                                      unsigned threads = 1) {
  require_dims(static_cast<Index>(bank.group_count()) == tree.leaf_count(),
               "nested_predict: bank has " + std::to_string(bank.group_count()) + " sub-models, tree has " +
                   std::to_string(tree.leaf_count()) + " leaves");
  BatchPrediction out;
  out.mean.resize(Xq.rows());
  out.variance.resize(Xq.rows());
  std::vector<char> flags(static_cast<std::size_t>(Xq.rows()), 0);
  for_each_layer_state(bank, Xq, threads, [&](Index q, const LayerState& s, double kxx) {
    const NestedResult r = nested_aggregate(kxx, s, tree);
    out.mean(q) = r.mean;
    out.variance(q) = r.variance;
    flags[static_cast<std::size_t>(q)] = r.degenerate;
  });
  for (char f : flags) out.degenerate_count += f;
  return out;
}

enum class PlanMode { TwoLayerSqrt, Equilibrated, Optimal };

inline std::string_view to_string(PlanMode mode) {
  switch (mode) {
    case PlanMode::TwoLayerSqrt: return "two_layer_sqrt";
    case PlanMode::Equilibrated: return "equilibrated";
    case PlanMode::Optimal: return "optimal";
  }
  return "unknown";
}

inline std::optional<PlanMode> parse_plan_mode(std::string_view name) {
  if (name == "two_layer_sqrt" || name == "sqrt") return PlanMode::TwoLayerSqrt;
  if (name == "equilibrated") return PlanMode::Equilibrated;
  if (name == "optimal") return PlanMode::Optimal;
  return std::nullopt;
}

struct TreePlan {
  std::size_t group_count = 0;           ///< number of sub-models p
  std::vector<Index> child_counts;       ///< rounded c_1 (group size), c_2, ..., c_top
  AggregationTree tree = AggregationTree::two_layer(1);
};

/// Real-valued child counts minimising the prediction cost for a tree of the
/// given height (delta = 3/2).
inline std::vector<double> optimal_child_counts(double n, int height) {
  if (height < 2) fail(ErrorKind::InvalidHeight, "tree height must be at least 2");
  constexpr double delta = 1.5;
  const double top = std::pow(delta, height);
  std::vector<double> out;
  for (int nu = 1; nu <= height; ++nu) {
    const double expo = std::pow(delta, nu - 1) / (2.0 * (top - 1.0));
    out.push_back(delta * std::pow(n / top, expo));
  }
  return out;
}

/// Chooses the group size and tree. Fractional child counts are rounded to
/// the nearest integer (at least 2); the group count is ceil(n / c_1) and the
/// root adopts every node left at the top, so the last count may differ from
/// the tree's actual root fan-out.
inline TreePlan plan_tree(Index n, PlanMode mode, int height = 2) {
  if (n < 4) fail(ErrorKind::InvalidArgument, "plan_tree needs n >= 4");
  if (height < 2) fail(ErrorKind::InvalidHeight, "tree height must be at least 2, got " + std::to_string(height));
  std::vector<double> raw;
  switch (mode) {
    case PlanMode::TwoLayerSqrt:
      raw = {std::sqrt(double(n)), std::sqrt(double(n))};
      break;
    case PlanMode::Equilibrated:
      raw.assign(static_cast<std::size_t>(height), std::pow(double(n), 1.0 / height));
      break;
    case PlanMode::Optimal:
      raw = optimal_child_counts(double(n), height);
      break;
  }
  TreePlan plan;
  for (double c : raw) plan.child_counts.push_back(std::max<Index>(2, static_cast<Index>(std::llround(c))));
  const Index c1 = std::min(plan.child_counts.front(), n);
  plan.group_count = static_cast<std::size_t>((n + c1 - 1) / c1);
  std::vector<Index> fanout(plan.child_counts.begin() + 1, plan.child_counts.end() - 1);
  plan.tree = AggregationTree::regular(static_cast<Index>(plan.group_count), fanout);
  return plan;
}

struct ComplexityEstimate {
  double c_alpha = 0.0;  ///< cubic cost of the weight solves
  double c_beta = 0.0;   ///< cost of the cross-covariance terms
  double storage = 0.0;
};

/// Operation counts for one prediction: C_alpha = alpha * sum over all nodes of
/// (child count)^3, C_beta = beta * sum over layers of sum_{i<j} c_i c_j.
/// Group sizes give the first layer's child counts.
inline ComplexityEstimate complexity_estimate(const std::vector<std::size_t>& group_sizes,
                                              const AggregationTree& tree, double alpha_cost = 1.0,
                                              double beta_cost = 1.0) {
  require_dims(static_cast<Index>(group_sizes.size()) == tree.leaf_count(), "complexity_estimate: group count");
  ComplexityEstimate out;
  auto add_layer = [&](const std::vector<double>& counts) {
    double sum = 0.0;
    double sq = 0.0;
    for (double c : counts) {
      out.c_alpha += alpha_cost * c * c * c;
      sum += c;
      sq += c * c;
    }
    out.c_beta += beta_cost * 0.5 * (sum * sum - sq);
  };
  std::vector<double> first(group_sizes.begin(), group_sizes.end());
  add_layer(first);
  double c_max = *std::max_element(first.begin(), first.end());
  for (const auto& layer : tree.layers()) {
    std::vector<double> counts;
    for (const auto& kids : layer) counts.push_back(double(kids.size()));
    add_layer(counts);
    c_max = std::max(c_max, *std::max_element(counts.begin(), counts.end()));
  }
  const auto sizes = tree.layer_sizes();
  const double n1 = double(sizes[0]);
  const double n2 = sizes.size() > 1 ? double(sizes[1]) : 1.0;
  out.storage = 0.5 * (c_max * (c_max + 5.0) + n1 * (n1 + 5.0) + n2 * (n2 + 3.0));
  return out;
}

}  // namespace nestkrig
