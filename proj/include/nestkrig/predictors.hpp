#pragma once

// One entry point for every prediction method over a sub-model bank.

#include <string>
#include <vector>

#include "nestkrig/baselines.hpp"
#include "nestkrig/gp_core.hpp"
#include "nestkrig/nested_tree.hpp"

namespace nestkrig {

struct PredictOptions {
  unsigned threads = 1;
  Index full_cap = 5000;  ///< largest n for which the full model may be built
};

/// Baseline fusion of the layer-one experts at one point. Expert i has mean
/// M_i and variance k(x,x) - Cov(M_i, Y(x)).
inline BaselineResult fuse_experts(Method method, double kxx, const LayerState& s) {
  const Vector V = (kxx - s.k.array()).cwiseMax(0.0).matrix();
  switch (method) {
    case Method::PoE: return poe(s.M, V, kxx);
    case Method::GPoE1: return gpoe(s.M, V, kxx, GpoeWeighting::DifferentialEntropy);
    case Method::GPoE2: return gpoe(s.M, V, kxx, GpoeWeighting::Uniform);
    case Method::BCM: return bcm(s.M, V, kxx);
    case Method::RBCM: return rbcm(s.M, V, kxx);
    case Method::SPV: return spv(s.M, V);
    default: break;
  }
  fail(ErrorKind::InvalidArgument, "fuse_experts: " + std::string(to_string(method)) + " is not a baseline");
}

/// Predictions of several methods at once; the layer-one quantities are
/// computed a single time and shared.
inline std::vector<BatchPrediction> predict_methods(const std::vector<Method>& methods, const SubModelBank& bank,
                                                    const AggregationTree& tree, const PointSet& Xq,
                                                    const PredictOptions& opts = {}) {
  const Index q = Xq.rows();
  std::vector<BatchPrediction> out(methods.size());
  for (auto& b : out) {
    b.mean = Vector::Zero(q);
    b.variance = Vector::Zero(q);
  }
  bool need_layer = false;
  for (std::size_t m = 0; m < methods.size(); ++m) {
    if (methods[m] != Method::Full) {
      need_layer = true;
      continue;
    }
    if (bank.size() > opts.full_cap)
      fail(ErrorKind::CapExceeded, "full model on n = " + std::to_string(bank.size()) +
                                       " points exceeds the cap of " + std::to_string(opts.full_cap) +
                                       " (cubic cost and an n x n covariance); raise the cap to force it");
    const FullModel full(bank.kernel(), bank.X(), bank.y(), bank.jitter());
    const Prediction p = full_predict(full, Xq);
    out[m].mean = p.mean;
    out[m].variance = p.variance;
  }
  if (!need_layer) return out;
  require_dims(static_cast<Index>(bank.group_count()) == tree.leaf_count(), "predict: tree and bank disagree");

  std::vector<std::vector<char>> flags(methods.size(), std::vector<char>(static_cast<std::size_t>(q), 0));
  for_each_layer_state(bank, Xq, opts.threads, [&](Index i, const LayerState& s, double kxx) {
    for (std::size_t m = 0; m < methods.size(); ++m) {
      if (methods[m] == Method::Full) continue;
      if (methods[m] == Method::Nested) {
        const NestedResult r = nested_aggregate(kxx, s, tree);
        out[m].mean(i) = r.mean;
        out[m].variance(i) = r.variance;
        flags[m][static_cast<std::size_t>(i)] = r.degenerate;
      } else {
        const BaselineResult r = fuse_experts(methods[m], kxx, s);
        out[m].mean(i) = r.mean;
        out[m].variance(i) = r.variance;
        flags[m][static_cast<std::size_t>(i)] = r.degenerate;
      }
    }
  });
  for (std::size_t m = 0; m < methods.size(); ++m)
    for (char f : flags[m]) out[m].degenerate_count += f;
  return out;
}

inline BatchPrediction predict(Method method, const SubModelBank& bank, const AggregationTree& tree,
                               const PointSet& Xq, const PredictOptions& opts = {}) {
  return predict_methods({method}, bank, tree, Xq, opts).front();
}

}  // namespace nestkrig
