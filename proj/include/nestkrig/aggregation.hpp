#pragma once

// Optimal linear aggregation of sub-models at a point, the aggregated process
// whose posterior reproduces it, and diagnostics against the full model.

#include <algorithm>
#include <cmath>
#include <bit>
#include <cstdint>
#include <limits>
#include <vector>

#include "nestkrig/gp_core.hpp"
#include "nestkrig/linalg.hpp"

namespace nestkrig {

struct AggregatedPrediction {
  double mean = 0.0;
  double variance = 0.0;
  Vector weights;
  bool degenerate = false;
};

/// Best linear unbiased combination of the predictors M given their covariance
/// KM and their covariances kM with Y(x). Works for any sub-model type.
inline AggregatedPrediction aggregate(double kxx, const Vector& M, const Vector& kM, const Matrix& KM) {
  require_dims(M.size() == kM.size() && KM.rows() == M.size() && KM.cols() == M.size(),
               "aggregate: M has " + std::to_string(M.size()) + " entries, kM " + std::to_string(kM.size()) +
                   ", KM is " + std::to_string(KM.rows()) + "x" + std::to_string(KM.cols()));
  BlueWeights blue = blue_weights(KM, kM);
  AggregatedPrediction out;
  out.mean = blue.weights.dot(M);
  out.variance = std::max(0.0, kxx - blue.weights.dot(kM));
  out.weights = std::move(blue.weights);
  out.degenerate = blue.degenerate;
  return out;
}

inline AggregatedPrediction aggregate(double kxx, const LayerState& state) {
  return aggregate(kxx, state.M, state.k, state.K);
}

namespace detail {

template <typename DA, typename DB>
bool same_point(const Eigen::MatrixBase<DA>& x, const Eigen::MatrixBase<DB>& y) {
  if (x.size() != y.size()) return false;
  for (Index j = 0; j < x.size(); ++j)
    if (std::bit_cast<std::uint64_t>(double(x.coeff(j))) != std::bit_cast<std::uint64_t>(double(y.coeff(j)))) return false;
  return true;
}

/// k_A(x, x2) evaluated through the cross-location sub-model covariances.
template <typename DA, typename DB>
double aggregated_kernel_formula(const SubModelBank& bank, const Eigen::MatrixBase<DA>& x,
                                 const Eigen::MatrixBase<DB>& x2) {
  const LayerState sx = submodel_predict(bank, x);
  const LayerState s2 = submodel_predict(bank, x2);
  const Vector ax = blue_weights(sx.K, sx.k).weights;
  const Vector a2 = blue_weights(s2.K, s2.k).weights;
  const CrossLocationState cross = submodel_cross(bank, x, x2);
  const double kxy = eval(bank.kernel(), x, x2);
  return kxy + 2.0 * ax.dot(cross.K * a2) - ax.dot(cross.kx2) - a2.dot(cross.k2x);
}

}  // namespace detail

/// Covariance k_A(x, x2) of the aggregated process. For bitwise identical
/// arguments the exact value k(x, x) is returned.
template <typename DA, typename DB>
double aggregate_process_cov(const SubModelBank& bank, const Eigen::MatrixBase<DA>& x,
                             const Eigen::MatrixBase<DB>& x2) {
  require_dims(x.size() == bank.kernel().dimension() && x2.size() == bank.kernel().dimension(),
               "aggregate_process_cov: point dimension mismatch");
  if (detail::same_point(x, x2)) return eval(bank.kernel(), x, x2);
  return detail::aggregated_kernel_formula(bank, x, x2);
}

/// Aggregated predictor written as a linear map of the observations:
/// M_A(x) = lambda^T f(X), with lambda = sum_g alpha_g E_g^T K_g^{-1} k(X_g, x).
template <typename Derived>
Vector aggregation_coefficients(const SubModelBank& bank, const Eigen::MatrixBase<Derived>& x) {
  const LayerState s = submodel_predict(bank, x);
  const Vector alpha = blue_weights(s.K, s.k).weights;
  Vector lambda = Vector::Zero(bank.size());
  for (std::size_t g = 0; g < bank.group_count(); ++g) {
    const Vector a = bank.factor(g).solve(cross_vector(bank.kernel(), bank.group_points(g), x));
    const auto& idx = bank.group(g);
    for (std::size_t r = 0; r < idx.size(); ++r) lambda(idx[r]) += alpha(static_cast<Index>(g)) * a(static_cast<Index>(r));
  }
  return lambda;
}

struct AggregatedPosterior {
  Vector mean;
  Vector variance;
  Matrix cond_cov;
};

/// Gaussian conditioning of the aggregated process on Y_A(X) = f. Builds
/// k_A(X, X), so it is meant for small designs only.
inline AggregatedPosterior aggregated_posterior(const SubModelBank& bank, const PointSet& Xq, const PointSet& X,
                                                const Vector& f) {
  detail::check_queries(bank.kernel(), Xq, "aggregated_posterior");
  detail::check_queries(bank.kernel(), X, "aggregated_posterior");
  require_dims(X.rows() == f.size(), "aggregated_posterior: point and response counts differ");
  const Index q = Xq.rows();
  const Index n = X.rows();
  const KernelSpec& kernel = bank.kernel();

  // Every point (queries then conditioning points) through its coefficient
  // vector lambda and u = K lambda, K = k(design, design).
  PointSet all(q + n, kernel.dimension());
  all.topRows(q) = Xq;
  all.bottomRows(n) = X;
  const Index total = q + n;
  const Matrix design_gram = gram_matrix(kernel, bank.X());
  Matrix lambda(bank.size(), total);
  for (Index i = 0; i < total; ++i) lambda.col(i) = aggregation_coefficients(bank, all.row(i));
  const Matrix u = design_gram * lambda;
  const Matrix kd = cross_matrix(kernel, bank.X(), all);  // k(design, point)
  const Matrix kk = gram_matrix(kernel, all);

  Matrix kA(total, total);
  for (Index j = 0; j < total; ++j) {
    kA(j, j) = kk(j, j);
    for (Index i = j + 1; i < total; ++i) {
      const double v = kk(i, j) + 2.0 * lambda.col(i).dot(u.col(j)) - lambda.col(i).dot(kd.col(j)) -
                       lambda.col(j).dot(kd.col(i));
      kA(i, j) = v;
      kA(j, i) = v;
    }
  }
  const Matrix kqq = kA.topLeftCorner(q, q);
  const Matrix kqx = kA.topRightCorner(q, n);
  const Matrix kxx = kA.bottomRightCorner(n, n);
  const SpdFactor factor = factor_spd(kxx);
  const Matrix half = factor.half_solve(Matrix(kqx.transpose()));

  AggregatedPosterior out;
  out.mean = kqx * factor.solve(f);
  out.cond_cov = kqq - half.transpose() * half;
  out.cond_cov = 0.5 * (out.cond_cov + out.cond_cov.transpose());
  out.variance = out.cond_cov.diagonal().cwiseMax(0.0);
  return out;
}

struct Diagnostics {
  double mean_gap = 0.0;      ///< m_A - m_full
  double var_gap = 0.0;       ///< v_A - v_full
  double bound = 0.0;         ///< min_i E[(Y - M_i)^2] - v_full
  double mean_error_lhs = 0.0;  ///< E[(M_A - M_full)^2]
  double mean_error_rhs = 0.0;  ///< ||k(X,x) - k_A(X,x)||_K^2
  double var_error_lhs = 0.0;   ///< v_A - v_full (unclamped)
  double var_error_rhs = 0.0;   ///< ||k(X,x)||_K^2 - ||k_A(X,x)||_K^2
};

/// Compares the aggregated predictor with the full model at x. The bank must
/// be built on the full model's design.
template <typename Derived>
Diagnostics diagnostics_vs_full(const FullModel& full, const SubModelBank& bank, const Eigen::MatrixBase<Derived>& x) {
  require_dims(full.size() == bank.size(), "diagnostics_vs_full: bank and full model designs differ");
  const KernelSpec& kernel = bank.kernel();
  const double kxx = eval(kernel, x, x);
  const LayerState s = submodel_predict(bank, x);
  const AggregatedPrediction agg = aggregate(kxx, s);

  const Vector kX = cross_vector(kernel, full.X(), x);
  const double m_full = kX.dot(full.weights());
  const double norm_k = full.factor().half_solve(kX).squaredNorm();
  const double v_full = std::max(0.0, kxx - norm_k);

  Diagnostics d;
  d.mean_gap = agg.mean - m_full;
  d.var_gap = agg.variance - v_full;
  double best = kxx;
  for (Index i = 0; i < s.k.size(); ++i)
    if (s.K(i, i) > 0.0) best = std::min(best, kxx - s.k(i) * s.k(i) / s.K(i, i));
  d.bound = best - v_full;

  // Left-hand sides from the linear representation M_A = lambda^T Y(X).
  const Vector lambda = aggregation_coefficients(bank, x);
  const Matrix gram = gram_matrix(kernel, full.X());
  d.mean_error_lhs = lambda.dot(gram * lambda) - 2.0 * lambda.dot(kX) + norm_k;
  d.var_error_lhs = (kxx - agg.weights.dot(s.k)) - (kxx - norm_k);

  // Right-hand sides from the aggregated kernel.
  Vector kA(full.size());
  for (Index i = 0; i < full.size(); ++i) kA(i) = aggregate_process_cov(bank, full.X().row(i), x);
  d.mean_error_rhs = full.factor().half_solve(Vector(kX - kA)).squaredNorm();
  d.var_error_rhs = norm_k - full.factor().half_solve(kA).squaredNorm();
  return d;
}

}  // namespace nestkrig
