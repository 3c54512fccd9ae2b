#pragma once

// Dense symmetric positive definite linear algebra: Cholesky factors with a
// jitter escalation schedule, triangular solves, and a pseudo-inverse solve
// for the rank-deficient systems that aggregation can produce.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "nestkrig/errors.hpp"

namespace nestkrig {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Diagonal inflation schedule tried when a plain Cholesky factorization fails.
/// Attempt j (0-based) adds initial_relative * mean(diag) * growth^j.
struct JitterPolicy {
  double initial_relative = 1e-12;
  double growth = 10.0;
  int max_attempts = 6;

  static JitterPolicy none() { return JitterPolicy{0.0, 1.0, 0}; }
};

/// Lower Cholesky factor L with L L^T = A + applied_jitter * I.
class SpdFactor {
 public:
  SpdFactor() = default;
  SpdFactor(Matrix lower, double applied_jitter)
      : lower_(std::move(lower)), applied_jitter_(applied_jitter) {}

  Index dimension() const { return lower_.rows(); }
  const Matrix& lower() const { return lower_; }
  double applied_jitter() const { return applied_jitter_; }

  /// A^{-1} rhs for the jittered matrix.
  template <typename Derived>
  typename Derived::PlainObject solve(const Eigen::MatrixBase<Derived>& rhs) const {
    require_dims(rhs.rows() == dimension(),
                 "solve: rhs has " + std::to_string(rhs.rows()) + " rows, factor is " +
                     std::to_string(dimension()));
    typename Derived::PlainObject x = rhs;
    if (dimension() == 0) return x;
    lower_.triangularView<Eigen::Lower>().solveInPlace(x);
    lower_.transpose().triangularView<Eigen::Upper>().solveInPlace(x);
    return x;
  }

  /// L^{-1} rhs; squared column norms of the result give quadratic forms.
  template <typename Derived>
  typename Derived::PlainObject half_solve(const Eigen::MatrixBase<Derived>& rhs) const {
    require_dims(rhs.rows() == dimension(), "half_solve: dimension mismatch");
    typename Derived::PlainObject x = rhs;
    if (dimension() == 0) return x;
    lower_.triangularView<Eigen::Lower>().solveInPlace(x);
    return x;
  }

  double log_determinant() const {
    return 2.0 * lower_.diagonal().array().log().sum();
  }

  Matrix reconstruct() const { return lower_ * lower_.transpose(); }

 private:
  Matrix lower_;
  double applied_jitter_ = 0.0;
};

namespace detail {

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

inline void check_symmetric(const Matrix& matrix, double relative_tol) {
  require_dims(matrix.rows() == matrix.cols(), "matrix must be square");
  if (matrix.size() == 0) return;
  const double scale = matrix.cwiseAbs().maxCoeff();
  const double asym = (matrix - matrix.transpose()).cwiseAbs().maxCoeff();
  if (asym > relative_tol * std::max(scale, 1e-300)) {
    fail(ErrorKind::InvalidArgument,
         "matrix is not symmetric (max asymmetry " + std::to_string(asym) + ")");
  }
}

inline bool try_cholesky(const Matrix& matrix, Matrix& lower) {
  Eigen::LLT<Matrix> llt(matrix);
  if (llt.info() != Eigen::Success) return false;
  lower = llt.matrixL();
  // Pivots at rounding level mean the matrix is singular in floating point.
  const double floor = 4.0 * std::numeric_limits<double>::epsilon() * matrix.diagonal().cwiseAbs().maxCoeff();
  return lower.diagonal().array().square().minCoeff() > floor && lower.allFinite();
}

}  // namespace detail

/// Cholesky factorization with jitter escalation. Throws NotFactorizable once
/// the schedule is exhausted.
inline SpdFactor factor_spd(const Matrix& matrix, const JitterPolicy& policy = {}) {
  detail::check_symmetric(matrix, 1e-10);
  if (!detail::all_finite(matrix)) fail(ErrorKind::InvalidArgument, "matrix has non-finite entries");
  const Index n = matrix.rows();
  if (n == 0) return SpdFactor(Matrix(0, 0), 0.0);

  Matrix lower;
  if (detail::try_cholesky(matrix, lower)) return SpdFactor(std::move(lower), 0.0);

  const double mean_diag = matrix.diagonal().mean();
  if (mean_diag > 0.0) {
    double jitter = policy.initial_relative * mean_diag;
    for (int attempt = 0; attempt < policy.max_attempts; ++attempt, jitter *= policy.growth) {
      Matrix inflated = matrix;
      inflated.diagonal().array() += jitter;
      if (detail::try_cholesky(inflated, lower)) return SpdFactor(std::move(lower), jitter);
    }
  }
  fail(ErrorKind::NotFactorizable,
       "Cholesky failed for a " + std::to_string(n) + "x" + std::to_string(n) +
           " matrix after jitter escalation");
}

inline Matrix solve(const SpdFactor& factor, const Matrix& rhs) { return factor.solve(rhs); }
inline Vector solve(const SpdFactor& factor, const Vector& rhs) { return factor.solve(rhs); }

/// Minimum-norm solution of matrix * x = rhs through a symmetric
/// eigendecomposition; eigenvalues below rank_tol * max eigenvalue are dropped.
inline Vector pseudo_solve(const Matrix& matrix, const Vector& rhs, double rank_tol = 1e-10) {
  require_dims(matrix.rows() == matrix.cols(), "pseudo_solve: matrix must be square");
  require_dims(matrix.rows() == rhs.size(), "pseudo_solve: rhs length mismatch");
  const Index p = matrix.rows();
  Vector x = Vector::Zero(p);
  if (p == 0) return x;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(matrix);
  const Vector& values = eig.eigenvalues();
  const double top = values.maxCoeff();
  if (!(top > 0.0)) return x;
  const double cutoff = rank_tol * top;
  const Vector projected = eig.eigenvectors().transpose() * rhs;
  for (Index j = 0; j < p; ++j) {
    if (values(j) > cutoff) x.noalias() += eig.eigenvectors().col(j) * (projected(j) / values(j));
  }
  return x;
}

/// Weights of the best linear unbiased combination: solves K w = k.
struct BlueWeights {
  Vector weights;
  bool degenerate = false;  ///< pseudo-inverse path taken
};

/// Cholesky when K is numerically nonsingular, otherwise the pseudo-inverse.
/// Near-singularity is judged on pivot^2 / diagonal, which is invariant to
/// rescaling individual predictors.
inline BlueWeights blue_weights(const Matrix& cov, const Vector& cross, double rank_tol = 1e-10) {
  require_dims(cov.rows() == cov.cols() && cov.rows() == cross.size(),
               "blue_weights: covariance is " + std::to_string(cov.rows()) + "x" +
                   std::to_string(cov.cols()) + ", cross-covariance has " +
                   std::to_string(cross.size()) + " entries");
  BlueWeights out;
  const Index p = cov.rows();
  if (p == 0) {
    out.weights = Vector(0);
    return out;
  }
  Eigen::LLT<Matrix> llt(cov);
  bool ok = llt.info() == Eigen::Success;
  if (ok) {
    const Matrix& lower = llt.matrixLLT();
    for (Index j = 0; j < p && ok; ++j) {
      const double pivot = lower(j, j);
      ok = pivot > 0.0 && std::isfinite(pivot) && pivot * pivot > 1e-14 * cov(j, j);
    }
  }
  if (ok) {
    out.weights = llt.solve(cross);
    if (out.weights.allFinite()) return out;
  }
  out.weights = pseudo_solve(cov, cross, rank_tol);
  out.degenerate = true;
  return out;
}

}  // namespace nestkrig
