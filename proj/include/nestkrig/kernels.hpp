#pragma once

// Stationary anisotropic covariance families. Every family is a function of
// the scaled separations h_j = |x_j - y_j| / theta_j.

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <string>
#include <string_view>

#include "nestkrig/errors.hpp"
#include "nestkrig/linalg.hpp"

namespace nestkrig {

/// Design points, one per row.
using PointSet = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class KernelFamily { SquaredExponential, Exponential, Matern32, Matern52 };

inline std::string_view to_string(KernelFamily family) {
  switch (family) {
    case KernelFamily::SquaredExponential: return "squared_exponential";
    case KernelFamily::Exponential: return "exponential";
    case KernelFamily::Matern32: return "matern32";
    case KernelFamily::Matern52: return "matern52";
  }
  return "unknown";
}

inline std::optional<KernelFamily> parse_kernel_family(std::string_view name) {
  if (name == "squared_exponential" || name == "se" || name == "gauss") return KernelFamily::SquaredExponential;
  if (name == "exponential" || name == "exp") return KernelFamily::Exponential;
  if (name == "matern32") return KernelFamily::Matern32;
  if (name == "matern52") return KernelFamily::Matern52;
  return std::nullopt;
}

/// Covariance family with variance sigma^2 and one length-scale per input dimension.
class KernelSpec {
 public:
  KernelSpec(KernelFamily family, double variance, Vector lengthscales)
      : family_(family), variance_(variance), lengthscales_(std::move(lengthscales)) {
    if (!(variance_ > 0.0) || !std::isfinite(variance_))
      fail(ErrorKind::InvalidArgument, "kernel variance must be positive");
    if (lengthscales_.size() == 0) fail(ErrorKind::InvalidArgument, "kernel needs at least one length-scale");
    for (Index j = 0; j < lengthscales_.size(); ++j) {
      if (!(lengthscales_(j) > 0.0) || !std::isfinite(lengthscales_(j)))
        fail(ErrorKind::InvalidArgument, "kernel length-scales must be positive");
    }
  }

  /// Same length-scale in every one of `dim` dimensions.
  static KernelSpec isotropic(KernelFamily family, double variance, double lengthscale, Index dim = 1) {
    return KernelSpec(family, variance, Vector::Constant(dim, lengthscale));
  }

  KernelFamily family() const { return family_; }
  double variance() const { return variance_; }
  const Vector& lengthscales() const { return lengthscales_; }
  Index dimension() const { return lengthscales_.size(); }

  KernelSpec with_variance(double variance) const { return KernelSpec(family_, variance, lengthscales_); }
  KernelSpec with_lengthscales(Vector lengthscales) const {
    return KernelSpec(family_, variance_, std::move(lengthscales));
  }

  /// Covariance between two raw points given as contiguous arrays of dimension().
  double operator()(const double* x, const double* y) const {
    const Index d = dimension();
    switch (family_) {
      case KernelFamily::SquaredExponential: {
        double r2 = 0.0;
        for (Index j = 0; j < d; ++j) {
          const double h = std::abs(x[j] - y[j]) / lengthscales_(j);
          r2 += h * h;
        }
        return variance_ * std::exp(-0.5 * r2);
      }
      case KernelFamily::Exponential: {
        double s = 0.0;
        for (Index j = 0; j < d; ++j) s += std::abs(x[j] - y[j]) / lengthscales_(j);
        return variance_ * std::exp(-s);
      }
      case KernelFamily::Matern32: {
        constexpr double kSqrt3 = 1.7320508075688772;
        double poly = 1.0;
        double s = 0.0;
        for (Index j = 0; j < d; ++j) {
          const double h = kSqrt3 * std::abs(x[j] - y[j]) / lengthscales_(j);
          poly *= 1.0 + h;
          s += h;
        }
        return variance_ * poly * std::exp(-s);
      }
      case KernelFamily::Matern52: {
        constexpr double kSqrt5 = 2.23606797749979;
        double poly = 1.0;
        double s = 0.0;
        for (Index j = 0; j < d; ++j) {
          const double h = std::abs(x[j] - y[j]) / lengthscales_(j);
          poly *= 1.0 + kSqrt5 * h + (5.0 / 3.0) * h * h;
          s += kSqrt5 * h;
        }
        return variance_ * poly * std::exp(-s);
      }
    }
    return 0.0;
  }

 private:
  KernelFamily family_;
  double variance_;
  Vector lengthscales_;
};

/// k(x, y) for two d-vectors.
template <typename A, typename B>
double eval(const KernelSpec& spec, const Eigen::MatrixBase<A>& x, const Eigen::MatrixBase<B>& y) {
  require_dims(x.size() == spec.dimension() && y.size() == spec.dimension(),
               "kernel eval: points have dimensions " + std::to_string(x.size()) + " and " +
                   std::to_string(y.size()) + ", kernel expects " + std::to_string(spec.dimension()));
  const Vector xe = x;
  const Vector ye = y;
  return spec(xe.data(), ye.data());
}

/// k(A, B): n x m matrix of covariances between the rows of A and B.
inline Matrix cross_matrix(const KernelSpec& spec, const PointSet& a, const PointSet& b) {
  require_dims(a.cols() == spec.dimension() || a.rows() == 0,
               "cross_matrix: first point set has dimension " + std::to_string(a.cols()));
  require_dims(b.cols() == spec.dimension() || b.rows() == 0,
               "cross_matrix: second point set has dimension " + std::to_string(b.cols()));
  Matrix out(a.rows(), b.rows());
  for (Index j = 0; j < b.rows(); ++j) {
    const double* bj = b.row(j).data();
    for (Index i = 0; i < a.rows(); ++i) out(i, j) = spec(a.row(i).data(), bj);
  }
  return out;
}

/// k(A, A), filled symmetrically so the result is exactly symmetric.
inline Matrix gram_matrix(const KernelSpec& spec, const PointSet& a) {
  require_dims(a.cols() == spec.dimension() || a.rows() == 0, "gram_matrix: dimension mismatch");
  const Index n = a.rows();
  Matrix out(n, n);
  for (Index j = 0; j < n; ++j) {
    out(j, j) = spec(a.row(j).data(), a.row(j).data());
    for (Index i = j + 1; i < n; ++i) {
      const double v = spec(a.row(i).data(), a.row(j).data());
      out(i, j) = v;
      out(j, i) = v;
    }
  }
  return out;
}

/// k(A, x) for a single point x.
template <typename Derived>
Vector cross_vector(const KernelSpec& spec, const PointSet& a, const Eigen::MatrixBase<Derived>& x) {
  require_dims(x.size() == spec.dimension(), "cross_vector: dimension mismatch");
  const Vector xe = x;
  Vector out(a.rows());
  for (Index i = 0; i < a.rows(); ++i) out(i) = spec(a.row(i).data(), xe.data());
  return out;
}

/// Rows of `points` selected by `indices`.
template <typename IndexRange>
PointSet select_rows(const PointSet& points, const IndexRange& indices) {
  PointSet out(static_cast<Index>(std::size(indices)), points.cols());
  Index r = 0;
  for (auto i : indices) out.row(r++) = points.row(static_cast<Index>(i));
  return out;
}

template <typename IndexRange>
Vector select_entries(const Vector& values, const IndexRange& indices) {
  Vector out(static_cast<Index>(std::size(indices)));
  Index r = 0;
  for (auto i : indices) out(r++) = values(static_cast<Index>(i));
  return out;
}

}  // namespace nestkrig
