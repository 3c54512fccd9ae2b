#pragma once

// Exact Gaussian-process conditioning, simple-Kriging sub-models with their
// cross-covariances, and path sampling.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nestkrig/data.hpp"
#include "nestkrig/errors.hpp"
#include "nestkrig/kernels.hpp"
#include "nestkrig/linalg.hpp"
#include "nestkrig/parallel.hpp"
#include "nestkrig/random.hpp"

namespace nestkrig {

/// Pointwise predictions.
struct Prediction {
  Vector mean;
  Vector variance;
};

/// Simple Kriging on the whole design; zero prior mean.
class FullModel {
 public:
  FullModel(KernelSpec kernel, PointSet X, Vector y, const JitterPolicy& jitter = {})
      : kernel_(std::move(kernel)), X_(std::move(X)), y_(std::move(y)) {
    require_dims(X_.cols() == kernel_.dimension(), "full model: design dimension " + std::to_string(X_.cols()) +
                                                       " but kernel dimension " +
                                                       std::to_string(kernel_.dimension()));
    require_dims(X_.rows() == y_.size(), "full model: " + std::to_string(X_.rows()) + " points but " +
                                             std::to_string(y_.size()) + " responses");
    if (X_.rows() == 0) fail(ErrorKind::InvalidArgument, "full model needs at least one point");
    factor_ = factor_spd(gram_matrix(kernel_, X_), jitter);
    weights_ = factor_.solve(y_);
  }

  const KernelSpec& kernel() const { return kernel_; }
  const PointSet& X() const { return X_; }
  const Vector& y() const { return y_; }
  const SpdFactor& factor() const { return factor_; }
  const Vector& weights() const { return weights_; }
  Index size() const { return X_.rows(); }

 private:
  KernelSpec kernel_;
  PointSet X_;
  Vector y_;
  SpdFactor factor_;
  Vector weights_;
};

namespace detail {
inline void check_queries(const KernelSpec& kernel, const PointSet& Xq, const char* where) {
  require_dims(Xq.cols() == kernel.dimension() || Xq.rows() == 0,
               std::string(where) + ": query dimension " + std::to_string(Xq.cols()) + " but model dimension " +
                   std::to_string(kernel.dimension()));
}
}  // namespace detail

inline Prediction full_predict(const FullModel& model, const PointSet& Xq) {
  detail::check_queries(model.kernel(), Xq, "full_predict");
  const Matrix cross = cross_matrix(model.kernel(), model.X(), Xq);
  const Matrix half = model.factor().half_solve(cross);
  Prediction out;
  out.mean = cross.transpose() * model.weights();
  out.variance.resize(Xq.rows());
  for (Index j = 0; j < Xq.rows(); ++j) {
    const double kxx = model.kernel()(Xq.row(j).data(), Xq.row(j).data());
    out.variance(j) = std::max(0.0, kxx - half.col(j).squaredNorm());
  }
  return out;
}

/// Conditional covariance matrix of Y(Xq) given Y(X).
inline Matrix full_cond_cov(const FullModel& model, const PointSet& Xq) {
  detail::check_queries(model.kernel(), Xq, "full_cond_cov");
  const Matrix half = model.factor().half_solve(cross_matrix(model.kernel(), model.X(), Xq));
  Matrix cov = gram_matrix(model.kernel(), Xq);
  cov.noalias() -= half.transpose() * half;
  return 0.5 * (cov + cov.transpose());
}

/// Simple-Kriging sub-models, one per group of design points.
class SubModelBank {
 public:
  SubModelBank(KernelSpec kernel, PointSet X, Vector y, std::vector<std::vector<Index>> groups,
               const JitterPolicy& jitter = {})
      : kernel_(std::move(kernel)), X_(std::move(X)), y_(std::move(y)), groups_(std::move(groups)), jitter_(jitter) {
    require_dims(X_.cols() == kernel_.dimension(), "sub-model bank: design dimension " +
                                                       std::to_string(X_.cols()) + " but kernel dimension " +
                                                       std::to_string(kernel_.dimension()));
    require_dims(X_.rows() == y_.size(), "sub-model bank: point and response counts differ");
    if (groups_.empty()) fail(ErrorKind::InvalidGroupCount, "sub-model bank needs at least one group");
    for (const auto& g : groups_) {
      if (g.empty()) fail(ErrorKind::InvalidGroupCount, "empty group");
      for (Index i : g)
        if (i < 0 || i >= X_.rows()) fail(ErrorKind::InvalidArgument, "group index out of range");
    }
    const std::size_t p = groups_.size();
    points_.resize(p);
    responses_.resize(p);
    factors_.resize(p);
    weights_.resize(p);
    for (std::size_t g = 0; g < p; ++g) {
      points_[g] = select_rows(X_, groups_[g]);
      responses_[g] = select_entries(y_, groups_[g]);
      factors_[g] = factor_spd(gram_matrix(kernel_, points_[g]), jitter_);
      weights_[g] = factors_[g].solve(responses_[g]);
    }
  }

  SubModelBank(KernelSpec kernel, PointSet X, Vector y, const Partition& partition, const JitterPolicy& jitter = {})
      : SubModelBank(std::move(kernel), std::move(X), std::move(y), partition.members(), jitter) {}

  const KernelSpec& kernel() const { return kernel_; }
  const PointSet& X() const { return X_; }
  const Vector& y() const { return y_; }
  const JitterPolicy& jitter() const { return jitter_; }
  Index size() const { return X_.rows(); }
  std::size_t group_count() const { return groups_.size(); }
  const std::vector<std::vector<Index>>& groups() const { return groups_; }
  const std::vector<Index>& group(std::size_t g) const { return groups_[g]; }
  const PointSet& group_points(std::size_t g) const { return points_[g]; }
  const Vector& group_responses(std::size_t g) const { return responses_[g]; }
  const SpdFactor& factor(std::size_t g) const { return factors_[g]; }
  /// k(X_g, X_g)^{-1} f(X_g)
  const Vector& weights(std::size_t g) const { return weights_[g]; }

  /// Same design and factors, new responses.
  SubModelBank with_responses(Vector y) const {
    require_dims(y.size() == y_.size(), "with_responses: length mismatch");
    SubModelBank copy = *this;
    copy.y_ = std::move(y);
    for (std::size_t g = 0; g < groups_.size(); ++g) {
      copy.responses_[g] = select_entries(copy.y_, groups_[g]);
      copy.weights_[g] = factors_[g].solve(copy.responses_[g]);
    }
    return copy;
  }

 private:
  KernelSpec kernel_;
  PointSet X_;
  Vector y_;
  std::vector<std::vector<Index>> groups_;
  JitterPolicy jitter_;
  std::vector<PointSet> points_;
  std::vector<Vector> responses_;
  std::vector<SpdFactor> factors_;
  std::vector<Vector> weights_;
};

/// Predictions of one layer at a single query point: M, Cov(M, Y(x)) and Cov(M, M).
struct LayerState {
  Vector M;
  Vector k;
  Matrix K;
};

/// Replaces the Kriging weights of one group for one query. Used by leave-one-out,
/// where the deleted point keeps its slot with a zero weight.
struct WeightOverride {
  std::size_t group = 0;
  Vector weights;
};

namespace detail {

inline constexpr Index kQueryChunk = 64;

/// Layer-one states for a block of queries. Every pair block k(X_g, X_h) is
/// formed once per block and applied to all of its queries, so the work is
/// O(n^2 q) overall and nothing of size n x n is ever allocated.
inline std::vector<LayerState> layer_one_block(const SubModelBank& bank, const PointSet& Xq, Index begin, Index end,
                                               const std::vector<std::optional<WeightOverride>>* overrides,
                                               unsigned threads) {
  const std::size_t p = bank.group_count();
  const Index c = end - begin;
  const PointSet block = Xq.middleRows(begin, c);
  std::vector<Matrix> cross(p);
  std::vector<Matrix> alpha(p);
  parallel_for(p, threads, [&](std::size_t g) {
    cross[g] = cross_matrix(bank.kernel(), bank.group_points(g), block);
    alpha[g] = bank.factor(g).solve(cross[g]);
  });
  if (overrides) {
    for (Index j = 0; j < c; ++j) {
      const auto& o = (*overrides)[static_cast<std::size_t>(begin + j)];
      if (!o) continue;
      require_dims(o->group < p && o->weights.size() == alpha[o->group].rows(), "weight override shape");
      alpha[o->group].col(j) = o->weights;
    }
  }

  std::vector<LayerState> states(static_cast<std::size_t>(c));
  for (auto& s : states) {
    s.M.resize(static_cast<Index>(p));
    s.k.resize(static_cast<Index>(p));
    s.K.resize(static_cast<Index>(p), static_cast<Index>(p));
  }
  for (std::size_t g = 0; g < p; ++g) {
    const Index gi = static_cast<Index>(g);
    for (Index j = 0; j < c; ++j) {
      states[static_cast<std::size_t>(j)].M(gi) = alpha[g].col(j).dot(bank.group_responses(g));
      states[static_cast<std::size_t>(j)].k(gi) = alpha[g].col(j).dot(cross[g].col(j));
    }
  }

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  pairs.reserve(p * (p + 1) / 2);
  for (std::size_t g = 0; g < p; ++g)
    for (std::size_t h = g; h < p; ++h) pairs.emplace_back(g, h);
  parallel_for(pairs.size(), threads, [&](std::size_t t) {
    const auto [g, h] = pairs[t];
    const Matrix between = g == h ? gram_matrix(bank.kernel(), bank.group_points(g))
                                  : cross_matrix(bank.kernel(), bank.group_points(g), bank.group_points(h));
    const Matrix applied = between * alpha[h];
    const Index gi = static_cast<Index>(g);
    const Index hi = static_cast<Index>(h);
    for (Index j = 0; j < c; ++j) {
      const double v = alpha[g].col(j).dot(applied.col(j));
      states[static_cast<std::size_t>(j)].K(gi, hi) = v;
      states[static_cast<std::size_t>(j)].K(hi, gi) = v;
    }
  });
  return states;
}

}  // namespace detail

/// Calls fn(query_index, state, kxx) for every row of Xq. Queries are processed
/// in fixed-size blocks, so the results do not depend on the thread count. fn
/// may be called concurrently for different queries.
template <typename Fn>
void for_each_layer_state(const SubModelBank& bank, const PointSet& Xq, unsigned threads, Fn&& fn,
                          const std::vector<std::optional<WeightOverride>>* overrides = nullptr) {
  detail::check_queries(bank.kernel(), Xq, "sub-model prediction");
  if (overrides) require_dims(overrides->size() == static_cast<std::size_t>(Xq.rows()), "override count");
  for (Index begin = 0; begin < Xq.rows(); begin += detail::kQueryChunk) {
    const Index end = std::min<Index>(Xq.rows(), begin + detail::kQueryChunk);
    const std::vector<LayerState> states = detail::layer_one_block(bank, Xq, begin, end, overrides, threads);
    parallel_for(states.size(), threads, [&](std::size_t j) {
      const Index q = begin + static_cast<Index>(j);
      const double kxx = bank.kernel()(Xq.row(q).data(), Xq.row(q).data());
      fn(q, states[j], kxx);
    });
  }
}

/// Sub-model means M, Cov(M_i, Y(x)) and Cov(M_i, M_j) at a single point.
template <typename Derived>
LayerState submodel_predict(const SubModelBank& bank, const Eigen::MatrixBase<Derived>& x) {
  require_dims(x.size() == bank.kernel().dimension(), "submodel_predict: point dimension mismatch");
  PointSet q(1, x.size());
  for (Index j = 0; j < x.size(); ++j) q(0, j) = x(j);
  return detail::layer_one_block(bank, q, 0, 1, nullptr, 1).front();
}

/// Cross-location quantities between the sub-models at x and at x2:
/// K(i,j) = Cov(M_i(x), M_j(x2)), kx2(i) = Cov(M_i(x), Y(x2)), k2x(i) = Cov(M_i(x2), Y(x)).
struct CrossLocationState {
  Matrix K;
  Vector kx2;
  Vector k2x;
};

template <typename DA, typename DB>
CrossLocationState submodel_cross(const SubModelBank& bank, const Eigen::MatrixBase<DA>& x,
                                  const Eigen::MatrixBase<DB>& x2) {
  require_dims(x.size() == bank.kernel().dimension() && x2.size() == bank.kernel().dimension(),
               "submodel_cross: point dimension mismatch");
  const std::size_t p = bank.group_count();
  std::vector<Vector> a(p), b(p), ka(p), kb(p);
  for (std::size_t g = 0; g < p; ++g) {
    ka[g] = cross_vector(bank.kernel(), bank.group_points(g), x);
    kb[g] = cross_vector(bank.kernel(), bank.group_points(g), x2);
    a[g] = bank.factor(g).solve(ka[g]);
    b[g] = bank.factor(g).solve(kb[g]);
  }
  CrossLocationState out;
  const Index pi = static_cast<Index>(p);
  out.K.resize(pi, pi);
  out.kx2.resize(pi);
  out.k2x.resize(pi);
  for (std::size_t g = 0; g < p; ++g) {
    out.kx2(static_cast<Index>(g)) = a[g].dot(kb[g]);
    out.k2x(static_cast<Index>(g)) = b[g].dot(ka[g]);
    for (std::size_t h = 0; h < p; ++h) {
      const Matrix between = cross_matrix(bank.kernel(), bank.group_points(g), bank.group_points(h));
      out.K(static_cast<Index>(g), static_cast<Index>(h)) = a[g].dot(between * b[h]);
    }
  }
  return out;
}

/// A factor R with R R^T = cov for a positive semi-definite `cov`, from the
/// symmetric eigendecomposition with negative eigenvalues clipped to zero.
/// Unlike a jittered Cholesky factor it reproduces singular covariances to
/// rounding.
inline Matrix gaussian_root(const Matrix& cov) {
  require_dims(cov.rows() == cov.cols(), "gaussian_root: covariance must be square");
  if (cov.rows() == 0) return Matrix(0, 0);
  if (!detail::all_finite(cov)) fail(ErrorKind::InvalidArgument, "gaussian_root: non-finite covariance");
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (cov + cov.transpose()));
  if (eig.info() != Eigen::Success) fail(ErrorKind::NotFactorizable, "gaussian_root: eigendecomposition failed");
  return eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

/// Zero-mean Gaussian draws with covariance `cov`, one draw per row. Coordinates
/// whose variance is below 1e-12 times the largest variance are returned as
/// exactly zero; the rest go through gaussian_root.
inline Matrix sample_gaussian(const Matrix& cov, Index count, std::uint64_t seed) {
  require_dims(cov.rows() == cov.cols(), "sample_gaussian: covariance must be square");
  const Index q = cov.rows();
  Matrix out = Matrix::Zero(count, q);
  if (count == 0 || q == 0) return out;
  const double top = cov.diagonal().maxCoeff();
  std::vector<Index> live;
  for (Index i = 0; i < q; ++i)
    if (cov(i, i) > 1e-12 * top) live.push_back(i);
  if (live.empty()) return out;
  const Index m = static_cast<Index>(live.size());
  Matrix sub(m, m);
  for (Index a = 0; a < m; ++a)
    for (Index b = 0; b < m; ++b) sub(a, b) = cov(live[a], live[b]);
  const Matrix root = gaussian_root(sub);
  Rng rng = make_rng(seed, 3);
  const Matrix draws = root * standard_normal(rng, m, count);
  for (Index a = 0; a < m; ++a) out.col(live[a]) = draws.row(a).transpose();
  return out;
}

/// Unconditional paths of a centred process with the given kernel on a grid.
inline Matrix sample_paths(const KernelSpec& kernel, const PointSet& grid, Index count, std::uint64_t seed) {
  detail::check_queries(kernel, grid, "sample_paths");
  return sample_gaussian(gram_matrix(kernel, grid), count, seed);
}

/// Draws from N(mean, cov), one per row.
inline Matrix sample_conditional(const Vector& mean, const Matrix& cov, Index count, std::uint64_t seed) {
  require_dims(mean.size() == cov.rows(), "sample_conditional: mean and covariance sizes differ");
  Matrix out = sample_gaussian(cov, count, seed);
  out.rowwise() += mean.transpose();
  return out;
}

/// Posterior paths of the full model on a grid.
inline Matrix sample_conditional(const FullModel& model, const PointSet& grid, Index count, std::uint64_t seed) {
  return sample_conditional(full_predict(model, grid).mean, full_cond_cov(model, grid), count, seed);
}

}  // namespace nestkrig
