#pragma once

// Expert-fusion rules from the distributed-GP literature, in their Gaussian
// closed forms: precision-weighted means with method-specific precisions.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>

#include "nestkrig/errors.hpp"
#include "nestkrig/linalg.hpp"

namespace nestkrig {

enum class Method { Nested, Full, PoE, GPoE1, GPoE2, BCM, RBCM, SPV };

inline std::string_view to_string(Method m) {
  switch (m) {
    case Method::Nested: return "nested";
    case Method::Full: return "full";
    case Method::PoE: return "poe";
    case Method::GPoE1: return "gpoe1";
    case Method::GPoE2: return "gpoe2";
    case Method::BCM: return "bcm";
    case Method::RBCM: return "rbcm";
    case Method::SPV: return "spv";
  }
  return "unknown";
}

inline std::optional<Method> parse_method(std::string_view name) {
  for (Method m : {Method::Nested, Method::Full, Method::PoE, Method::GPoE1, Method::GPoE2, Method::BCM,
                   Method::RBCM, Method::SPV})
    if (to_string(m) == name) return m;
  return std::nullopt;
}

struct BaselineResult {
  double mean = 0.0;
  double variance = 0.0;
  Vector beta;              ///< per-expert weights, empty when unused
  bool degenerate = false;  ///< an interpolating expert was returned, or the precision was clamped
  bool all_zero_weights = false;
};

enum class GpoeWeighting { Uniform, DifferentialEntropy };

namespace detail {

inline void check_experts(const Vector& M, const Vector& V) {
  require_dims(M.size() == V.size() && M.size() > 0,
               "baseline: " + std::to_string(M.size()) + " means and " + std::to_string(V.size()) + " variances");
}

/// An expert with (numerically) zero variance interpolates the data; it is
/// returned as is rather than entering a precision sum with 1/0.
inline std::optional<BaselineResult> interpolating_expert(const Vector& M, const Vector& V, double scale) {
  Index best;
  const double vmin = V.minCoeff(&best);
  if (vmin > 1e-12 * scale) return std::nullopt;
  BaselineResult r;
  r.mean = M(best);
  r.variance = std::max(0.0, vmin);
  r.degenerate = true;
  return r;
}

inline BaselineResult precision_weighted(const Vector& M, const Vector& V, const Vector& beta, double extra_precision,
                                         double prior_var) {
  double tau = extra_precision;
  double num = 0.0;
  for (Index i = 0; i < M.size(); ++i) {
    tau += beta(i) / V(i);
    num += beta(i) * M(i) / V(i);
  }
  BaselineResult r;
  r.beta = beta;
  if (!(tau > 0.0)) {
    tau = 1e-12 / prior_var;
    r.degenerate = true;
  }
  r.variance = 1.0 / tau;
  r.mean = num / tau;
  return r;
}

inline Vector entropy_weights(const Vector& V, double prior_var) {
  Vector beta(V.size());
  for (Index i = 0; i < V.size(); ++i) beta(i) = std::max(0.0, 0.5 * (std::log(prior_var) - std::log(V(i))));
  return beta;
}

}  // namespace detail

/// Product of experts. `scale` is the process variance used by the
/// interpolating-expert guard.
inline BaselineResult poe(const Vector& M, const Vector& V, double scale = 1.0) {
  detail::check_experts(M, V);
  if (auto r = detail::interpolating_expert(M, V, scale)) return *r;
  return detail::precision_weighted(M, V, Vector::Ones(M.size()), 0.0, scale);
}

/// Generalised product of experts.
inline BaselineResult gpoe(const Vector& M, const Vector& V, double prior_var, GpoeWeighting weighting) {
  detail::check_experts(M, V);
  if (!(prior_var > 0.0)) fail(ErrorKind::InvalidArgument, "gpoe: prior variance must be positive");
  if (auto r = detail::interpolating_expert(M, V, prior_var)) return *r;
  const Vector beta = weighting == GpoeWeighting::Uniform ? Vector::Constant(M.size(), 1.0 / double(M.size()))
                                                          : detail::entropy_weights(V, prior_var);
  if (beta.maxCoeff() <= 0.0) {
    BaselineResult r;
    r.mean = 0.0;
    r.variance = prior_var;
    r.beta = beta;
    r.all_zero_weights = true;
    return r;
  }
  return detail::precision_weighted(M, V, beta, 0.0, prior_var);
}

/// Bayesian committee machine.
inline BaselineResult bcm(const Vector& M, const Vector& V, double prior_var) {
  detail::check_experts(M, V);
  if (!(prior_var > 0.0)) fail(ErrorKind::InvalidArgument, "bcm: prior variance must be positive");
  if (auto r = detail::interpolating_expert(M, V, prior_var)) return *r;
  const double p = double(M.size());
  return detail::precision_weighted(M, V, Vector::Ones(M.size()), -(p - 1.0) / prior_var, prior_var);
}

/// Robust Bayesian committee machine with differential-entropy weights, or
/// with caller-supplied weights when `beta` is given.
inline BaselineResult rbcm(const Vector& M, const Vector& V, double prior_var,
                           const std::optional<Vector>& beta = std::nullopt) {
  detail::check_experts(M, V);
  if (!(prior_var > 0.0)) fail(ErrorKind::InvalidArgument, "rbcm: prior variance must be positive");
  if (beta) require_dims(beta->size() == M.size(), "rbcm: weight count");
  if (auto r = detail::interpolating_expert(M, V, prior_var)) return *r;
  const Vector b = beta ? *beta : detail::entropy_weights(V, prior_var);
  return detail::precision_weighted(M, V, b, (1.0 - b.sum()) / prior_var, prior_var);
}

/// Expert with the smallest variance; ties go to the lowest index.
inline BaselineResult spv(const Vector& M, const Vector& V) {
  detail::check_experts(M, V);
  Index best = 0;
  for (Index i = 1; i < V.size(); ++i)
    if (V(i) < V(best)) best = i;
  BaselineResult r;
  r.mean = M(best);
  r.variance = V(best);
  return r;
}

}  // namespace nestkrig
