#include <gtest/gtest.h>

#include <cmath>

#include "nestkrig/linalg.hpp"
#include "support/oracles.hpp"

using namespace nestkrig;

namespace {

Matrix mat2(double a, double b, double c, double d) {
  Matrix m(2, 2);
  m << a, b, c, d;
  return m;
}

Vector vec2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

/// SPD matrix with prescribed log-uniform eigenvalues in [lo, hi].
Matrix random_spd(oracle::Gen& gen, Index n, double lo, double hi) {
  Matrix Q = Matrix::NullaryExpr(n, n, [&] { return gen.normal(); }).householderQr().householderQ();
  Vector ev(n);
  for (Index i = 0; i < n; ++i) ev(i) = std::exp(gen.uniform(std::log(lo), std::log(hi)));
  Matrix A = Q * ev.asDiagonal() * Q.transpose();
  return 0.5 * (A + A.transpose());
}

}  // namespace

TEST(FactorSpd, IdentityNeedsNoJitter) {
  const SpdFactor f = factor_spd(Matrix::Identity(3, 3));
  EXPECT_TRUE(f.lower().isApprox(Matrix::Identity(3, 3)));
  EXPECT_EQ(f.applied_jitter(), 0.0);
}

TEST(FactorSpd, HandCholesky) {
  const SpdFactor f = factor_spd(mat2(4, 2, 2, 3));
  EXPECT_NEAR(f.lower()(0, 0), 2.0, 1e-15);
  EXPECT_NEAR(f.lower()(1, 0), 1.0, 1e-15);
  EXPECT_NEAR(f.lower()(1, 1), std::sqrt(2.0), 1e-15);
  EXPECT_EQ(f.lower()(0, 1), 0.0);
}

TEST(FactorSpd, RankOneMatrixGetsJitter) {
  const SpdFactor f = factor_spd(mat2(1, 1, 1, 1));
  EXPECT_GT(f.applied_jitter(), 0.0);
  EXPECT_GT(f.lower().diagonal().minCoeff(), 0.0);
  const Matrix expect = mat2(1, 1, 1, 1) + f.applied_jitter() * Matrix::Identity(2, 2);
  EXPECT_LT((f.reconstruct() - expect).norm() / expect.norm(), 1e-8);
}

TEST(FactorSpd, JitterScheduleStartsAtRelativeFloor) {
  // Singular 3x3 with mean diagonal 2: first inflation is 2e-12.
  Matrix A(3, 3);
  A << 2, 2, 0, 2, 2, 0, 0, 0, 2;
  const SpdFactor f = factor_spd(A);
  const double base = 1e-12 * 2.0;
  const double ratio = f.applied_jitter() / base;
  EXPECT_NEAR(std::log10(ratio), std::round(std::log10(ratio)), 1e-9);
  EXPECT_LE(ratio, 1e5 * (1 + 1e-12));
}

TEST(FactorSpd, NotFactorizableAfterEscalation) {
  try {
    factor_spd(mat2(-1, 0, 0, -1));
    FAIL() << "expected NotFactorizable";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NotFactorizable);
  }
}

TEST(FactorSpd, RejectsAsymmetricInput) {
  try {
    factor_spd(mat2(1, 0.5, 0.4, 1));
    FAIL() << "expected InvalidArgument";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidArgument);
  }
}

TEST(Solve, HandSystem) {
  const Vector x = solve(factor_spd(mat2(4, 2, 2, 3)), vec2(8, 7));
  EXPECT_NEAR(x(0), 1.25, 1e-14);
  EXPECT_NEAR(x(1), 1.5, 1e-14);
}

TEST(Solve, IdentityAndDiagonal) {
  const Vector b = vec2(3, -4);
  EXPECT_TRUE(solve(factor_spd(Matrix::Identity(2, 2)), b).isApprox(b));
  const Vector x = solve(factor_spd(mat2(2, 0, 0, 5)), vec2(2, 5));
  EXPECT_NEAR(x(0), 1.0, 1e-15);
  EXPECT_NEAR(x(1), 1.0, 1e-15);
}

TEST(Solve, DimensionMismatch) {
  const SpdFactor f = factor_spd(Matrix::Identity(3, 3));
  try {
    solve(f, Vector(Vector::Ones(2)));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DimensionMismatch);
  }
}

TEST(Solve, MultipleRightHandSides) {
  const SpdFactor f = factor_spd(mat2(4, 2, 2, 3));
  Matrix rhs(2, 2);
  rhs << 8, 4, 7, 2;
  const Matrix x = solve(f, rhs);
  EXPECT_LT((mat2(4, 2, 2, 3) * x - rhs).norm(), 1e-12);
}

TEST(Solve, RandomSpdRecoversKnownSolutions) {
  oracle::Gen gen(11);
  for (int trial = 0; trial < 40; ++trial) {
    const Index n = gen.integer(1, 50);
    const Matrix A = random_spd(gen, n, 1e-3, 1e3);
    const Vector truth = gen.vector(n);
    const SpdFactor f = factor_spd(A);
    EXPECT_EQ(f.applied_jitter(), 0.0);
    EXPECT_LT((f.reconstruct() - A).norm() / A.norm(), 1e-8);
    const Vector x = solve(f, Vector(A * truth));
    EXPECT_LT((x - truth).norm() / truth.norm(), 1e-6) << "trial " << trial << " n=" << n;
  }
}

TEST(HalfSolve, SquaredNormIsQuadraticForm) {
  const Matrix A = mat2(4, 2, 2, 3);
  const Vector b = vec2(1, -2);
  const SpdFactor f = factor_spd(A);
  EXPECT_NEAR(f.half_solve(b).squaredNorm(), b.dot(oracle::inverse(A) * b), 1e-14);
}

TEST(LogDeterminant, MatchesProductOfEigenvalues) {
  EXPECT_NEAR(factor_spd(mat2(4, 2, 2, 3)).log_determinant(), std::log(8.0), 1e-14);
}

TEST(PseudoSolve, MinimumNormOnRankOne) {
  const Vector x = pseudo_solve(mat2(1, 1, 1, 1), vec2(2, 2));
  EXPECT_NEAR(x(0), 1.0, 1e-12);
  EXPECT_NEAR(x(1), 1.0, 1e-12);
}

TEST(PseudoSolve, ZeroMatrixGivesZero) {
  EXPECT_EQ(pseudo_solve(Matrix::Zero(3, 3), Vector::Ones(3)), Vector::Zero(3));
}

TEST(PseudoSolve, AgreesWithSolveOnInvertible) {
  oracle::Gen gen(12);
  for (int trial = 0; trial < 30; ++trial) {
    const Index n = gen.integer(1, 20);
    const Matrix A = random_spd(gen, n, 1e-2, 1e2);
    const Vector b = gen.vector(n);
    const Vector x1 = pseudo_solve(A, b);
    const Vector x2 = solve(factor_spd(A), b);
    EXPECT_LT((x1 - x2).norm(), 1e-8 * std::max(1.0, x2.norm()));
  }
}

TEST(BlueWeights, CleanPathIsNotDegenerate) {
  const BlueWeights w = blue_weights(mat2(4, 2, 2, 3), vec2(8, 7));
  EXPECT_FALSE(w.degenerate);
  EXPECT_NEAR(w.weights(0), 1.25, 1e-14);
}

TEST(BlueWeights, DuplicatedPredictorFallsBackToPseudoInverse) {
  const BlueWeights w = blue_weights(mat2(1, 1, 1, 1), vec2(1, 1));
  EXPECT_TRUE(w.degenerate);
  EXPECT_NEAR(w.weights(0), 0.5, 1e-12);
  EXPECT_NEAR(w.weights(1), 0.5, 1e-12);
}
