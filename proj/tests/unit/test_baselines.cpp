#include <gtest/gtest.h>

#include <cmath>

#include "nestkrig/predictors.hpp"
#include "support/oracles.hpp"

using namespace nestkrig;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

}  // namespace

TEST(PoE, SingleExpert) {
  const BaselineResult r = poe(vec({0.3}), vec({0.2}));
  EXPECT_NEAR(r.mean, 0.3, 1e-15);
  EXPECT_NEAR(r.variance, 0.2, 1e-15);
}

TEST(PoE, TwoExpertsHandValue) {
  const BaselineResult r = poe(vec({0, 2}), vec({1, 1}));
  EXPECT_NEAR(r.mean, 1.0, 1e-15);
  EXPECT_NEAR(r.variance, 0.5, 1e-15);
}

TEST(PoE, IdenticalExpertsShrinkVariance) {
  const BaselineResult r = poe(Vector::Constant(5, 0.4), Vector::Constant(5, 0.3));
  EXPECT_NEAR(r.mean, 0.4, 1e-15);
  EXPECT_NEAR(r.variance, 0.3 / 5, 1e-15);
}

TEST(PoE, InterpolatingExpertWins) {
  const BaselineResult r = poe(vec({1.0, 5.0}), vec({0.5, 0.0}));
  EXPECT_EQ(r.mean, 5.0);
  EXPECT_EQ(r.variance, 0.0);
  EXPECT_TRUE(r.degenerate);
}

TEST(PoE, DimensionMismatch) {
  try {
    poe(vec({1.0}), vec({1.0, 2.0}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DimensionMismatch);
  }
}

TEST(GPoE, UniformWeightsRepairIdenticalExperts) {
  const BaselineResult r = gpoe(Vector::Constant(4, -0.2), Vector::Constant(4, 0.3), 1.0, GpoeWeighting::Uniform);
  EXPECT_NEAR(r.mean, -0.2, 1e-15);
  EXPECT_NEAR(r.variance, 0.3, 1e-15);
}

TEST(GPoE, EntropyWeightsAllZeroGiveThePrior) {
  const BaselineResult r = gpoe(vec({0.5, -1}), vec({2, 2}), 2.0, GpoeWeighting::DifferentialEntropy);
  EXPECT_TRUE(r.all_zero_weights);
  EXPECT_EQ(r.mean, 0.0);
  EXPECT_EQ(r.variance, 2.0);
}

TEST(GPoE, EntropyWeightsHandValue) {
  const BaselineResult r = gpoe(vec({0, 2}), vec({0.5, 1}), 1.0, GpoeWeighting::DifferentialEntropy);
  EXPECT_NEAR(r.beta(0), 0.5 * std::log(2.0), 1e-15);
  EXPECT_EQ(r.beta(1), 0.0);
  EXPECT_NEAR(r.mean, 0.0, 1e-15);
  EXPECT_NEAR(r.variance, 0.5 / (0.5 * std::log(2.0)), 1e-14);
}

TEST(GPoE, EntropyWeightsClampAtZero) {
  const BaselineResult r = gpoe(vec({1, 2}), vec({0.5, 1.5}), 1.0, GpoeWeighting::DifferentialEntropy);
  EXPECT_EQ(r.beta(1), 0.0);
  EXPECT_NEAR(r.mean, 1.0, 1e-15);
}

TEST(GPoE, UniformSharesPoeMean) {
  oracle::Gen gen(51);
  for (int t = 0; t < 50; ++t) {
    const Index p = gen.integer(1, 8);
    Vector M = gen.vector(p), V(p);
    for (Index i = 0; i < p; ++i) V(i) = gen.uniform(0.05, 1.0);
    const BaselineResult a = poe(M, V);
    const BaselineResult b = gpoe(M, V, 1.0, GpoeWeighting::Uniform);
    EXPECT_NEAR(a.mean, b.mean, 1e-12 * (1 + std::abs(a.mean)));
    EXPECT_NEAR(b.variance, a.variance * double(p), 1e-12);
  }
}

TEST(BCM, SingleExpertAndUninformativeExperts) {
  const BaselineResult one = bcm(vec({0.7}), vec({0.4}), 1.0);
  EXPECT_NEAR(one.mean, 0.7, 1e-15);
  EXPECT_NEAR(one.variance, 0.4, 1e-15);
  const BaselineResult prior = bcm(Vector::Zero(6), Vector::Constant(6, 1.5), 1.5);
  EXPECT_NEAR(prior.mean, 0.0, 1e-15);
  EXPECT_NEAR(prior.variance, 1.5, 1e-12);
}

TEST(BCM, NonPositivePrecisionIsClampedAndFlagged) {
  // 1/0.9 * 3 - 2 < 1 ... precision 3/0.99 - 2/0.5 < 0 with prior 0.5 < expert variance.
  const BaselineResult r = bcm(Vector::Ones(3), Vector::Constant(3, 0.99), 0.5);
  EXPECT_TRUE(r.degenerate);
  EXPECT_NEAR(r.variance, 0.5 / 1e-12, 1.0);
}

TEST(RBCM, UnitWeightsEqualBcm) {
  oracle::Gen gen(52);
  for (int t = 0; t < 30; ++t) {
    const Index p = gen.integer(1, 6);
    Vector M = gen.vector(p), V(p);
    for (Index i = 0; i < p; ++i) V(i) = gen.uniform(0.05, 0.9);
    const BaselineResult a = bcm(M, V, 1.0);
    const BaselineResult b = rbcm(M, V, 1.0, Vector::Ones(p));
    EXPECT_NEAR(a.mean, b.mean, 1e-12 * (1 + std::abs(a.mean)));
    EXPECT_NEAR(a.variance, b.variance, 1e-12 * a.variance);
  }
}

TEST(RBCM, EntropyWeightsByDefault) {
  const Vector M = vec({0.2, -0.4}), V = vec({0.25, 0.5});
  const BaselineResult r = rbcm(M, V, 1.0);
  const double b1 = 0.5 * std::log(4.0), b2 = 0.5 * std::log(2.0);
  const double tau = b1 / 0.25 + b2 / 0.5 + (1 - b1 - b2);
  EXPECT_NEAR(r.variance, 1 / tau, 1e-14);
  EXPECT_NEAR(r.mean, (b1 * 0.2 / 0.25 + b2 * -0.4 / 0.5) / tau, 1e-14);
}

TEST(SPV, LowestVarianceAndTies) {
  const BaselineResult r = spv(vec({10, 20, 30}), vec({3, 1, 2}));
  EXPECT_EQ(r.mean, 20);
  EXPECT_EQ(r.variance, 1);
  EXPECT_EQ(spv(vec({10, 20}), vec({1, 1})).mean, 10);
}

TEST(Baselines, SingleExpertReducesToExpert) {
  oracle::Gen gen(53);
  for (int t = 0; t < 20; ++t) {
    const Vector M = gen.vector(1);
    const Vector V = Vector::Constant(1, gen.uniform(0.05, 0.9));
    for (const BaselineResult& r : {poe(M, V), gpoe(M, V, 1.0, GpoeWeighting::Uniform), bcm(M, V, 1.0), spv(M, V)}) {
      EXPECT_NEAR(r.mean, M(0), 1e-14);
      EXPECT_NEAR(r.variance, V(0), 1e-14);
    }
  }
}

TEST(Methods, NamesRoundTrip) {
  for (auto m : {Method::Nested, Method::Full, Method::PoE, Method::GPoE1, Method::GPoE2, Method::BCM, Method::RBCM,
                 Method::SPV})
    EXPECT_EQ(parse_method(to_string(m)), m);
  EXPECT_FALSE(parse_method("median").has_value());
}

TEST(Predictors, SpvAtDesignPointOfGroup) {
  const KernelSpec k = KernelSpec::isotropic(KernelFamily::Matern52, 1.0, 0.2);
  PointSet X(4, 1);
  X << 0.1, 0.4, 0.6, 0.9;
  const Vector y = vec({1, 2, 3, 4});
  const SubModelBank bank(k, X, y, {{0, 1}, {2, 3}});
  PointSet q(1, 1);
  q << 0.6;
  const BatchPrediction p = predict(Method::SPV, bank, AggregationTree::two_layer(2), q);
  EXPECT_NEAR(p.mean(0), 3.0, 1e-10);
  EXPECT_NEAR(p.variance(0), 0.0, 1e-10);
}

TEST(Predictors, SharedStatesMatchSingleMethodRuns) {
  oracle::Gen gen(54);
  const KernelSpec k = KernelSpec::isotropic(KernelFamily::Matern52, 1.0, 0.1);
  const PointSet X = gen.separated_points(30, 1, 0.005);
  const Vector y = gen.vector(30);
  const SubModelBank bank(k, X, y, gen.groups(30, 6));
  const AggregationTree tree = AggregationTree::two_layer(6);
  const PointSet Q = gen.points(40, 1);
  const std::vector<Method> all{Method::Nested, Method::Full, Method::PoE, Method::GPoE1,
                                Method::GPoE2,  Method::BCM,  Method::RBCM, Method::SPV};
  const auto joint = predict_methods(all, bank, tree, Q, {2, 5000});
  for (std::size_t m = 0; m < all.size(); ++m) {
    const BatchPrediction single = predict(all[m], bank, tree, Q);
    EXPECT_EQ(joint[m].mean, single.mean) << to_string(all[m]);
    EXPECT_EQ(joint[m].variance, single.variance) << to_string(all[m]);
  }
  const Prediction full = full_predict(FullModel(k, X, y), Q);
  EXPECT_LT((joint[1].mean - full.mean).norm(), 1e-12);
}

TEST(Predictors, FullModelCap) {
  oracle::Gen gen(55);
  const KernelSpec k = KernelSpec::isotropic(KernelFamily::Matern52, 1.0, 0.1);
  const PointSet X = gen.separated_points(12, 1, 0.01);
  const SubModelBank bank(k, X, gen.vector(12), gen.groups(12, 3));
  try {
    predict(Method::Full, bank, AggregationTree::two_layer(3), gen.points(2, 1), {1, 10});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::CapExceeded);
    EXPECT_NE(std::string(e.what()).find("cost"), std::string::npos);
  }
}
