#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace semcom;

namespace {

DiscreteJoint all_equal_binary() {
  DiscreteJoint j(2, 2, 2);
  j.at(0, 0, 0) = 0.5;
  j.at(1, 1, 1) = 0.5;
  return j;
}

// Independent oracle: I(X;Y) from a 2-D table by the textbook formula.
double mi_2d(const std::vector<std::vector<double>>& pxy) {
  std::vector<double> px(pxy.size(), 0.0), py(pxy[0].size(), 0.0);
  for (std::size_t i = 0; i < pxy.size(); ++i)
    for (std::size_t k = 0; k < pxy[i].size(); ++k) {
      px[i] += pxy[i][k];
      py[k] += pxy[i][k];
    }
  double s = 0;
  for (std::size_t i = 0; i < pxy.size(); ++i)
    for (std::size_t k = 0; k < pxy[i].size(); ++k)
      if (pxy[i][k] > 0) s += pxy[i][k] * std::log2(pxy[i][k] / (px[i] * py[k]));
  return s;
}

}  // namespace

TEST(MiQuery, IdenticalBinaryVariables) {
  const auto j = all_equal_binary();
  EXPECT_NEAR(mi_query(j, MiExpr::z1_y), 1.0, 1e-15);
  EXPECT_NEAR(mi_query(j, MiExpr::z1_y_given_z2), 0.0, 1e-15);
  EXPECT_NEAR(mi_query(j, MiExpr::interaction), 1.0, 1e-15);
  EXPECT_NEAR(mi_query(j, MiExpr::joint_y), 1.0, 1e-15);
}

TEST(MiQuery, XorHasNegativeInteraction) {
  const auto j = xor_joint();
  EXPECT_EQ(mi_query(j, MiExpr::z1_y), 0.0);
  EXPECT_EQ(mi_query(j, MiExpr::z1_y_given_z2), 1.0);
  EXPECT_EQ(mi_query(j, MiExpr::interaction), -1.0);
  EXPECT_EQ(mi_query(j, MiExpr::joint_y), 1.0);
  EXPECT_TRUE(verify_decomposition(j).pass);
}

TEST(MiQuery, IndependentFirstVariable) {
  // p(a,b,y) = p(a)·p(b,y)
  const std::vector<double> pa{0.3, 0.7};
  const std::vector<std::vector<double>> pby{{0.1, 0.2, 0.05}, {0.15, 0.3, 0.2}};
  DiscreteJoint j(2, 2, 3);
  for (std::size_t a = 0; a < 2; ++a)
    for (std::size_t b = 0; b < 2; ++b)
      for (std::size_t y = 0; y < 3; ++y) j.at(a, b, y) = pa[a] * pby[b][y];
  EXPECT_NEAR(mi_query(j, MiExpr::z1_y), 0.0, 1e-15);
  EXPECT_NEAR(mi_query(j, MiExpr::z1_y_given_z2), 0.0, 1e-15);
  EXPECT_NEAR(mi_query(j, MiExpr::z2_y), mi_2d(pby), 1e-14);
}

TEST(MiQuery, MatchesTwoDimensionalOracle) {
  Rng rng = make_rng(3, 3);
  for (int t = 0; t < 20; ++t) {
    const auto j = random_joint(rng);
    std::vector<std::vector<double>> p1y(j.a1, std::vector<double>(j.ay, 0.0));
    std::vector<std::vector<double>> p12y(j.a1 * j.a2, std::vector<double>(j.ay, 0.0));
    for (std::size_t a = 0; a < j.a1; ++a)
      for (std::size_t b = 0; b < j.a2; ++b)
        for (std::size_t y = 0; y < j.ay; ++y) {
          p1y[a][y] += j.at(a, b, y);
          p12y[a * j.a2 + b][y] = j.at(a, b, y);
        }
    EXPECT_NEAR(mi_query(j, MiExpr::z1_y), mi_2d(p1y), 1e-13);
    EXPECT_NEAR(mi_query(j, MiExpr::joint_y), mi_2d(p12y), 1e-13);
  }
}

TEST(MiQuery, ChainRuleAndNonNegativity) {
  Rng rng = make_rng(4, 4);
  for (int t = 0; t < 100; ++t) {
    const auto j = random_joint(rng);
    const double i1 = mi_query(j, MiExpr::z1_y);
    const double i2g1 = mi_query(j, MiExpr::z2_y_given_z1);
    EXPECT_NEAR(mi_query(j, MiExpr::joint_y), i1 + i2g1, 1e-12);
    for (auto e : {MiExpr::z1_y, MiExpr::z2_y, MiExpr::z1_y_given_z2, MiExpr::z2_y_given_z1, MiExpr::joint_y})
      EXPECT_GE(mi_query(j, e), -1e-15);
  }
}

TEST(Decomposition, RandomJointsPass) {
  const auto r = mi_identity_suite(100, 9);
  EXPECT_EQ(r.joints, 101u);
  EXPECT_LE(r.max_residual, 1e-12);
  EXPECT_TRUE(r.pass);
}

TEST(DiscreteJoint, InvalidTablesRejected) {
  DiscreteJoint j(2, 2, 2);
  EXPECT_THROW(mi_query(j, MiExpr::z1_y), validation_error);  // sums to 0
  j.at(0, 0, 0) = 1.5;
  j.at(1, 1, 1) = -0.5;
  EXPECT_THROW(j.validate(), validation_error);
  DiscreteJoint empty;
  EXPECT_THROW(empty.validate(), validation_error);
}

TEST(LabelEntropy, UniformClasses) {
  DiscreteJoint j(1, 1, 8);
  for (std::size_t y = 0; y < 8; ++y) j.at(0, 0, y) = 0.125;
  EXPECT_NEAR(label_entropy(j), 3.0, 1e-15);
}

TEST(BinFeatures, ConstantFeaturesCarryNothing) {
  const std::size_t n = 400;
  Matrix z(n, 2, 3.0);
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<int>(i % 4);
  const auto j = bin_features(z, z, y, 4, 1);
  EXPECT_NEAR(mi_query(j, MiExpr::z1_y), 0.0, 1e-12);
}

TEST(BinFeatures, CopiedLabelsRecoverLabelEntropy) {
  const std::size_t n = 1000;
  Matrix z1(n, 1), z2(n, 1);
  std::vector<int> y(n);
  Rng rng = make_rng(5, 5);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = static_cast<int>(rng() % 4);
    z1(i, 0) = y[i];
    z2(i, 0) = uniform01(rng);
  }
  const auto j = bin_features(z1, z2, y, 8, 1);
  EXPECT_NEAR(mi_query(j, MiExpr::z1_y), label_entropy(j), 1e-12);
  EXPECT_GT(label_entropy(j), 1.9);
}

TEST(BinFeatures, EstimateImprovesWithMoreSamples) {
  // Source: y uniform over 2, z1 = y with prob 0.8 else flipped, z2 independent.
  // Exact I(Z1;Y) = 1 − H_b(0.2).
  const double exact = 1.0 + 0.2 * std::log2(0.2) + 0.8 * std::log2(0.8);
  auto error_at = [&](std::size_t n) {
    double total = 0;
    for (std::uint64_t rep = 0; rep < 20; ++rep) {
      Rng rng = make_rng(100 + rep, n);
      Matrix z1(n, 1), z2(n, 1);
      std::vector<int> y(n);
      for (std::size_t i = 0; i < n; ++i) {
        y[i] = static_cast<int>(rng() % 2);
        z1(i, 0) = uniform01(rng) < 0.8 ? y[i] : 1 - y[i];
        z2(i, 0) = static_cast<double>(rng() % 2);
      }
      total += std::abs(mi_query(bin_features(z1, z2, y, 2, 1), MiExpr::z1_y) - exact);
    }
    return total / 20.0;
  };
  const double small = error_at(200), large = error_at(3200);
  EXPECT_LT(large, small);
}

TEST(BinFeatures, WarnsWhenUndersampledAndValidatesInput) {
  Matrix z(20, 2);
  std::vector<int> y(20, 0);
  z(1, 0) = 1.0;
  const auto j = bin_features(z, z, y, 4, 2);
  EXPECT_FALSE(j.warnings.empty());
  EXPECT_THROW(bin_features(z, z, y, 1, 1), validation_error);
  EXPECT_THROW(bin_features(z, z, y, 4, 3), validation_error);
  std::vector<int> short_y(10, 0);
  EXPECT_THROW(bin_features(z, z, short_y, 4, 1), dimension_error);
}
