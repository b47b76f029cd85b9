#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace semcom;
using semcom::test::random_matrix;

TEST(GradCheck, QuadraticFormPasses) {
  auto rep = grad_check([](Graph&, Var x) { return matmul(x, transpose(x)); }, Matrix::from_rows({{1, 1}}), 1e-5,
                        1e-4);
  EXPECT_TRUE(rep.pass);
  EXPECT_LT(rep.max_rel_err, 1e-8);
}

TEST(GradCheck, IntraLossOnRandomBatchPasses) {
  const Matrix z_aug = random_matrix(8, 4, 2);
  auto rep = grad_check(
      [&](Graph& g, Var z) { return intra_loss(intra_corr(z, g.constant(z_aug)), 5e-3); }, random_matrix(8, 4, 1),
      1e-5, 1e-4);
  EXPECT_TRUE(rep.pass) << rep.max_rel_err;
}

TEST(GradCheck, CorruptedGradientFails) {
  auto value = [](const Matrix& x) {
    double s = 0.0;
    for (double v : x.values()) s += v * v * v;
    return s;
  };
  auto corrupted = [](const Matrix& x) {
    Matrix g = x;
    for (double& v : g.values()) v = 1.1 * 3.0 * v * v;
    return g;
  };
  auto rep = grad_check(value, corrupted, random_matrix(3, 3, 5), 1e-5, 1e-4);
  EXPECT_FALSE(rep.aborted);
  EXPECT_FALSE(rep.pass);
  EXPECT_NEAR(rep.max_rel_err, 0.1 / 1.1, 1e-3);
}

TEST(GradCheck, NonDeterministicFunctionAborts) {
  int calls = 0;
  auto value = [&](const Matrix& x) { return x[0] + 1e-3 * ++calls; };
  auto grad = [](const Matrix& x) { return Matrix(x.rows(), x.cols(), 1.0); };
  auto rep = grad_check(value, grad, Matrix(1, 1, 0.5), 1e-5, 1e-4);
  EXPECT_TRUE(rep.aborted);
  EXPECT_FALSE(rep.pass);
  EXPECT_FALSE(rep.diagnostic.empty());
}

TEST(GradCheck, LossSuiteAllPass) {
  for (const auto& [name, rep] : loss_gradient_suite(3)) {
    EXPECT_TRUE(rep.pass) << name << " max_rel_err=" << rep.max_rel_err;
    EXPECT_LE(rep.max_rel_err, 1e-4) << name;
  }
}
