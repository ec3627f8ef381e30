#include <random>

#include <gtest/gtest.h>

#include "mcgp/kernel.hpp"
#include "oracles.hpp"

using namespace mcgp;

TEST(Lengthscales, RejectsNonPositiveAndNonFinite) {
  EXPECT_THROW(Lengthscales({1.0, 0.0}), InvalidArgument);
  EXPECT_THROW(Lengthscales({-1.0}), InvalidArgument);
  EXPECT_THROW(Lengthscales({std::numeric_limits<double>::infinity()}), InvalidArgument);
  EXPECT_THROW(Lengthscales(Eigen::VectorXd()), InvalidArgument);
  EXPECT_EQ(Lengthscales({0.5, 2.0}).size(), 2);
}

TEST(Matern52, ZeroDistanceIsOne) {
  const Eigen::Vector2d x(0.3, -0.7);
  EXPECT_EQ(matern52(x, x, Lengthscales{0.1, 5.0}), 1.0);
}

TEST(Matern52, UnitScaledDistanceMatchesHighPrecisionValue) {
  // (1 + sqrt5 + 5/3) exp(-sqrt5), evaluated with 30-digit arithmetic
  const Eigen::VectorXd a = Eigen::VectorXd::Constant(1, 0.0), b = Eigen::VectorXd::Constant(1, 1.0);
  EXPECT_NEAR(matern52(a, b, Lengthscales{1.0}), 0.523994108831820310592713250761, 1e-15);
}

TEST(Matern52, SymmetricOnRandomPairs) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-3.0, 3.0), t(0.05, 4.0);
  for (int i = 0; i < 100; ++i) {
    const Eigen::Vector3d a(u(rng), u(rng), u(rng)), b(u(rng), u(rng), u(rng));
    const Lengthscales th{t(rng), t(rng), t(rng)};
    EXPECT_EQ(matern52(a, b, th), matern52(b, a, th));
    EXPECT_NEAR(matern52(a, b, th), oracle::matern52(oracle::scaled_dist(a, b, th.values())), 1e-14);
  }
}

TEST(Matern52, DimensionMismatchThrows) {
  EXPECT_THROW(matern52(Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 1), Lengthscales{1.0}), InvalidArgument);
}

TEST(CorrMatrix, SinglePoint) {
  const double g = 1.5e-8;
  const Eigen::MatrixXd M = corr_matrix(Eigen::MatrixXd::Constant(1, 1, 0.2), Lengthscales{1.0}, g);
  ASSERT_EQ(M.rows(), 1);
  EXPECT_EQ(M(0, 0), 1.0 + g);
}

TEST(CorrMatrix, DiagonalAndDenseOracle) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::MatrixXd X(6, 2);
  for (int i = 0; i < X.size(); ++i) X.data()[i] = u(rng);
  const Lengthscales th{0.4, 1.3};
  const double g = 1e-6;
  const Eigen::MatrixXd M = corr_matrix(X, th, g);
  for (int i = 0; i < 6; ++i) EXPECT_EQ(M(i, i), 1.0 + g);
  EXPECT_LT((M - oracle::corr(X, th.values(), g)).norm(), 1e-13);
  EXPECT_EQ(M, M.transpose());
}

TEST(CorrMatrix, RandomDesignIsPositiveDefinite) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::MatrixXd X(3, 1);
  for (int i = 0; i < 3; ++i) X(i, 0) = u(rng);
  const Eigen::MatrixXd M = corr_matrix(X, Lengthscales{0.7});
  EXPECT_EQ(Eigen::LLT<Eigen::MatrixXd>(M).info(), Eigen::Success);
  EXPECT_NO_THROW(CorrelationFactorization::factorize(M));
}

TEST(CorrMatrix, DuplicateRowsStillFactorize) {
  Eigen::MatrixXd X(3, 1);
  X << 0.1, 0.1, 0.5;
  EXPECT_NO_THROW(CorrelationFactorization::factorize(corr_matrix(X, Lengthscales{1.0}, 1e-8), 1e-8));
}

TEST(CorrMatrix, RejectsBadInput) {
  EXPECT_THROW(corr_matrix(Eigen::MatrixXd(0, 1), Lengthscales{1.0}), InvalidArgument);
  EXPECT_THROW(corr_matrix(Eigen::MatrixXd::Zero(2, 2), Lengthscales{1.0}), InvalidArgument);
  EXPECT_THROW(corr_matrix(Eigen::MatrixXd::Zero(2, 1), Lengthscales{1.0}, 0.0), InvalidArgument);
}

TEST(Factorization, Identity) {
  const auto f = CorrelationFactorization::factorize(Eigen::MatrixXd::Identity(4, 4));
  EXPECT_EQ(f.lower(), Eigen::MatrixXd::Identity(4, 4));
  EXPECT_EQ(f.log_det(), 0.0);
}

TEST(Factorization, OneByOne) {
  const double g = 1.5e-8;
  const auto f = CorrelationFactorization::factorize(Eigen::MatrixXd::Constant(1, 1, 1.0 + g), g);
  EXPECT_NEAR(f.log_det(), std::log1p(g), 1e-16);
}

TEST(Factorization, RandomSpdReconstructionAndSolves) {
  std::mt19937_64 rng(5);
  const Eigen::MatrixXd A = oracle::random_spd(5, rng);
  const auto f = CorrelationFactorization::factorize(A);
  EXPECT_LT((f.reconstruct() - A).norm() / A.norm(), 1e-10);
  EXPECT_NEAR(f.log_det(), 2.0 * f.lower().diagonal().array().log().sum(), 1e-12);
  EXPECT_NEAR(f.log_det(), std::log(A.determinant()), 1e-10);
  const Eigen::VectorXd b = Eigen::VectorXd::LinSpaced(5, -1.0, 2.0);
  EXPECT_LT((f.solve(b) - A.inverse() * b).norm(), 1e-10);
  EXPECT_NEAR(f.quad_form(b), b.dot(A.inverse() * b), 1e-10);
}

TEST(Factorization, NonSpdReportsPivot) {
  Eigen::MatrixXd A = Eigen::MatrixXd::Identity(3, 3);
  A(2, 2) = -1.0;
  try {
    (void)CorrelationFactorization::factorize(A);
    FAIL() << "expected a degeneracy error";
  } catch (const NumericalDegeneracy& e) {
    EXPECT_EQ(e.pivot(), 2);
  }
}
