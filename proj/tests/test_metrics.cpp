#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "mcgp/metrics.hpp"
#include "oracles.hpp"

using namespace mcgp;

TEST(Rmse, Basics) {
  const Eigen::MatrixXd A = Eigen::MatrixXd::Random(3, 4);
  EXPECT_EQ(rmse(A, A), 0.0);
  EXPECT_NEAR(rmse(A, A.array() + 0.25), 0.25, 1e-15);
  Eigen::MatrixXd B = A;
  B(1, 2) += 2.0;
  B(2, 0) -= 1.0;
  EXPECT_NEAR(rmse(A, B), std::sqrt(5.0 / 12.0), 1e-15);
  EXPECT_THROW(rmse(A, B.leftCols(3)), InvalidArgument);
  EXPECT_THROW(rmse(Eigen::MatrixXd(0, 0), Eigen::MatrixXd(0, 0)), InvalidArgument);
}

TEST(Rmse, PerNode) {
  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(4, 2), P = T;
  P.col(1).setConstant(3.0);
  const Eigen::VectorXd r = per_node_rmse(T, P);
  EXPECT_EQ(r[0], 0.0);
  EXPECT_NEAR(r[1], 3.0, 1e-15);
}

TEST(CrpsNormal, CentredValue) {
  const double closed = (std::numbers::sqrt2 - 1.0) / std::sqrt(std::numbers::pi);
  EXPECT_NEAR(crps_normal(0.0, 1.0, 0.0), closed, 1e-15);
  EXPECT_NEAR(crps_normal(0.0, 1.0, 0.0), oracle::crps_quadrature({1.0}, {0.0}, {1.0}, 0.0), 1e-10);
  EXPECT_NEAR(closed, 0.233694977255109, 1e-14);
}

TEST(CrpsNormal, DegenerateAndInvariances) {
  EXPECT_EQ(crps_normal(1.5, 0.0, -0.5), 2.0);
  EXPECT_THROW(crps_normal(0.0, -1.0, 0.0), InvalidArgument);
  EXPECT_NEAR(crps_normal(3.0, 0.7, 3.4), crps_normal(0.0, 0.7, 0.4), 1e-14);
  EXPECT_NEAR(crps_normal(0.0, 2.0, 1.0), 2.0 * crps_normal(0.0, 1.0, 0.5), 1e-14);
}

TEST(CrpsNormal, RandomCasesMatchQuadrature) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> m(-2.0, 2.0), s(0.05, 3.0);
  for (int t = 0; t < 20; ++t) {
    const double mu = m(rng), sd = s(rng), y = m(rng);
    EXPECT_NEAR(crps_normal(mu, sd, y), oracle::crps_quadrature({1.0}, {mu}, {sd}, y), 1e-9);
  }
}

TEST(CrpsMixture, SingleComponentReducesToNormal) {
  const Eigen::VectorXd w = Eigen::VectorXd::Ones(1);
  EXPECT_NEAR(crps_mixture(w, Eigen::VectorXd::Constant(1, 0.4), Eigen::VectorXd::Constant(1, 2.25), -0.3),
              crps_normal(0.4, 1.5, -0.3), 1e-14);
  EXPECT_NEAR(crps_mixture(w, Eigen::VectorXd::Constant(1, 0.4), Eigen::VectorXd::Zero(1), -0.3), 0.7, 1e-15);
}

TEST(CrpsMixture, IdenticalComponentsCollapse) {
  const Eigen::Vector3d w(0.2, 0.5, 0.3), mu = Eigen::Vector3d::Constant(1.1), var = Eigen::Vector3d::Constant(0.49);
  EXPECT_NEAR(crps_mixture(w, mu, var, 0.2), crps_normal(1.1, 0.7, 0.2), 1e-13);
}

TEST(CrpsMixture, ThreeComponentsMatchQuadrature) {
  const Eigen::Vector3d w(0.2, 0.5, 0.3), mu(-1.0, 0.3, 2.0), sd(0.4, 1.1, 0.2);
  for (double y : {-2.0, 0.0, 0.9, 2.1}) {
    const double q = oracle::crps_quadrature({w[0], w[1], w[2]}, {mu[0], mu[1], mu[2]}, {sd[0], sd[1], sd[2]}, y);
    EXPECT_NEAR(crps_mixture(w, mu, sd.array().square(), y), q, 1e-9);
  }
}

TEST(CrpsMixture, RejectsBadWeights) {
  const Eigen::Vector2d mu(0, 1), var(1, 1);
  EXPECT_THROW(crps_mixture(Eigen::Vector2d(0.5, 0.6), mu, var, 0.0), InvalidArgument);
  EXPECT_THROW(crps_mixture(Eigen::Vector2d(1.5, -0.5), mu, var, 0.0), InvalidArgument);
  EXPECT_THROW(crps_mixture(Eigen::Vector2d(0.5, 0.5), mu, Eigen::Vector2d(1, -1), 0.0), InvalidArgument);
}

namespace {

struct Grid {
  std::vector<double> hx, ht;
};

Grid convergence_grid() {
  Grid g;
  for (int n : {5, 10, 15, 20, 25})
    for (double h : {0.4, 0.2, 0.1, 0.05}) {
      g.hx.push_back(2.0 / (n - 1));
      g.ht.push_back(h);
    }
  return g;
}

const std::vector<int> kNu{1, 2, 3, 4, 5, 6}, kR{1, 2, 3, 4};

}  // namespace

TEST(Convergence, RecoversExactSyntheticRates) {
  const Grid g = convergence_grid();
  std::vector<double> e;
  for (std::size_t i = 0; i < g.hx.size(); ++i) e.push_back(0.05 * std::pow(g.hx[i], 3) + 0.1 * std::pow(g.ht[i], 3));
  const ConvergenceFit f = convergence_regression(g.hx, g.ht, e, kNu, kR);
  EXPECT_EQ(f.nu, 3);
  EXPECT_EQ(f.r, 2);
  EXPECT_NEAR(f.a, 0.05, 1e-10);
  EXPECT_NEAR(f.b, 0.1, 1e-10);
  EXPECT_NEAR(f.r_squared, 1.0, 1e-12);
}

TEST(Convergence, RobustToSmallNoise) {
  const Grid g = convergence_grid();
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd(0.0, 0.05);
  std::vector<double> e;
  for (std::size_t i = 0; i < g.hx.size(); ++i)
    e.push_back((0.05 * std::pow(g.hx[i], 3) + 0.1 * std::pow(g.ht[i], 3)) * (1.0 + nd(rng)));
  const ConvergenceFit f = convergence_regression(g.hx, g.ht, e, kNu, kR);
  EXPECT_EQ(f.nu, 3);
  EXPECT_EQ(f.r, 2);
}

TEST(Convergence, InputValidation) {
  const Grid g = convergence_grid();
  std::vector<double> e(g.hx.size(), 0.0);
  EXPECT_THROW(convergence_regression(g.hx, g.ht, e, kNu, kR), NumericalDegeneracy);
  e.assign(g.hx.size(), 1.0);
  EXPECT_THROW(convergence_regression(g.hx, g.ht, e, {}, kR), InvalidArgument);
  EXPECT_THROW(convergence_regression({0.1, 0.2, 0.3}, {0.1, 0.2, 0.3}, {1, 2, 3}, kNu, kR), InvalidArgument);
  e[0] = -1.0;
  EXPECT_THROW(convergence_regression(g.hx, g.ht, e, kNu, kR), InvalidArgument);
}

TEST(EvalReport, JsonFields) {
  EvalReport r;
  r.rmse = 0.5;
  r.per_node_rmse = Eigen::Vector2d(1.0, 2.0);
  const auto j = to_json(r);
  EXPECT_EQ(j.at("rmse").get<double>(), 0.5);
  EXPECT_EQ(j.at("per_node_rmse").size(), 2u);
  EXPECT_TRUE(j.contains("mean_crps"));
}
