#include <random>

#include <gtest/gtest.h>

#include "mcgp/baselines.hpp"

using namespace mcgp;

namespace {

Eigen::MatrixXd design(int n) {
  Eigen::MatrixXd X(n, 1);
  for (int i = 0; i < n; ++i) X(i, 0) = -1.0 + 2.0 * i / (n - 1);
  return X;
}

Eigen::MatrixXd smooth_outputs(int N, const Eigen::MatrixXd& X, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::MatrixXd B(N, X.rows());
  for (int j = 0; j < N; ++j) {
    const double a = u(rng), b = u(rng), c = 2.0 * u(rng);
    for (Eigen::Index i = 0; i < X.rows(); ++i) B(j, i) = a * std::sin(c * X(i, 0)) + b * X(i, 0) * X(i, 0);
  }
  return B;
}

}  // namespace

TEST(Ugp, SingleNodeEqualsIgp) {
  const Eigen::MatrixXd X = design(5);
  const Eigen::MatrixXd B = smooth_outputs(1, X, 1);
  const Eigen::MatrixXd S = Eigen::MatrixXd::Zero(1, 2);
  const BaselineModel u = fit_ugp(B, X, S), i = fit_igp(B, X, S);
  EXPECT_NEAR(std::log(u.hypers()[0].theta[0]), std::log(i.hypers()[0].theta[0]), 1e-10);
  EXPECT_NEAR(u.hypers()[0].tau_sq, i.hypers()[0].tau_sq, 1e-10 * i.hypers()[0].tau_sq);
}

TEST(Ugp, IdenticalOutputsShareVariance) {
  const Eigen::MatrixXd X = design(4);
  const Eigen::MatrixXd B = smooth_outputs(1, X, 2).replicate(5, 1);
  const BaselineModel m = fit_ugp(B, X, Eigen::MatrixXd::Zero(5, 2));
  for (const auto& h : m.hypers()) EXPECT_EQ(h.tau_sq, m.hypers()[0].tau_sq);
}

TEST(Baselines, InterpolateTrainingData) {
  const Eigen::MatrixXd X = design(6);
  // jitter keeps per-node lengthscales away from the upper bound, where the nugget dominates
  const Eigen::MatrixXd B = smooth_outputs(8, X, 3) + 0.2 * Eigen::MatrixXd::Random(8, 6);
  for (auto type : {BaselineType::ugp, BaselineType::igp}) {
    const BaselineModel m = fit_baseline(type, B, X, Eigen::MatrixXd::Zero(8, 2));
    const PredictionBatch p = predict_all_nodes(m, X);
    for (int j = 0; j < 8; ++j)
      for (int i = 0; i < 6; ++i) EXPECT_NEAR(p.mean(i, j), B(j, i), 1e-5 * B.col(i).norm()) << to_string(type);
  }
}

TEST(Igp, ZeroNodeIsDegenerate) {
  const Eigen::MatrixXd X = design(4);
  Eigen::MatrixXd B = smooth_outputs(3, X, 4);
  B.row(1).setZero();
  const BaselineModel m = fit_igp(B, X, Eigen::MatrixXd::Zero(3, 2));
  EXPECT_TRUE(m.hypers()[1].degenerate);
  const GaussianMoments g = predict_node(m, 1, Eigen::VectorXd::Constant(1, 0.3));
  EXPECT_EQ(g.mean, 0.0);
  EXPECT_EQ(g.variance, 0.0);
}

TEST(Igp, IdenticalNodesGetIdenticalHyperparameters) {
  const Eigen::MatrixXd X = design(5);
  Eigen::MatrixXd B = smooth_outputs(3, X, 5);
  B.row(2) = B.row(0);
  const BaselineModel m = fit_igp(B, X, Eigen::MatrixXd::Zero(3, 2));
  EXPECT_EQ(m.hypers()[0].theta, m.hypers()[2].theta);
  EXPECT_EQ(m.hypers()[0].tau_sq, m.hypers()[2].tau_sq);
}

TEST(Igp, EachNodeMatchesStandaloneFit) {
  const Eigen::MatrixXd X = design(5);
  const Eigen::MatrixXd B = smooth_outputs(3, X, 6);
  const BaselineConfig cfg;
  const BaselineModel m = fit_igp(B, X, Eigen::MatrixXd::Zero(3, 2), cfg);
  const Eigen::VectorXd x = Eigen::VectorXd::Constant(1, 0.21);
  for (int j = 0; j < 3; ++j) {
    const Eigen::VectorXd b = B.row(j).transpose();
    const GpFit ref = fit_single_gp(X, b, cfg.gp, mix_seed(cfg.seed, 0));
    EXPECT_EQ(m.hypers()[j].theta, ref.theta);
    const GaussianMoments a = predict_node(m, j, x), r = gp_posterior(ref, b, x);
    EXPECT_NEAR(a.mean, r.mean, 1e-12);
    EXPECT_NEAR(a.variance, r.variance, 1e-12);
  }
}

TEST(Pca, RankOneDataNeedsOneComponent) {
  const Eigen::MatrixXd X = design(5);
  Eigen::VectorXd w(5), c(7);
  w << 0.3, -1.0, 0.4, 2.0, -0.5;
  c << 1.0, -2.0, 0.5, 3.0, 0.0, 1.5, -0.7;
  const Eigen::MatrixXd B = c * w.transpose();  // centered rows remain rank one
  const PcaBasis p = compute_pca(B);
  EXPECT_EQ(p.M(), 1);
  const BaselineModel m = fit_pcagp(B, X, Eigen::MatrixXd::Zero(7, 2));
  const PredictionBatch pr = predict_all_nodes(m, X);
  EXPECT_LT((pr.mean.transpose() - B).cwiseAbs().maxCoeff(), 1e-5 * B.norm());
}

TEST(Pca, FullRankReconstructionIsExact) {
  const Eigen::MatrixXd X = design(4);
  const Eigen::MatrixXd B = smooth_outputs(10, X, 7) + 0.1 * Eigen::MatrixXd::Random(10, 4);
  const PcaBasis p = compute_pca(B, 1.0);
  EXPECT_EQ(p.M(), 3);  // n - 1 after centring
  const Eigen::MatrixXd recon = (p.components * p.scores.transpose()).colwise() + p.mean_field;
  EXPECT_LT((recon - B).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Pca, RatiosMatchGramEigenvaluesAndBasisIsOrthonormal) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> nd;
  Eigen::MatrixXd B(30, 6);
  for (Eigen::Index i = 0; i < B.size(); ++i) B.data()[i] = nd(rng) * (1.0 + (i % 6));
  const PcaBasis p = compute_pca(B, 0.9);
  const Eigen::MatrixXd C = B.colwise() - B.rowwise().mean();
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(C.transpose() * C);  // n x n Gram
  Eigen::VectorXd ev = eig.eigenvalues().reverse().cwiseMax(0.0);
  ev /= ev.sum();
  for (Eigen::Index k = 0; k < 6; ++k) EXPECT_NEAR(p.all_ratios[k], ev[k], 1e-10);
  EXPECT_LT((p.components.transpose() * p.components - Eigen::MatrixXd::Identity(p.M(), p.M())).norm(), 1e-8);
  EXPECT_GE(p.explained_variance_ratios.sum(), 0.9 - 1e-12);
  EXPECT_LT(p.explained_variance_ratios.head(p.M() - 1).sum(), 0.9);
}

TEST(Pca, TrainingResidualEqualsTruncationResidual) {
  const Eigen::MatrixXd X = design(6);
  const Eigen::MatrixXd B = smooth_outputs(25, X, 9) + 0.05 * Eigen::MatrixXd::Random(25, 6);
  const BaselineModel m = fit_pcagp(B, X, Eigen::MatrixXd::Zero(25, 2));
  const PcaBasis& p = m.pca();
  ASSERT_LT(p.M(), 5);
  const Eigen::MatrixXd truncated = (p.components * p.scores.transpose()).colwise() + p.mean_field;
  const PredictionBatch pr = predict_all_nodes(m, X);
  // GP interpolation of the scores is nugget-accurate, so the only residual is the dropped components.
  EXPECT_NEAR((pr.mean.transpose() - B).norm(), (truncated - B).norm(), 1e-8);
}

TEST(Baselines, TypeNamesRoundTrip) {
  for (auto t : {BaselineType::ugp, BaselineType::igp, BaselineType::pcagp})
    EXPECT_EQ(baseline_type_from_string(to_string(t)), t);
  EXPECT_THROW(baseline_type_from_string("mcgp"), InvalidArgument);
}
