#pragma once

// Single-output GP machinery: weighted profile likelihood, lengthscale search,
// closed-form scale estimate and the kriging posterior.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "mcgp/error.hpp"
#include "mcgp/kernel.hpp"
#include "mcgp/optim.hpp"

namespace mcgp {

struct GpOptions {
  double nugget = kDefaultNugget;
  int multistarts = 5;
  int max_evals = 200;
  double lower_factor = 1e-2;  // bounds are these factors times the design range
  double upper_factor = 1e2;
};

struct LengthscaleBounds {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
};

inline LengthscaleBounds default_bounds(const Eigen::MatrixXd& X, const GpOptions& opts = {}) {
  LengthscaleBounds b{Eigen::VectorXd(X.cols()), Eigen::VectorXd(X.cols())};
  for (Eigen::Index c = 0; c < X.cols(); ++c) {
    double range = X.col(c).maxCoeff() - X.col(c).minCoeff();
    if (!(range > 0.0)) range = 1.0;
    b.lower[c] = opts.lower_factor * range;
    b.upper[c] = opts.upper_factor * range;
  }
  return b;
}

/// Per-dimension median of pairwise absolute input differences.
inline Lengthscales median_heuristic(const Eigen::MatrixXd& X) {
  Eigen::VectorXd theta(X.cols());
  for (Eigen::Index c = 0; c < X.cols(); ++c) {
    std::vector<double> diffs;
    for (Eigen::Index i = 0; i < X.rows(); ++i)
      for (Eigen::Index k = i + 1; k < X.rows(); ++k) diffs.push_back(std::abs(X(i, c) - X(k, c)));
    double med = 0.0;
    if (!diffs.empty()) {
      std::sort(diffs.begin(), diffs.end());
      const std::size_t m = diffs.size();
      med = (m % 2 == 1) ? diffs[m / 2] : 0.5 * (diffs[m / 2 - 1] + diffs[m / 2]);
    }
    theta[c] = med > 0.0 ? med : 1.0;
  }
  return Lengthscales(theta);
}

/// Sum_j w_j b_j b_j^T for outputs stored as the columns of `outputs` (n x m).
inline Eigen::MatrixXd weighted_scatter(const Eigen::MatrixXd& outputs, const Eigen::VectorXd& weights) {
  if (outputs.cols() != weights.size()) throw InvalidArgument("weighted_scatter: weight count mismatch");
  return outputs * weights.asDiagonal() * outputs.transpose();
}

/// trace(M^{-1} S) for a factorized M; equals sum_j w_j b_j^T M^{-1} b_j when S is a weighted scatter.
inline double weighted_quad_sum(const CorrelationFactorization& f, const Eigen::MatrixXd& scatter) {
  return std::max(0.0, f.solve(scatter).trace());
}

/// log|Phi| + n log(trace(Phi^{-1} S)) given the weighted scatter S.
inline double profile_nll_from_scatter(const Lengthscales& theta, const Eigen::MatrixXd& X,
                                       const Eigen::MatrixXd& scatter, double nugget = kDefaultNugget) {
  const auto f = CorrelationFactorization::factorize(corr_matrix(X, theta, nugget), nugget);
  const double q = weighted_quad_sum(f, scatter);
  if (!(q > 0.0)) throw DegenerateCluster("profile likelihood: weighted quadratic form is zero");
  return f.log_det() + static_cast<double>(X.rows()) * std::log(q);
}

/// M-step objective: log|Phi_theta| + n log sum_j w_j b_j^T Phi_theta^{-1} b_j.
/// `outputs` holds one output vector b_j per column.
inline double weighted_profile_nll(const Lengthscales& theta, const Eigen::MatrixXd& X,
                                   const Eigen::MatrixXd& outputs, const Eigen::VectorXd& weights,
                                   double nugget = kDefaultNugget) {
  if (outputs.rows() != X.rows()) throw InvalidArgument("weighted_profile_nll: output length != design size");
  if ((weights.array() < 0.0).any()) throw InvalidArgument("weighted_profile_nll: negative weight");
  if (!(weights.sum() > 0.0)) throw DegenerateCluster("weighted_profile_nll: all weights are zero");
  return profile_nll_from_scatter(theta, X, weighted_scatter(outputs, weights), nugget);
}

/// Expected negative log-likelihood per unit weight with tau^2 profiled out
/// subject to tau^2 >= floor. Up to an additive constant this equals the
/// profile objective whenever the floor is inactive.
inline double floored_profile_objective(const Lengthscales& theta, const Eigen::MatrixXd& X,
                                        const Eigen::MatrixXd& scatter, double total_weight,
                                        double tau_sq_floor, double nugget = kDefaultNugget) {
  const auto f = CorrelationFactorization::factorize(corr_matrix(X, theta, nugget), nugget);
  const double n = static_cast<double>(X.rows());
  const double q = weighted_quad_sum(f, scatter);
  const double tau_sq = std::max(q / (n * total_weight), tau_sq_floor);
  return f.log_det() + n * std::log(tau_sq) + q / (total_weight * tau_sq);
}

/// Multistart bounded simplex search over log(theta). The first start is
/// `init`; the others are drawn uniformly in log-bounds from a generator
/// seeded with `seed`. Never returns a point worse than `init`.
inline Lengthscales minimize_over_lengthscales(const std::function<double(const Lengthscales&)>& objective,
                                               const Lengthscales& init, const LengthscaleBounds& bounds,
                                               const GpOptions& opts, std::uint64_t seed) {
  const Eigen::Index p = init.size();
  if (bounds.lower.size() != p || bounds.upper.size() != p)
    throw InvalidArgument("optimize_theta: bounds dimension mismatch");
  const Eigen::VectorXd lo = bounds.lower.array().log();
  const Eigen::VectorXd hi = bounds.upper.array().log();
  if (!((bounds.lower.array() > 0.0).all() && (lo.array() <= hi.array()).all()))
    throw InvalidArgument("optimize_theta: bounds must be positive and ordered");

  auto in_log = [&](const Eigen::VectorXd& z) {
    try {
      return objective(Lengthscales(z.array().exp().matrix()));
    } catch (const NumericalDegeneracy&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  const Eigen::VectorXd z0 = init.values().array().log().matrix().cwiseMax(lo).cwiseMin(hi);
  Eigen::VectorXd best_z = init.values().array().log();
  double best_value = in_log(best_z);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  SimplexOptions sopts;
  sopts.max_evals = opts.max_evals;
  for (int start = 0; start < std::max(1, opts.multistarts); ++start) {
    Eigen::VectorXd z = z0;
    if (start > 0)
      for (Eigen::Index i = 0; i < p; ++i) z[i] = lo[i] + unit(rng) * (hi[i] - lo[i]);
    const SimplexResult r = nelder_mead(in_log, z, lo, hi, sopts);
    if (r.value < best_value) {
      best_value = r.value;
      best_z = r.x;
    }
  }
  return Lengthscales(best_z.array().exp().matrix());
}

inline Lengthscales optimize_theta(const Eigen::MatrixXd& X, const Eigen::MatrixXd& outputs,
                                   const Eigen::VectorXd& weights, const Lengthscales& init,
                                   const LengthscaleBounds& bounds, const GpOptions& opts = {},
                                   std::uint64_t seed = 0) {
  if (!(weights.sum() > 0.0)) throw DegenerateCluster("optimize_theta: all weights are zero");
  const Eigen::MatrixXd scatter = weighted_scatter(outputs, weights);
  return minimize_over_lengthscales(
      [&](const Lengthscales& th) { return profile_nll_from_scatter(th, X, scatter, opts.nugget); }, init,
      bounds, opts, seed);
}

/// (sum_j w_j b_j^T Phi^{-1} b_j) / (n sum_j w_j).
inline double tau_sq_closed_form(const Eigen::MatrixXd& X, const Lengthscales& theta,
                                 const Eigen::MatrixXd& outputs, const Eigen::VectorXd& weights,
                                 double nugget = kDefaultNugget) {
  const double w = weights.sum();
  if (!(w > 0.0)) throw DegenerateCluster("tau_sq_closed_form: all weights are zero");
  const auto f = CorrelationFactorization::factorize(corr_matrix(X, theta, nugget), nugget);
  return weighted_quad_sum(f, weighted_scatter(outputs, weights)) / (static_cast<double>(X.rows()) * w);
}

/// Frozen single-output GP: hyperparameters plus the factorized correlation matrix.
struct GpFit {
  Lengthscales theta;
  double tau_sq = 0.0;
  CorrelationFactorization factorization;
  Eigen::MatrixXd design;

  static GpFit build(const Eigen::MatrixXd& X, const Lengthscales& theta, double tau_sq,
                     double nugget = kDefaultNugget) {
    if (!(tau_sq >= 0.0) || !std::isfinite(tau_sq)) throw InvalidArgument("GpFit: tau_sq must be >= 0");
    return GpFit{theta, tau_sq, CorrelationFactorization::factorize(corr_matrix(X, theta, nugget), nugget), X};
  }
};

struct GaussianMoments {
  double mean = 0.0;
  double variance = 0.0;
};

/// Kriging variance factor 1 - Phi(x,X) Phi^{-1} Phi(x,X)^T, clamped at zero.
inline double kriging_variance_factor(const CorrelationFactorization& f, const Eigen::VectorXd& phi) {
  return std::max(0.0, 1.0 - f.quad_form(phi));
}

inline GaussianMoments gp_posterior(const GpFit& fit, const Eigen::VectorXd& b, const Eigen::VectorXd& x_new) {
  if (b.size() != fit.design.rows()) throw InvalidArgument("gp_posterior: output length != design size");
  const Eigen::VectorXd phi = cross_corr(fit.design, x_new, fit.theta);
  const Eigen::VectorXd weights = fit.factorization.solve(b);
  return {phi.dot(weights), fit.tau_sq * kriging_variance_factor(fit.factorization, phi)};
}

/// Profile-likelihood fit of one output vector (theta by search, tau^2 closed form).
inline GpFit fit_single_gp(const Eigen::MatrixXd& X, const Eigen::VectorXd& b, const GpOptions& opts = {},
                           std::uint64_t seed = 0) {
  const Eigen::VectorXd w = Eigen::VectorXd::Ones(1);
  const Eigen::MatrixXd outputs = b;
  const Lengthscales theta = optimize_theta(X, outputs, w, median_heuristic(X), default_bounds(X, opts), opts, seed);
  return GpFit::build(X, theta, tau_sq_closed_form(X, theta, outputs, w, opts.nugget), opts.nugget);
}

}  // namespace mcgp
