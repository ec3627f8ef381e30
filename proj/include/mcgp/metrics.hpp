#pragma once

// RMSE, closed-form CRPS for Gaussians and Gaussian mixtures, and the
// two-rate convergence regression E = a h_X^nu + b h_T^(r+1).

#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <vector>

#include <Eigen/Dense>
#include "json.hpp"

#include "mcgp/error.hpp"

namespace mcgp {

inline double rmse(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& pred) {
  if (truth.rows() != pred.rows() || truth.cols() != pred.cols()) throw InvalidArgument("rmse: shape mismatch");
  if (truth.size() == 0) throw InvalidArgument("rmse: empty input");
  return std::sqrt((truth - pred).squaredNorm() / static_cast<double>(truth.size()));
}

inline double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }
inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

inline double crps_normal(double mu, double sigma, double y) {
  if (!(sigma >= 0.0)) throw InvalidArgument("crps_normal: sigma must be >= 0");
  if (sigma == 0.0) return std::abs(y - mu);
  const double z = (y - mu) / sigma;
  return sigma * (z * (2.0 * normal_cdf(z) - 1.0) + 2.0 * normal_pdf(z) - 1.0 / std::sqrt(std::numbers::pi));
}

/// E|Y| for Y ~ N(mu, var).
inline double abs_moment_normal(double mu, double var) {
  if (!(var > 0.0)) return std::abs(mu);
  const double s = std::sqrt(var);
  return mu * (2.0 * normal_cdf(mu / s) - 1.0) + 2.0 * s * normal_pdf(mu / s);
}

inline double crps_mixture(const Eigen::VectorXd& weights, const Eigen::VectorXd& means,
                           const Eigen::VectorXd& variances, double y) {
  const Eigen::Index K = weights.size();
  if (means.size() != K || variances.size() != K || K == 0) throw InvalidArgument("crps_mixture: size mismatch");
  if ((weights.array() < 0.0).any() || std::abs(weights.sum() - 1.0) > 1e-10)
    throw InvalidArgument("crps_mixture: weights must be nonnegative and sum to 1");
  if ((variances.array() < 0.0).any()) throw InvalidArgument("crps_mixture: negative variance");
  double first = 0.0;
  double second = 0.0;
  for (Eigen::Index i = 0; i < K; ++i) {
    if (weights[i] == 0.0) continue;
    first += weights[i] * abs_moment_normal(y - means[i], variances[i]);
    for (Eigen::Index j = 0; j < K; ++j)
      if (weights[j] != 0.0)
        second += weights[i] * weights[j] * abs_moment_normal(means[i] - means[j], variances[i] + variances[j]);
  }
  return std::max(0.0, first - 0.5 * second);
}

struct ConvergenceFit {
  double a = 0.0;
  double b = 0.0;
  int nu = 0;
  int r = 0;
  double r_squared = -std::numeric_limits<double>::infinity();
};

/// Least squares without intercept for every (nu, r) on the grids; returns
/// the pair with the highest R^2 (first one wins ties).
inline ConvergenceFit convergence_regression(const std::vector<double>& h_x, const std::vector<double>& h_t,
                                             const std::vector<double>& errors, const std::vector<int>& nu_grid,
                                             const std::vector<int>& r_grid) {
  const std::size_t m = errors.size();
  if (h_x.size() != m || h_t.size() != m) throw InvalidArgument("convergence_regression: length mismatch");
  if (m < 4) throw InvalidArgument("convergence_regression: need at least 4 grid points");
  if (nu_grid.empty() || r_grid.empty()) throw InvalidArgument("convergence_regression: empty search grid");
  for (std::size_t i = 0; i < m; ++i) {
    if (!(errors[i] >= 0.0) || !std::isfinite(errors[i]))
      throw InvalidArgument("convergence_regression: errors must be finite and nonnegative");
    if (!(h_x[i] > 0.0) || !(h_t[i] > 0.0)) throw InvalidArgument("convergence_regression: sizes must be positive");
  }
  Eigen::VectorXd y(static_cast<Eigen::Index>(m));
  for (std::size_t i = 0; i < m; ++i) y[static_cast<Eigen::Index>(i)] = errors[i];
  if (!(y.cwiseAbs().maxCoeff() > 0.0)) throw NumericalDegeneracy("convergence_regression: all errors are zero");
  const double sst = (y.array() - y.mean()).square().sum();

  ConvergenceFit best;
  for (int nu : nu_grid)
    for (int r : r_grid) {
      Eigen::MatrixXd A(static_cast<Eigen::Index>(m), 2);
      for (std::size_t i = 0; i < m; ++i) {
        A(static_cast<Eigen::Index>(i), 0) = std::pow(h_x[i], nu);
        A(static_cast<Eigen::Index>(i), 1) = std::pow(h_t[i], r + 1);
      }
      const Eigen::Vector2d coef = A.colPivHouseholderQr().solve(y);
      const double sse = (y - A * coef).squaredNorm();
      const double r2 = sst > 0.0 ? 1.0 - sse / sst : (sse == 0.0 ? 1.0 : -std::numeric_limits<double>::infinity());
      if (r2 > best.r_squared) best = {coef[0], coef[1], nu, r, r2};
    }
  return best;
}

struct EvalReport {
  double rmse = 0.0;
  double mean_crps = 0.0;
  double fit_seconds = 0.0;
  double predict_ms_per_run = 0.0;
  std::optional<Eigen::VectorXd> per_node_rmse;
};

inline nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json j{{"rmse", r.rmse},
                   {"mean_crps", r.mean_crps},
                   {"fit_seconds", r.fit_seconds},
                   {"predict_ms_per_run", r.predict_ms_per_run}};
  if (r.per_node_rmse) j["per_node_rmse"] = std::vector<double>(r.per_node_rmse->begin(), r.per_node_rmse->end());
  return j;
}

/// Column-wise RMSE over test inputs (one value per node).
inline Eigen::VectorXd per_node_rmse(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& pred) {
  if (truth.rows() != pred.rows() || truth.cols() != pred.cols()) throw InvalidArgument("rmse: shape mismatch");
  if (truth.rows() == 0) throw InvalidArgument("rmse: empty input");
  return ((truth - pred).array().square().colwise().sum() / static_cast<double>(truth.rows())).sqrt().transpose();
}

}  // namespace mcgp
