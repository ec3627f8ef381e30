#pragma once

// Anisotropic Matern-5/2 correlation, correlation-matrix assembly and a
// Cholesky factorization that is shared by every GP fit in the library.

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "mcgp/error.hpp"

namespace mcgp {

inline constexpr double kDefaultNugget = 1.5e-8;

/// Per-dimension lengthscales; every entry strictly positive and finite.
class Lengthscales {
 public:
  Lengthscales() = default;

  explicit Lengthscales(Eigen::VectorXd theta) : theta_(std::move(theta)) {
    if (theta_.size() == 0) throw InvalidArgument("lengthscales: empty vector");
    for (Eigen::Index i = 0; i < theta_.size(); ++i) {
      if (!std::isfinite(theta_[i]) || theta_[i] <= 0.0)
        throw InvalidArgument("lengthscales: component " + std::to_string(i) +
                              " must be positive and finite");
    }
  }

  Lengthscales(std::initializer_list<double> values)
      : Lengthscales(Eigen::Map<const Eigen::VectorXd>(values.begin(),
                                                       static_cast<Eigen::Index>(values.size()))) {}

  [[nodiscard]] const Eigen::VectorXd& values() const noexcept { return theta_; }
  [[nodiscard]] Eigen::Index size() const noexcept { return theta_.size(); }
  [[nodiscard]] double operator[](Eigen::Index i) const { return theta_[i]; }

  friend bool operator==(const Lengthscales& a, const Lengthscales& b) {
    return a.theta_.size() == b.theta_.size() && (a.theta_.array() == b.theta_.array()).all();
  }

 private:
  Eigen::VectorXd theta_;
};

/// ||x1 - x2||_theta with each dimension scaled before summation.
template <typename A, typename B>
double scaled_distance(const Eigen::MatrixBase<A>& x1, const Eigen::MatrixBase<B>& x2,
                       const Lengthscales& theta) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    const double r = (x1(i) - x2(i)) / theta[i];
    acc += r * r;
  }
  return std::sqrt(acc);
}

/// Closed form of the nu = 5/2 Matern correlation in terms of the scaled distance.
inline double matern52_of_distance(double t) {
  constexpr double sqrt5 = 2.2360679774997896964;
  const double a = sqrt5 * t;
  return (1.0 + a + (5.0 / 3.0) * t * t) * std::exp(-a);
}

template <typename A, typename B>
double matern52(const Eigen::MatrixBase<A>& x1, const Eigen::MatrixBase<B>& x2,
                const Lengthscales& theta) {
  if (x1.size() != theta.size() || x2.size() != theta.size())
    throw InvalidArgument("matern52: point dimension does not match lengthscales");
  if (!x1.allFinite() || !x2.allFinite()) throw InvalidArgument("matern52: non-finite point");
  return matern52_of_distance(scaled_distance(x1, x2, theta));
}

/// Phi(X, X) + nugget * I for an n x p design (rows are points).
inline Eigen::MatrixXd corr_matrix(const Eigen::MatrixXd& X, const Lengthscales& theta,
                                   double nugget = kDefaultNugget) {
  if (X.rows() < 1) throw InvalidArgument("corr_matrix: empty design");
  if (X.cols() != theta.size()) throw InvalidArgument("corr_matrix: design/lengthscale mismatch");
  if (!(nugget > 0.0) || !std::isfinite(nugget)) throw InvalidArgument("corr_matrix: nugget must be positive");
  if (!X.allFinite()) throw InvalidArgument("corr_matrix: non-finite design");
  const Eigen::Index n = X.rows();
  Eigen::MatrixXd M(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    M(i, i) = 1.0 + nugget;
    for (Eigen::Index k = i + 1; k < n; ++k) {
      const double c = matern52_of_distance(scaled_distance(X.row(i), X.row(k), theta));
      M(i, k) = c;
      M(k, i) = c;
    }
  }
  return M;
}

/// Phi(x, X_n) as a length-n column vector.
template <typename A>
Eigen::VectorXd cross_corr(const Eigen::MatrixXd& X, const Eigen::MatrixBase<A>& x,
                           const Lengthscales& theta) {
  if (x.size() != X.cols()) throw InvalidArgument("cross_corr: query dimension mismatch");
  if (!x.allFinite()) throw InvalidArgument("cross_corr: non-finite query point");
  Eigen::VectorXd out(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    out[i] = matern52_of_distance(scaled_distance(X.row(i), x, theta));
  return out;
}

/// Lower Cholesky factor of an SPD matrix together with its log-determinant.
class CorrelationFactorization {
 public:
  CorrelationFactorization() = default;

  /// Factorizes M (nugget already applied). `nugget` is carried for bookkeeping.
  static CorrelationFactorization factorize(const Eigen::MatrixXd& M, double nugget = kDefaultNugget) {
    if (M.rows() != M.cols()) throw InvalidArgument("factorize: matrix is not square");
    const Eigen::Index n = M.rows();
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
      double diag = M(j, j);
      for (Eigen::Index k = 0; k < j; ++k) diag -= L(j, k) * L(j, k);
      if (!(diag > 0.0) || !std::isfinite(diag))
        throw NumericalDegeneracy("factorize: matrix not positive definite at pivot " + std::to_string(j), j);
      const double ljj = std::sqrt(diag);
      L(j, j) = ljj;
      for (Eigen::Index i = j + 1; i < n; ++i) {
        double v = M(i, j);
        for (Eigen::Index k = 0; k < j; ++k) v -= L(i, k) * L(j, k);
        L(i, j) = v / ljj;
      }
    }
    CorrelationFactorization f;
    f.log_det_ = 2.0 * L.diagonal().array().log().sum();
    f.lower_ = std::move(L);
    f.nugget_ = nugget;
    return f;
  }

  [[nodiscard]] Eigen::Index dim() const noexcept { return lower_.rows(); }
  [[nodiscard]] const Eigen::MatrixXd& lower() const noexcept { return lower_; }
  [[nodiscard]] double log_det() const noexcept { return log_det_; }
  [[nodiscard]] double nugget() const noexcept { return nugget_; }

  /// M^{-1} rhs, column-wise.
  template <typename A>
  [[nodiscard]] Eigen::MatrixXd solve(const Eigen::MatrixBase<A>& rhs) const {
    Eigen::MatrixXd y = lower_.triangularView<Eigen::Lower>().solve(rhs);
    return lower_.transpose().triangularView<Eigen::Upper>().solve(y);
  }

  /// L^{-1} v (half solve).
  template <typename A>
  [[nodiscard]] Eigen::VectorXd half_solve(const Eigen::MatrixBase<A>& v) const {
    return lower_.triangularView<Eigen::Lower>().solve(v);
  }

  /// v^T M^{-1} v, always >= 0.
  template <typename A>
  [[nodiscard]] double quad_form(const Eigen::MatrixBase<A>& v) const {
    return half_solve(v).squaredNorm();
  }

  [[nodiscard]] Eigen::MatrixXd reconstruct() const { return lower_ * lower_.transpose(); }

 private:
  Eigen::MatrixXd lower_;
  double log_det_ = 0.0;
  double nugget_ = kDefaultNugget;
};

}  // namespace mcgp
