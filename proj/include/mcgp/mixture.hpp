#pragma once

// Truncated stick-breaking Dirichlet-process mixture of GPs over mesh nodes,
// fitted by variational EM. Nodes carry coordinates s_j (N x d) and output
// vectors b_j (rows of the N x n solution matrix B).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/special_functions/digamma.hpp>

#include "mcgp/error.hpp"
#include "mcgp/gp_core.hpp"
#include "mcgp/kernel.hpp"
#include "mcgp/parallel.hpp"

namespace mcgp {

namespace special {

inline double digamma(double x) { return boost::math::digamma(x); }

/// log Gamma_d(a) = d(d-1)/4 log(pi) + sum_{i=1..d} log Gamma(a + (1-i)/2).
inline double log_multigamma(double a, int d) {
  double acc = 0.25 * d * (d - 1) * std::log(std::numbers::pi);
  for (int i = 1; i <= d; ++i) acc += std::lgamma(a + 0.5 * (1 - i));
  return acc;
}

/// psi_d(a) = sum_{i=1..d} psi(a + (1-i)/2).
inline double multidigamma(double a, int d) {
  double acc = 0.0;
  for (int i = 1; i <= d; ++i) acc += digamma(a + 0.5 * (1 - i));
  return acc;
}

inline double log_beta(double a, double b) { return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b); }

}  // namespace special

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  // splitmix64 finalizer over a simple combination
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (a + 1) + 0xBF58476D1CE4E5B9ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline double spd_log_det(const Eigen::MatrixXd& M) {
  Eigen::LLT<Eigen::MatrixXd> llt(M);
  if (llt.info() != Eigen::Success) return std::numeric_limits<double>::quiet_NaN();
  return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

inline Eigen::MatrixXd spd_inverse(const Eigen::MatrixXd& M) {
  Eigen::MatrixXd inv = M.llt().solve(Eigen::MatrixXd::Identity(M.rows(), M.cols()));
  return 0.5 * (inv + inv.transpose());
}

struct HyperPriors {
  double alpha0 = 0.5;
  Eigen::VectorXd mu0;
  Eigen::MatrixXd Sigma0;  // prior precision of the cluster means
  Eigen::MatrixXd W0;      // Wishart scale
  double kappa0 = 0.0;     // Wishart degrees of freedom
  int K = 10;
  bool regularized = false;  // sample covariance needed a diagonal ridge

  [[nodiscard]] int dim() const { return static_cast<int>(mu0.size()); }

  void validate() const {
    const auto d = mu0.size();
    if (!(alpha0 > 0.0) || !std::isfinite(alpha0)) throw InvalidArgument("priors: alpha0 must be positive");
    if (K < 1) throw InvalidArgument("priors: truncation level K must be >= 1");
    if (Sigma0.rows() != d || Sigma0.cols() != d || W0.rows() != d || W0.cols() != d)
      throw InvalidArgument("priors: matrix dimensions do not match mu0");
    if (!(kappa0 >= static_cast<double>(d))) throw InvalidArgument("priors: kappa0 must be >= d");
    for (const auto* m : {&Sigma0, &W0}) {
      if (!m->isApprox(m->transpose(), 1e-12)) throw InvalidArgument("priors: matrix not symmetric");
      if (m->llt().info() != Eigen::Success) throw InvalidArgument("priors: matrix not positive definite");
    }
  }
};

/// mu0 = sample mean, Sigma0 = sample inverse covariance, kappa0 = d,
/// W0 = Sigma0 / d, alpha0 = 0.5, K = 10.
inline HyperPriors default_priors(const Eigen::MatrixXd& S) {
  const Eigen::Index N = S.rows();
  const Eigen::Index d = S.cols();
  if (d < 1 || N < d + 1) throw InvalidArgument("default_priors: need at least d+1 nodes");
  if (!S.allFinite()) throw InvalidArgument("default_priors: non-finite node coordinates");
  HyperPriors p;
  p.mu0 = S.colwise().mean().transpose();
  const Eigen::MatrixXd centered = S.rowwise() - p.mu0.transpose();
  Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(N - 1);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov, Eigen::EigenvaluesOnly);
  const double trace = cov.trace();
  if (!(eig.eigenvalues().minCoeff() > 1e-12 * std::max(trace, 1e-300))) {
    cov.diagonal().array() += 1e-8 * (trace > 0.0 ? trace : 1.0) / static_cast<double>(d);
    p.regularized = true;
  }
  p.Sigma0 = spd_inverse(cov);
  p.kappa0 = static_cast<double>(d);
  p.W0 = p.Sigma0 / static_cast<double>(d);
  p.alpha0 = 0.5;
  p.K = 10;
  return p;
}

struct VariationalState {
  Eigen::VectorXd beta_a;                       // K-1 Beta shape parameters
  Eigen::VectorXd beta_b;
  std::vector<Eigen::VectorXd> means;           // q(mu_k) means
  std::vector<Eigen::MatrixXd> precisions;      // q(mu_k) precisions
  std::vector<Eigen::MatrixXd> wishart_scales;  // q(Sigma_k) scales W_k
  Eigen::VectorXd wishart_dofs;                 // q(Sigma_k) degrees of freedom kappa_k
  Eigen::MatrixXd resp;                         // N x K responsibilities q(z_j = k)

  [[nodiscard]] int K() const { return static_cast<int>(resp.cols()); }
};

struct ClusterHyper {
  Lengthscales theta;
  double tau_sq = 0.0;
  bool active = true;
  bool degenerate = false;  // tau_sq sits at the floor (no output signal)
};

struct BetaFactors {
  Eigen::VectorXd a;
  Eigen::VectorXd b;
};

/// a_k = sum_j q_jk + 1, b_k = sum_j q(z_j > k) + alpha0 for k < K.
inline BetaFactors update_gamma(const Eigen::MatrixXd& resp, double alpha0) {
  const Eigen::Index K = resp.cols();
  const Eigen::VectorXd mass = resp.colwise().sum().transpose();
  BetaFactors out{Eigen::VectorXd(std::max<Eigen::Index>(K - 1, 0)), Eigen::VectorXd(std::max<Eigen::Index>(K - 1, 0))};
  double tail = 0.0;
  for (Eigen::Index k = K - 1; k >= 1; --k) {
    tail += mass[k];  // sum over k' > k-1
    out.a[k - 1] = mass[k - 1] + 1.0;
    out.b[k - 1] = tail + alpha0;
  }
  return out;
}

struct GaussianFactors {
  std::vector<Eigen::VectorXd> means;
  std::vector<Eigen::MatrixXd> precisions;
};

/// q(mu_k) = N(P_k^{-1}(Sigma0 mu0 + R_k1), P_k^{-1}) with P_k = Sigma0 + R_k2,
/// using E[Sigma_k] = kappa_k W_k.
inline GaussianFactors update_mu(const HyperPriors& priors, const Eigen::MatrixXd& S, const Eigen::MatrixXd& resp,
                                 const std::vector<Eigen::MatrixXd>& wishart_scales,
                                 const Eigen::VectorXd& wishart_dofs) {
  const Eigen::Index K = resp.cols();
  GaussianFactors out;
  out.means.resize(K);
  out.precisions.resize(K);
  for (Eigen::Index k = 0; k < K; ++k) {
    const double nk = resp.col(k).sum();
    if (nk == 0.0) {
      out.means[k] = priors.mu0;
      out.precisions[k] = priors.Sigma0;
      continue;
    }
    const Eigen::MatrixXd expected_precision = wishart_dofs[k] * wishart_scales[k];
    const Eigen::VectorXd weighted_sum = S.transpose() * resp.col(k);
    Eigen::MatrixXd P = priors.Sigma0 + nk * expected_precision;
    P = 0.5 * (P + P.transpose());
    out.means[k] = P.llt().solve(priors.Sigma0 * priors.mu0 + expected_precision * weighted_sum);
    out.precisions[k] = P;
  }
  return out;
}

struct WishartFactors {
  std::vector<Eigen::MatrixXd> scales;
  Eigen::VectorXd dofs;
};

/// kappa_k = kappa0 + N_k; W_k^{-1} = W0^{-1} + sum_j q_jk [(s_j-m_k)(s_j-m_k)^T + Cov(mu_k)].
inline WishartFactors update_sigma(const HyperPriors& priors, const Eigen::MatrixXd& S, const Eigen::MatrixXd& resp,
                                   const GaussianFactors& mu) {
  const Eigen::Index K = resp.cols();
  WishartFactors out{std::vector<Eigen::MatrixXd>(K), Eigen::VectorXd(K)};
  const Eigen::MatrixXd W0_inv = spd_inverse(priors.W0);
  for (Eigen::Index k = 0; k < K; ++k) {
    const double nk = resp.col(k).sum();
    out.dofs[k] = priors.kappa0 + nk;
    if (nk == 0.0) {
      out.scales[k] = priors.W0;
      continue;
    }
    const Eigen::MatrixXd centered = S.rowwise() - mu.means[k].transpose();
    Eigen::MatrixXd scatter = centered.transpose() * resp.col(k).asDiagonal() * centered;
    scatter += nk * spd_inverse(mu.precisions[k]);
    out.scales[k] = spd_inverse(W0_inv + scatter);
  }
  return out;
}

/// E_q[log pi_k]: E[log gamma_k] + sum_{i<k} E[log(1-gamma_i)], with log gamma_K = 0.
inline Eigen::VectorXd expected_log_sticks(const Eigen::VectorXd& a, const Eigen::VectorXd& b, int K) {
  Eigen::VectorXd out(K);
  double prefix = 0.0;
  for (int k = 0; k < K; ++k) {
    if (k < K - 1) {
      const double total = special::digamma(a[k] + b[k]);
      out[k] = special::digamma(a[k]) - total + prefix;
      prefix += special::digamma(b[k]) - total;
    } else {
      out[k] = prefix;
    }
  }
  return out;
}

/// Per-cluster quantities of the GP likelihood used by the E-step and the ELBO.
struct ClusterGpTerms {
  Eigen::VectorXd log_det;  // log|Phi_k|
  Eigen::VectorXd tau_sq;
  Eigen::MatrixXd quad;     // N x K, b_j^T Phi_k^{-1} b_j
};

inline ClusterGpTerms cluster_gp_terms(const Eigen::MatrixXd& B, const Eigen::MatrixXd& X,
                                       const std::vector<ClusterHyper>& hypers, double nugget) {
  const auto K = static_cast<Eigen::Index>(hypers.size());
  ClusterGpTerms t{Eigen::VectorXd(K), Eigen::VectorXd(K), Eigen::MatrixXd(B.rows(), K)};
  for (Eigen::Index k = 0; k < K; ++k) {
    const auto f = CorrelationFactorization::factorize(corr_matrix(X, hypers[k].theta, nugget), nugget);
    t.log_det[k] = f.log_det();
    t.tau_sq[k] = hypers[k].tau_sq;
    const Eigen::MatrixXd half = f.lower().triangularView<Eigen::Lower>().solve(B.transpose());
    t.quad.col(k) = half.colwise().squaredNorm().transpose();
  }
  return t;
}

/// t_jk: the Gaussian log-density of b_j under cluster k's GP (times 2).
/// `literal` reproduces the single log(tau^2) coefficient as printed in the
/// algorithm listing instead of the n log(tau^2) of the exact density.
inline double gp_log_term(const ClusterGpTerms& t, Eigen::Index j, Eigen::Index k, Eigen::Index n, bool literal) {
  const double nn = static_cast<double>(n);
  const double coef = literal ? 1.0 : nn;
  return -nn * std::log(2.0 * std::numbers::pi) - coef * std::log(t.tau_sq[k]) - t.log_det[k] -
         t.quad(j, k) / t.tau_sq[k];
}

/// E_q[log|Sigma_k|] for each cluster.
inline Eigen::VectorXd expected_log_det_precision(const VariationalState& st, int d) {
  Eigen::VectorXd out(st.K());
  for (int k = 0; k < st.K(); ++k)
    out[k] = special::multidigamma(0.5 * st.wishart_dofs[k], d) + d * std::log(2.0) +
             spd_log_det(st.wishart_scales[k]);
  return out;
}

/// s_jk: expected node-coordinate log-density under cluster k (times 2).
inline Eigen::MatrixXd node_log_terms(const VariationalState& st, const Eigen::MatrixXd& S) {
  const auto d = static_cast<int>(S.cols());
  const Eigen::Index N = S.rows();
  const int K = st.K();
  const Eigen::VectorXd elogdet = expected_log_det_precision(st, d);
  Eigen::MatrixXd out(N, K);
  for (int k = 0; k < K; ++k) {
    const double kappa = st.wishart_dofs[k];
    const Eigen::MatrixXd& W = st.wishart_scales[k];
    const double trace_term = kappa * (W * spd_inverse(st.precisions[k])).trace();
    for (Eigen::Index j = 0; j < N; ++j) {
      const Eigen::VectorXd diff = S.row(j).transpose() - st.means[k];
      const double quad = kappa * diff.dot(W * diff) + trace_term;
      out(j, k) = -d * std::log(2.0 * std::numbers::pi) + elogdet[k] - quad;
    }
  }
  return out;
}

struct ResponsibilityUpdate {
  Eigen::MatrixXd resp;
  int uniform_fallbacks = 0;  // rows whose log r_jk were all non-finite
};

/// q(z_j = k) proportional to exp(E log pi_k + (s_jk + t_jk)/2), normalized with log-sum-exp.
inline ResponsibilityUpdate update_z(const VariationalState& st, const Eigen::MatrixXd& S,
                                     const ClusterGpTerms& gp, Eigen::Index n, bool literal = false) {
  const Eigen::Index N = S.rows();
  const int K = st.K();
  const Eigen::VectorXd elog_pi = expected_log_sticks(st.beta_a, st.beta_b, K);
  const Eigen::MatrixXd s_terms = node_log_terms(st, S);
  ResponsibilityUpdate out{Eigen::MatrixXd(N, K), 0};
  Eigen::VectorXd row(K);
  for (Eigen::Index j = 0; j < N; ++j) {
    double top = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < K; ++k) {
      row[k] = elog_pi[k] + 0.5 * (s_terms(j, k) + gp_log_term(gp, j, k, n, literal));
      if (std::isnan(row[k])) row[k] = -std::numeric_limits<double>::infinity();
      top = std::max(top, row[k]);
    }
    if (!std::isfinite(top)) {
      out.resp.row(j).setConstant(1.0 / K);
      ++out.uniform_fallbacks;
      continue;
    }
    double total = 0.0;
    for (int k = 0; k < K; ++k) {
      row[k] = std::exp(row[k] - top);
      total += row[k];
    }
    out.resp.row(j) = row.transpose() / total;
  }
  return out;
}

/// Convenience overload that assembles the GP terms from the current hyperparameters.
inline ResponsibilityUpdate update_z(const VariationalState& st, const Eigen::MatrixXd& S, const Eigen::MatrixXd& B,
                                     const Eigen::MatrixXd& X, const std::vector<ClusterHyper>& hypers,
                                     double nugget = kDefaultNugget, bool literal = false) {
  return update_z(st, S, cluster_gp_terms(B, X, hypers, nugget), X.rows(), literal);
}

struct MixtureConfig {
  GpOptions gp;
  double elbo_tol = 1e-6;
  int max_iter = 200;
  std::uint64_t seed = 0;
  double active_mass = 1e-8;        // minimum total responsibility for an M-step
  double report_threshold = 1e-3;   // max_j q_jk needed to report a cluster as used
  double tau_sq_floor_ratio = 1e-12;
  bool literal_tau_exponent = false;
  int kmeans_iters = 50;
};

/// Lower bound for tau^2: ratio times the pooled mean square output.
inline double tau_sq_floor(const Eigen::MatrixXd& B, double ratio) {
  const double pooled = B.size() > 0 ? B.squaredNorm() / static_cast<double>(B.size()) : 0.0;
  return ratio * (pooled > 0.0 ? pooled : 1.0);
}

/// theta_k by multistart search on the profile objective, tau^2_k in closed form,
/// both subject to tau^2 >= floor. Clusters below `active_mass` keep `prev`.
inline std::vector<ClusterHyper> m_step(const Eigen::MatrixXd& B, const Eigen::MatrixXd& X,
                                        const Eigen::MatrixXd& resp, const std::vector<ClusterHyper>& prev,
                                        const MixtureConfig& cfg, double floor, std::uint64_t stream = 0) {
  const auto K = static_cast<std::size_t>(resp.cols());
  if (prev.size() != K) throw InvalidArgument("m_step: hyperparameter count != K");
  const LengthscaleBounds bounds = default_bounds(X, cfg.gp);
  const double n = static_cast<double>(X.rows());
  std::vector<ClusterHyper> out(prev);
  parallel_for(K, [&](std::size_t k) {
    const Eigen::VectorXd w = resp.col(static_cast<Eigen::Index>(k));
    const double total = w.sum();
    if (!(total >= cfg.active_mass)) {
      out[k].active = false;
      return;
    }
    const Eigen::MatrixXd scatter = B.transpose() * w.asDiagonal() * B;
    ClusterHyper h = prev[k];
    h.active = true;
    if (!(scatter.trace() > 0.0)) {
      h.tau_sq = floor;
      h.degenerate = true;
      out[k] = h;
      return;
    }
    h.theta = minimize_over_lengthscales(
        [&](const Lengthscales& th) {
          return floored_profile_objective(th, X, scatter, total, floor, cfg.gp.nugget);
        },
        prev[k].theta, bounds, cfg.gp, mix_seed(cfg.seed, stream, k));
    const auto f = CorrelationFactorization::factorize(corr_matrix(X, h.theta, cfg.gp.nugget), cfg.gp.nugget);
    const double raw = weighted_quad_sum(f, scatter) / (n * total);
    h.tau_sq = std::max(raw, floor);
    h.degenerate = raw < floor;
    out[k] = h;
  });
  return out;
}

struct ElboTerms {
  double A = 0.0;  // expected complete-data log joint
  double B = 0.0;  // entropy of q(gamma)
  double C = 0.0;  // entropy of q(mu)
  double D = 0.0;  // entropy of q(Sigma)
  double E = 0.0;  // entropy of q(z)
  [[nodiscard]] double total() const { return A + B + C + D + E; }
};

inline ElboTerms elbo(const VariationalState& st, const HyperPriors& priors, const Eigen::MatrixXd& S,
                      const ClusterGpTerms& gp, Eigen::Index n, bool literal = false) {
  const int K = st.K();
  const int d = static_cast<int>(S.cols());
  const Eigen::Index N = S.rows();
  const double log2pi = std::log(2.0 * std::numbers::pi);
  ElboTerms t;

  // A: data terms, stick prior, Gaussian-Wishart priors.
  const Eigen::VectorXd elog_pi = expected_log_sticks(st.beta_a, st.beta_b, K);
  const Eigen::MatrixXd s_terms = node_log_terms(st, S);
  for (Eigen::Index j = 0; j < N; ++j)
    for (int k = 0; k < K; ++k) {
      const double q = st.resp(j, k);
      if (q == 0.0) continue;
      t.A += q * (0.5 * gp_log_term(gp, j, k, n, literal) + 0.5 * s_terms(j, k) + elog_pi[k]);
    }
  for (int k = 0; k < K - 1; ++k) {
    const double elog_one_minus = special::digamma(st.beta_b[k]) - special::digamma(st.beta_a[k] + st.beta_b[k]);
    t.A += std::log(priors.alpha0) + (priors.alpha0 - 1.0) * elog_one_minus;
  }
  const double logdet_sigma0 = spd_log_det(priors.Sigma0);
  const double logdet_w0 = spd_log_det(priors.W0);
  const Eigen::MatrixXd W0_inv = spd_inverse(priors.W0);
  const Eigen::VectorXd elogdet = expected_log_det_precision(st, d);
  for (int k = 0; k < K; ++k) {
    const Eigen::VectorXd diff = st.means[k] - priors.mu0;
    const Eigen::MatrixXd cov = spd_inverse(st.precisions[k]);
    t.A += -0.5 * d * log2pi + 0.5 * logdet_sigma0 -
           0.5 * (diff.dot(priors.Sigma0 * diff) + (priors.Sigma0 * cov).trace());
    t.A += 0.5 * (priors.kappa0 - d - 1.0) * elogdet[k] -
           0.5 * st.wishart_dofs[k] * (W0_inv * st.wishart_scales[k]).trace() -
           0.5 * priors.kappa0 * d * std::log(2.0) - 0.5 * priors.kappa0 * logdet_w0 -
           special::log_multigamma(0.5 * priors.kappa0, d);
  }

  // B: Beta entropies.
  for (int k = 0; k < K - 1; ++k) {
    const double a = st.beta_a[k];
    const double b = st.beta_b[k];
    t.B += special::log_beta(a, b) - (a - 1.0) * special::digamma(a) - (b - 1.0) * special::digamma(b) +
           (a + b - 2.0) * special::digamma(a + b);
  }
  // C: Gaussian entropies.
  for (int k = 0; k < K; ++k) t.C += 0.5 * (d * log2pi + d - spd_log_det(st.precisions[k]));
  // D: Wishart entropies.
  for (int k = 0; k < K; ++k) {
    const double kappa = st.wishart_dofs[k];
    t.D += 0.5 * (d + 1) * spd_log_det(st.wishart_scales[k]) + 0.5 * std::log(2.0) * d * (d + 1) +
           special::log_multigamma(0.5 * kappa, d) - 0.5 * (kappa - d - 1.0) * special::multidigamma(0.5 * kappa, d) +
           0.5 * d * kappa;
  }
  // E: categorical entropies.
  for (Eigen::Index j = 0; j < N; ++j)
    for (int k = 0; k < K; ++k) {
      const double q = st.resp(j, k);
      if (q > 0.0) t.E -= q * std::log(q);
    }

  const std::pair<const char*, double> parts[] = {{"A", t.A}, {"B", t.B}, {"C", t.C}, {"D", t.D}, {"E", t.E}};
  for (const auto& [name, value] : parts)
    if (!std::isfinite(value))
      throw NumericalDegeneracy(std::string("elbo: term ") + name + " is not finite", -1, name);
  return t;
}

inline ElboTerms elbo(const VariationalState& st, const HyperPriors& priors, const Eigen::MatrixXd& B,
                      const Eigen::MatrixXd& X, const Eigen::MatrixXd& S, const std::vector<ClusterHyper>& hypers,
                      double nugget = kDefaultNugget, bool literal = false) {
  return elbo(st, priors, S, cluster_gp_terms(B, X, hypers, nugget), X.rows(), literal);
}

/// Seeded k-means++ on node coordinates, then Lloyd iterations; returns labels.
inline std::vector<int> kmeans_labels(const Eigen::MatrixXd& S, int K, std::uint64_t seed, int iters) {
  const Eigen::Index N = S.rows();
  std::vector<int> labels(N, 0);
  if (K <= 1 || N == 0) return labels;
  std::mt19937_64 rng(seed);
  std::vector<Eigen::VectorXd> centers;
  centers.push_back(S.row(std::uniform_int_distribution<Eigen::Index>(0, N - 1)(rng)).transpose());
  Eigen::VectorXd d2 = Eigen::VectorXd::Constant(N, std::numeric_limits<double>::infinity());
  while (static_cast<int>(centers.size()) < K) {
    for (Eigen::Index j = 0; j < N; ++j)
      d2[j] = std::min(d2[j], (S.row(j).transpose() - centers.back()).squaredNorm());
    const double total = d2.sum();
    if (!(total > 0.0)) break;  // fewer distinct points than clusters
    double target = std::uniform_real_distribution<double>(0.0, total)(rng);
    Eigen::Index pick = N - 1;
    for (Eigen::Index j = 0; j < N; ++j) {
      target -= d2[j];
      if (target <= 0.0) { pick = j; break; }
    }
    centers.push_back(S.row(pick).transpose());
  }
  const int C = static_cast<int>(centers.size());
  for (int it = 0; it < iters; ++it) {
    bool changed = false;
    for (Eigen::Index j = 0; j < N; ++j) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int c = 0; c < C; ++c) {
        const double dist = (S.row(j).transpose() - centers[c]).squaredNorm();
        if (dist < best_d) { best_d = dist; best = c; }
      }
      if (labels[j] != best) changed = true;
      labels[j] = best;
    }
    std::vector<Eigen::VectorXd> sums(C, Eigen::VectorXd::Zero(S.cols()));
    std::vector<int> counts(C, 0);
    for (Eigen::Index j = 0; j < N; ++j) {
      sums[labels[j]] += S.row(j).transpose();
      ++counts[labels[j]];
    }
    for (int c = 0; c < C; ++c)
      if (counts[c] > 0) centers[c] = sums[c] / counts[c];
    if (!changed && it > 0) break;
  }
  return labels;
}

/// k-means assignment softened to 0.9 on the assigned cluster and 0.1/(K-1) elsewhere.
inline Eigen::MatrixXd init_responsibilities(const Eigen::MatrixXd& S, int K, std::uint64_t seed, int iters = 50) {
  Eigen::MatrixXd resp(S.rows(), K);
  if (K == 1) {
    resp.setOnes();
    return resp;
  }
  const auto labels = kmeans_labels(S, K, seed, iters);
  resp.setConstant(0.1 / (K - 1));
  for (Eigen::Index j = 0; j < S.rows(); ++j) resp(j, labels[j]) = 0.9;
  return resp;
}

/// Variational factors at their priors with the given responsibilities.
inline VariationalState initial_state(const HyperPriors& priors, const Eigen::MatrixXd& resp) {
  VariationalState st;
  const int K = static_cast<int>(resp.cols());
  const BetaFactors beta = update_gamma(resp, priors.alpha0);
  st.beta_a = beta.a;
  st.beta_b = beta.b;
  st.means.assign(K, priors.mu0);
  st.precisions.assign(K, priors.Sigma0);
  st.wishart_scales.assign(K, priors.W0);
  st.wishart_dofs = Eigen::VectorXd::Constant(K, priors.kappa0);
  st.resp = resp;
  return st;
}

/// One coordinate-ascent sweep in the fixed order gamma -> mu -> Sigma -> z.
inline int e_step(VariationalState& st, const HyperPriors& priors, const Eigen::MatrixXd& S,
                  const ClusterGpTerms& gp, Eigen::Index n, bool literal) {
  const BetaFactors beta = update_gamma(st.resp, priors.alpha0);
  st.beta_a = beta.a;
  st.beta_b = beta.b;
  GaussianFactors mu = update_mu(priors, S, st.resp, st.wishart_scales, st.wishart_dofs);
  st.means = std::move(mu.means);
  st.precisions = std::move(mu.precisions);
  WishartFactors sig = update_sigma(priors, S, st.resp, GaussianFactors{st.means, st.precisions});
  st.wishart_scales = std::move(sig.scales);
  st.wishart_dofs = std::move(sig.dofs);
  ResponsibilityUpdate z = update_z(st, S, gp, n, literal);
  st.resp = std::move(z.resp);
  return z.uniform_fallbacks;
}

struct FitDiagnostics {
  std::vector<double> elbo_trace;
  std::vector<double> iteration_seconds;
  bool converged = false;
  int iterations = 0;
  int uniform_row_fallbacks = 0;
  double seconds = 0.0;
};

struct MixtureFit {
  VariationalState state;
  std::vector<ClusterHyper> hypers;
  FitDiagnostics diagnostics;
  double tau_sq_floor = 0.0;
};

inline void check_fit_inputs(const Eigen::MatrixXd& B, const Eigen::MatrixXd& X, const Eigen::MatrixXd& S) {
  if (B.rows() != S.rows()) throw InvalidArgument("fit: solution rows != node count");
  if (B.cols() != X.rows()) throw InvalidArgument("fit: solution columns != design size");
  if (B.rows() == 0 || X.rows() == 0 || X.cols() == 0 || S.cols() == 0) throw InvalidArgument("fit: empty input");
  if (!B.allFinite() || !X.allFinite() || !S.allFinite()) throw InvalidArgument("fit: non-finite input");
}

/// Variational EM until the relative ELBO change drops below cfg.elbo_tol or
/// cfg.max_iter sweeps have run.
inline MixtureFit run_variational_em(const Eigen::MatrixXd& B, const Eigen::MatrixXd& X, const Eigen::MatrixXd& S,
                                     const HyperPriors& priors, const MixtureConfig& cfg) {
  check_fit_inputs(B, X, S);
  priors.validate();
  if (priors.dim() != S.cols()) throw InvalidArgument("fit: prior dimension != node dimension");
  using clock = std::chrono::steady_clock;
  const auto start = clock::now();

  MixtureFit out;
  out.tau_sq_floor = tau_sq_floor(B, cfg.tau_sq_floor_ratio);
  const double pooled = B.squaredNorm() / static_cast<double>(B.size());
  ClusterHyper init{median_heuristic(X), std::max(pooled, out.tau_sq_floor), true, !(pooled > out.tau_sq_floor)};
  out.hypers.assign(priors.K, init);
  out.state = initial_state(priors, init_responsibilities(S, priors.K, cfg.seed, cfg.kmeans_iters));

  const Eigen::Index n = X.rows();
  ClusterGpTerms gp = cluster_gp_terms(B, X, out.hypers, cfg.gp.nugget);
  auto& diag = out.diagnostics;
  for (int it = 0; it < cfg.max_iter; ++it) {
    const auto t0 = clock::now();
    diag.uniform_row_fallbacks += e_step(out.state, priors, S, gp, n, cfg.literal_tau_exponent);
    out.hypers = m_step(B, X, out.state.resp, out.hypers, cfg, out.tau_sq_floor, static_cast<std::uint64_t>(it));
    gp = cluster_gp_terms(B, X, out.hypers, cfg.gp.nugget);
    const double value = elbo(out.state, priors, S, gp, n, cfg.literal_tau_exponent).total();
    diag.iteration_seconds.push_back(std::chrono::duration<double>(clock::now() - t0).count());
    diag.elbo_trace.push_back(value);
    diag.iterations = it + 1;
    if (diag.elbo_trace.size() >= 2) {
      const double prev = diag.elbo_trace[diag.elbo_trace.size() - 2];
      if (std::abs(value - prev) < cfg.elbo_tol * std::abs(prev)) {
        diag.converged = true;
        break;
      }
    }
  }
  diag.seconds = std::chrono::duration<double>(clock::now() - start).count();
  return out;
}

/// Clusters whose largest responsibility reaches the reporting threshold.
inline int count_used_clusters(const Eigen::MatrixXd& resp, double threshold = 1e-3) {
  int used = 0;
  for (Eigen::Index k = 0; k < resp.cols(); ++k)
    if (resp.col(k).maxCoeff() >= threshold) ++used;
  return used;
}

}  // namespace mcgp
