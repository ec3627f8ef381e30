#pragma once

// Comparison emulators: uGP (one shared lengthscale, per-node scale), iGP
// (independent per-node GPs) and pcaGP (truncated FPCA + iGP on the scores).

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "mcgp/emulator.hpp"
#include "mcgp/error.hpp"
#include "mcgp/gp_core.hpp"
#include "mcgp/kernel.hpp"
#include "mcgp/mixture.hpp"
#include "mcgp/parallel.hpp"

namespace mcgp {

enum class BaselineType { ugp, igp, pcagp };

inline std::string to_string(BaselineType t) {
  switch (t) {
    case BaselineType::ugp: return "ugp";
    case BaselineType::igp: return "igp";
    case BaselineType::pcagp: return "pcagp";
  }
  return "?";
}

inline BaselineType baseline_type_from_string(const std::string& s) {
  if (s == "ugp") return BaselineType::ugp;
  if (s == "igp") return BaselineType::igp;
  if (s == "pcagp") return BaselineType::pcagp;
  throw InvalidArgument("unknown baseline type '" + s + "'");
}

struct BaselineConfig {
  GpOptions gp;
  std::uint64_t seed = 0;
  double pca_threshold = 0.99;
};

/// Hyperparameters of one scalar GP output. Degenerate outputs (all zero)
/// predict 0 with variance 0.
struct OutputHyper {
  Lengthscales theta;
  double tau_sq = 0.0;
  bool degenerate = false;
};

struct PcaBasis {
  Eigen::VectorXd mean_field;                // N
  Eigen::MatrixXd components;                // N x M
  Eigen::MatrixXd scores;                    // n x M
  Eigen::VectorXd explained_variance_ratios; // M
  Eigen::VectorXd all_ratios;                // every singular direction, for inspection

  [[nodiscard]] Eigen::Index M() const { return components.cols(); }
};

/// Centered SVD of B (N x n, row j = node j); keeps the fewest leading
/// components whose cumulative explained variance reaches `threshold`.
inline PcaBasis compute_pca(const Eigen::MatrixXd& B, double threshold = 0.99) {
  if (B.cols() < 2) throw InvalidArgument("pcaGP: need at least two training inputs");
  if (!(threshold > 0.0 && threshold <= 1.0)) throw InvalidArgument("pcaGP: threshold must lie in (0, 1]");
  PcaBasis p;
  p.mean_field = B.rowwise().mean();
  const Eigen::MatrixXd centered = B.colwise() - p.mean_field;
  const Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd sq = svd.singularValues().array().square();
  const double total = sq.sum();
  Eigen::Index M = 0;
  if (total > 0.0) {
    p.all_ratios = sq / total;
    double cum = 0.0;
    while (M < sq.size()) {
      cum += p.all_ratios[M++];
      if (cum >= threshold - 1e-12) break;
    }
  } else {
    p.all_ratios = Eigen::VectorXd::Zero(sq.size());
  }
  p.components = svd.matrixU().leftCols(M);
  p.scores = centered.transpose() * p.components;
  p.explained_variance_ratios = p.all_ratios.head(M);
  return p;
}

/// A frozen baseline emulator. Every variant is a bank of independent scalar
/// GPs over the design; pcaGP maps its score GPs back to the nodes.
class BaselineModel {
 public:
  BaselineModel() = default;

  BaselineModel(BaselineType type, Eigen::MatrixXd design, Eigen::MatrixXd solutions, Eigen::MatrixXd nodes,
                std::vector<OutputHyper> hypers, double nugget, PcaBasis pca = {})
      : type_(type),
        design_(std::move(design)),
        solutions_(std::move(solutions)),
        nodes_(std::move(nodes)),
        hypers_(std::move(hypers)),
        nugget_(nugget),
        pca_(std::move(pca)) {
    if (solutions_.cols() != design_.rows() || solutions_.rows() != nodes_.rows())
      throw InvalidArgument("BaselineModel: inconsistent data shapes");
    const Eigen::Index expected = type_ == BaselineType::pcagp ? pca_.M() : solutions_.rows();
    if (static_cast<Eigen::Index>(hypers_.size()) != expected)
      throw InvalidArgument("BaselineModel: hyperparameter count does not match outputs");
    if (type_ == BaselineType::pcagp &&
        (pca_.mean_field.size() != solutions_.rows() || pca_.scores.rows() != design_.rows()))
      throw InvalidArgument("BaselineModel: PCA basis does not match data");
    build_caches();
  }

  [[nodiscard]] BaselineType type() const { return type_; }
  [[nodiscard]] const Eigen::MatrixXd& design() const { return design_; }
  [[nodiscard]] const Eigen::MatrixXd& solutions() const { return solutions_; }
  [[nodiscard]] const Eigen::MatrixXd& nodes() const { return nodes_; }
  [[nodiscard]] const std::vector<OutputHyper>& hypers() const { return hypers_; }
  [[nodiscard]] const PcaBasis& pca() const { return pca_; }
  [[nodiscard]] double nugget() const { return nugget_; }
  [[nodiscard]] Eigen::Index num_nodes() const { return solutions_.rows(); }
  [[nodiscard]] double fit_seconds() const { return fit_seconds_; }
  void set_fit_seconds(double s) { fit_seconds_ = s; }

  /// Training targets of the scalar GPs: node values, or PCA scores.
  [[nodiscard]] Eigen::MatrixXd targets() const {
    return type_ == BaselineType::pcagp ? Eigen::MatrixXd(pca_.scores.transpose()) : solutions_;
  }

  /// Per-node predictive mean and variance at one input.
  void predict(const Eigen::VectorXd& x, Eigen::Ref<Eigen::VectorXd> mean, Eigen::Ref<Eigen::VectorXd> var) const {
    if (x.size() != design_.cols()) throw InvalidArgument("predict: input dimension mismatch");
    if (!x.allFinite()) throw InvalidArgument("predict: non-finite input");
    const auto outputs = static_cast<Eigen::Index>(hypers_.size());
    Eigen::VectorXd om(outputs), ov(outputs);
    std::vector<Eigen::VectorXd> phi(factors_.size());
    std::vector<double> kfac(factors_.size());
    for (std::size_t f = 0; f < factors_.size(); ++f) {
      phi[f] = cross_corr(design_, x, factor_theta_[f]);
      kfac[f] = kriging_variance_factor(factors_[f], phi[f]);
    }
    for (Eigen::Index o = 0; o < outputs; ++o) {
      if (hypers_[o].degenerate) {
        om[o] = 0.0;
        ov[o] = 0.0;
        continue;
      }
      const std::size_t f = factor_of_[o];
      om[o] = weights_.row(o).dot(phi[f]);
      ov[o] = hypers_[o].tau_sq * kfac[f];
    }
    if (type_ == BaselineType::pcagp) {
      mean = pca_.mean_field + pca_.components * om;
      var = pca_.components.array().square().matrix() * ov;
    } else {
      mean = om;
      var = ov;
    }
  }

 private:
  void build_caches() {
    const Eigen::MatrixXd T = targets();
    factors_.clear();
    factor_theta_.clear();
    factor_of_.assign(hypers_.size(), 0);
    weights_ = Eigen::MatrixXd::Zero(T.rows(), T.cols());
    for (std::size_t o = 0; o < hypers_.size(); ++o) {
      if (hypers_[o].degenerate) continue;
      std::size_t f = 0;
      // uGP shares one factorization; the others get one per output.
      if (type_ == BaselineType::ugp && !factors_.empty()) {
        f = 0;
      } else {
        factors_.push_back(
            CorrelationFactorization::factorize(corr_matrix(design_, hypers_[o].theta, nugget_), nugget_));
        factor_theta_.push_back(hypers_[o].theta);
        f = factors_.size() - 1;
      }
      factor_of_[o] = f;
      weights_.row(static_cast<Eigen::Index>(o)) =
          factors_[f].solve(Eigen::VectorXd(T.row(static_cast<Eigen::Index>(o)).transpose())).transpose();
    }
  }

  BaselineType type_ = BaselineType::igp;
  Eigen::MatrixXd design_;
  Eigen::MatrixXd solutions_;
  Eigen::MatrixXd nodes_;
  std::vector<OutputHyper> hypers_;
  double nugget_ = kDefaultNugget;
  PcaBasis pca_;
  double fit_seconds_ = 0.0;
  std::vector<CorrelationFactorization> factors_;
  std::vector<Lengthscales> factor_theta_;
  std::vector<std::size_t> factor_of_;
  Eigen::MatrixXd weights_;  // row o = (Phi^{-1} target_o)^T
};

namespace detail {

inline void check_baseline_inputs(const Eigen::MatrixXd& B, const Eigen::MatrixXd& X) {
  if (B.cols() != X.rows()) throw InvalidArgument("baseline: solution columns != design size");
  if (B.rows() == 0 || X.rows() == 0 || X.cols() == 0) throw InvalidArgument("baseline: empty input");
  if (!B.allFinite() || !X.allFinite()) throw InvalidArgument("baseline: non-finite input");
}

/// Independent profile-MLE fit per row of T. Every row uses the same seed, so
/// identical rows get identical hyperparameters.
inline std::vector<OutputHyper> fit_independent(const Eigen::MatrixXd& T, const Eigen::MatrixXd& X,
                                                const BaselineConfig& cfg) {
  const LengthscaleBounds bounds = default_bounds(X, cfg.gp);
  const Lengthscales init = median_heuristic(X);
  const Eigen::VectorXd w = Eigen::VectorXd::Ones(1);
  std::vector<OutputHyper> out(static_cast<std::size_t>(T.rows()), OutputHyper{init, 0.0, true});
  parallel_for(out.size(), [&](std::size_t o) {
    const Eigen::MatrixXd b = T.row(static_cast<Eigen::Index>(o)).transpose();
    if (!(b.squaredNorm() > 0.0)) return;
    const Lengthscales theta = optimize_theta(X, b, w, init, bounds, cfg.gp, mix_seed(cfg.seed, 0));
    out[o] = OutputHyper{theta, tau_sq_closed_form(X, theta, b, w, cfg.gp.nugget), false};
  });
  return out;
}

}  // namespace detail

inline BaselineModel fit_ugp(const Eigen::MatrixXd& B, const Eigen::MatrixXd& X, const Eigen::MatrixXd& S,
                             const BaselineConfig& cfg = {}) {
  detail::check_baseline_inputs(B, X);
  const Eigen::MatrixXd outputs = B.transpose();  // n x N
  const Eigen::VectorXd w = Eigen::VectorXd::Ones(B.rows());
  Lengthscales theta = median_heuristic(X);
  if (B.squaredNorm() > 0.0)
    theta = optimize_theta(X, outputs, w, theta, default_bounds(X, cfg.gp), cfg.gp, mix_seed(cfg.seed, 0));
  const auto f = CorrelationFactorization::factorize(corr_matrix(X, theta, cfg.gp.nugget), cfg.gp.nugget);
  std::vector<OutputHyper> hypers(static_cast<std::size_t>(B.rows()));
  const double n = static_cast<double>(X.rows());
  for (Eigen::Index j = 0; j < B.rows(); ++j) {
    const Eigen::VectorXd b = B.row(j).transpose();
    const double tau = f.quad_form(b) / n;
    hypers[j] = OutputHyper{theta, tau, !(b.squaredNorm() > 0.0)};
  }
  return {BaselineType::ugp, X, B, S, std::move(hypers), cfg.gp.nugget};
}

inline BaselineModel fit_igp(const Eigen::MatrixXd& B, const Eigen::MatrixXd& X, const Eigen::MatrixXd& S,
                             const BaselineConfig& cfg = {}) {
  detail::check_baseline_inputs(B, X);
  return {BaselineType::igp, X, B, S, detail::fit_independent(B, X, cfg), cfg.gp.nugget};
}

inline BaselineModel fit_pcagp(const Eigen::MatrixXd& B, const Eigen::MatrixXd& X, const Eigen::MatrixXd& S,
                               const BaselineConfig& cfg = {}) {
  detail::check_baseline_inputs(B, X);
  PcaBasis pca = compute_pca(B, cfg.pca_threshold);
  auto hypers = detail::fit_independent(pca.scores.transpose(), X, cfg);
  return {BaselineType::pcagp, X, B, S, std::move(hypers), cfg.gp.nugget, std::move(pca)};
}

inline BaselineModel fit_baseline(BaselineType type, const Eigen::MatrixXd& B, const Eigen::MatrixXd& X,
                                  const Eigen::MatrixXd& S, const BaselineConfig& cfg = {}) {
  switch (type) {
    case BaselineType::ugp: return fit_ugp(B, X, S, cfg);
    case BaselineType::igp: return fit_igp(B, X, S, cfg);
    case BaselineType::pcagp: return fit_pcagp(B, X, S, cfg);
  }
  throw InvalidArgument("fit_baseline: unknown type");
}

inline PredictionBatch predict_all_nodes(const BaselineModel& model, const Eigen::MatrixXd& X_test) {
  const Eigen::Index m = X_test.rows();
  const Eigen::Index N = model.num_nodes();
  PredictionBatch out{Eigen::MatrixXd(m, N), Eigen::MatrixXd(m, N)};
  Eigen::VectorXd mean(N), var(N);
  for (Eigen::Index r = 0; r < m; ++r) {
    model.predict(X_test.row(r).transpose(), mean, var);
    out.mean.row(r) = mean.transpose();
    out.variance.row(r) = var.transpose();
  }
  return out;
}

inline GaussianMoments predict_node(const BaselineModel& model, Eigen::Index j, const Eigen::VectorXd& x) {
  if (j < 0 || j >= model.num_nodes()) throw InvalidArgument("predict_node: node index out of range");
  Eigen::VectorXd mean(model.num_nodes()), var(model.num_nodes());
  model.predict(x, mean, var);
  return {mean[j], var[j]};
}

}  // namespace mcgp
