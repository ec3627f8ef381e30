#pragma once

// Frozen mesh-clustered GP emulator: per-node mixture predictions and field
// reconstruction through the quadratic shape functions.

#include <cmath>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mcgp/error.hpp"
#include "mcgp/gp_core.hpp"
#include "mcgp/kernel.hpp"
#include "mcgp/mesh.hpp"
#include "mcgp/mixture.hpp"

namespace mcgp {

/// Predictive distribution of one node coefficient: a K-component Gaussian
/// mixture with weights q(z_j = k) and its first two moments.
struct NodePrediction {
  double mean = 0.0;
  double variance = 0.0;
  Eigen::VectorXd weights;
  Eigen::VectorXd component_means;
  Eigen::VectorXd component_variances;
};

/// Kernel quantities for one query input, shared across all nodes.
struct ClusterQuery {
  std::vector<Eigen::VectorXd> phi;  // Phi_k(x, X_n)
  Eigen::VectorXd kriging_variance;  // tau_k^2 (1 - Gamma_k(x) Phi_k(x, X_n)^T)
};

struct PredictionBatch {
  Eigen::MatrixXd mean;      // m x N
  Eigen::MatrixXd variance;  // m x N
};

class FittedEmulator {
 public:
  FittedEmulator() = default;

  FittedEmulator(Eigen::MatrixXd design, Eigen::MatrixXd solutions, Eigen::MatrixXd nodes, HyperPriors priors,
                 VariationalState state, std::vector<ClusterHyper> hypers, double nugget)
      : design_(std::move(design)),
        solutions_(std::move(solutions)),
        nodes_(std::move(nodes)),
        priors_(std::move(priors)),
        state_(std::move(state)),
        hypers_(std::move(hypers)),
        nugget_(nugget) {
    if (solutions_.rows() != nodes_.rows() || solutions_.cols() != design_.rows())
      throw InvalidArgument("FittedEmulator: inconsistent data shapes");
    if (state_.resp.rows() != solutions_.rows() || state_.K() != static_cast<int>(hypers_.size()))
      throw InvalidArgument("FittedEmulator: responsibilities do not match data or clusters");
    build_caches();
  }

  [[nodiscard]] const Eigen::MatrixXd& design() const { return design_; }
  [[nodiscard]] const Eigen::MatrixXd& solutions() const { return solutions_; }
  [[nodiscard]] const Eigen::MatrixXd& nodes() const { return nodes_; }
  [[nodiscard]] const HyperPriors& priors() const { return priors_; }
  [[nodiscard]] const VariationalState& state() const { return state_; }
  [[nodiscard]] const Eigen::MatrixXd& responsibilities() const { return state_.resp; }
  [[nodiscard]] const std::vector<ClusterHyper>& hypers() const { return hypers_; }
  [[nodiscard]] const CorrelationFactorization& factorization(int k) const { return factors_[k]; }
  [[nodiscard]] double nugget() const { return nugget_; }
  [[nodiscard]] int K() const { return state_.K(); }
  [[nodiscard]] Eigen::Index num_nodes() const { return solutions_.rows(); }
  [[nodiscard]] Eigen::Index num_inputs() const { return design_.rows(); }

  [[nodiscard]] const FitDiagnostics& diagnostics() const { return diagnostics_; }
  void set_diagnostics(FitDiagnostics d) { diagnostics_ = std::move(d); }

  [[nodiscard]] ClusterQuery query(const Eigen::VectorXd& x) const {
    if (x.size() != design_.cols()) throw InvalidArgument("predict: input dimension mismatch");
    if (!x.allFinite()) throw InvalidArgument("predict: non-finite input");
    ClusterQuery q;
    q.phi.resize(K());
    q.kriging_variance.resize(K());
    for (int k = 0; k < K(); ++k) {
      q.phi[k] = cross_corr(design_, x, hypers_[k].theta);
      q.kriging_variance[k] = hypers_[k].tau_sq * kriging_variance_factor(factors_[k], q.phi[k]);
    }
    return q;
  }

  [[nodiscard]] NodePrediction node_prediction(const ClusterQuery& q, Eigen::Index j) const {
    const int K = this->K();
    const Eigen::Index n = design_.rows();
    NodePrediction out;
    out.weights = state_.resp.row(j).transpose();
    out.component_means.resize(K);
    out.component_variances = q.kriging_variance;
    for (int k = 0; k < K; ++k) {
      double m = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) m += kriging_weights_[k](j, i) * q.phi[k][i];
      out.component_means[k] = m;
    }
    double mean = 0.0;
    for (int k = 0; k < K; ++k) mean += out.weights[k] * out.component_means[k];
    double var = 0.0;
    for (int k = 0; k < K; ++k) {
      const double dev = out.component_means[k] - mean;
      var += out.weights[k] * (out.component_variances[k] + dev * dev);
    }
    out.mean = mean;
    out.variance = std::max(0.0, var);
    return out;
  }

 private:
  void build_caches() {
    factors_.clear();
    kriging_weights_.clear();
    for (const auto& h : hypers_) {
      factors_.push_back(CorrelationFactorization::factorize(corr_matrix(design_, h.theta, nugget_), nugget_));
      // row j = (Phi_k^{-1} b_j)^T
      kriging_weights_.push_back(factors_.back().solve(solutions_.transpose()).transpose());
    }
  }

  Eigen::MatrixXd design_;
  Eigen::MatrixXd solutions_;
  Eigen::MatrixXd nodes_;
  HyperPriors priors_;
  VariationalState state_;
  std::vector<ClusterHyper> hypers_;
  double nugget_ = kDefaultNugget;
  FitDiagnostics diagnostics_;
  std::vector<CorrelationFactorization> factors_;
  std::vector<Eigen::MatrixXd> kriging_weights_;
};

/// Variational EM fit returning the frozen emulator.
inline FittedEmulator fit(const Eigen::MatrixXd& B, const Eigen::MatrixXd& X, const Eigen::MatrixXd& S,
                          const HyperPriors& priors, const MixtureConfig& config = {}) {
  MixtureFit mf = run_variational_em(B, X, S, priors, config);
  FittedEmulator model(X, B, S, priors, std::move(mf.state), std::move(mf.hypers), config.gp.nugget);
  model.set_diagnostics(std::move(mf.diagnostics));
  return model;
}

inline NodePrediction predict_node(const FittedEmulator& model, Eigen::Index j, const Eigen::VectorXd& x) {
  if (j < 0 || j >= model.num_nodes()) throw InvalidArgument("predict_node: node index out of range");
  return model.node_prediction(model.query(x), j);
}

inline PredictionBatch predict_all_nodes(const FittedEmulator& model, const Eigen::MatrixXd& X_test) {
  const Eigen::Index m = X_test.rows();
  const Eigen::Index N = model.num_nodes();
  PredictionBatch out{Eigen::MatrixXd(m, N), Eigen::MatrixXd(m, N)};
  for (Eigen::Index r = 0; r < m; ++r) {
    const ClusterQuery q = model.query(X_test.row(r).transpose());
    for (Eigen::Index j = 0; j < N; ++j) {
      const NodePrediction p = model.node_prediction(q, j);
      out.mean(r, j) = p.mean;
      out.variance(r, j) = p.variance;
    }
  }
  return out;
}

/// Field posterior at spatial point s: mean sum_j v_j(s) mean_j and variance
/// sum_j v_j(s)^2 var_j over the six nodes of the containing element.
inline GaussianMoments predict_field(const FittedEmulator& model, const TriMesh& mesh, const Eigen::Vector2d& s,
                                     const Eigen::VectorXd& x, Eigen::Index hint = 0) {
  if (mesh.num_nodes() != model.num_nodes()) throw InvalidArgument("predict_field: mesh does not match model");
  const Location loc = locate(mesh, s, hint);
  const ShapeValues sv = shape_from_barycentric(element_geometry(mesh, loc.element), loc.bary);
  const ClusterQuery q = model.query(x);
  GaussianMoments out;
  for (int a = 0; a < 6; ++a) {
    const NodePrediction p = model.node_prediction(q, mesh.elements(loc.element, a));
    out.mean += sv.value[a] * p.mean;
    out.variance += sv.value[a] * sv.value[a] * p.variance;
  }
  return out;
}

}  // namespace mcgp
