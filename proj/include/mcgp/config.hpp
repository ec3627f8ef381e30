#pragma once

// Run configuration shared by the CLI commands. JSON file layout:
//
//   { "seed": 0, "model_type": "mcgp", "nugget": 1.5e-8, "elbo_tol": 1e-6,
//     "max_iter": 200, "literal_tau_exponent": false, "pca_threshold": 0.99,
//     "optimizer": { "multistarts": 5, "max_evals": 200 },
//     "priors": { "alpha0": 0.5, "K": 10, "kappa0": 2, "mu0": [..],
//                 "Sigma0": [[..]], "W0": [[..]] } }
//
// Every key is optional; unknown keys are rejected.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>

#include <Eigen/Dense>
#include "json.hpp"

#include "mcgp/baselines.hpp"
#include "mcgp/error.hpp"
#include "mcgp/io.hpp"
#include "mcgp/kernel.hpp"
#include "mcgp/mixture.hpp"

namespace mcgp {

struct PriorOverrides {
  std::optional<double> alpha0;
  std::optional<int> K;
  std::optional<double> kappa0;
  std::optional<Eigen::VectorXd> mu0;
  std::optional<Eigen::MatrixXd> Sigma0;
  std::optional<Eigen::MatrixXd> W0;
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::string model_type = "mcgp";
  double nugget = kDefaultNugget;
  double elbo_tol = 1e-6;
  int max_iter = 200;
  int multistarts = 5;
  int max_evals = 200;
  bool literal_tau_exponent = false;
  double pca_threshold = 0.99;
  PriorOverrides priors;

  void validate() const {
    if (model_type != "mcgp" && model_type != "ugp" && model_type != "igp" && model_type != "pcagp")
      throw ValidationError("config: model_type must be one of mcgp, ugp, igp, pcagp");
    if (!(nugget >= 0.0 && nugget < 1.0)) throw ValidationError("config: nugget must lie in [0, 1)");
    if (!(elbo_tol > 0.0 && elbo_tol < 1.0)) throw ValidationError("config: elbo_tol must lie in (0, 1)");
    if (max_iter < 1) throw ValidationError("config: max_iter must be >= 1");
    if (multistarts < 1) throw ValidationError("config: optimizer.multistarts must be >= 1");
    if (max_evals < 1) throw ValidationError("config: optimizer.max_evals must be >= 1");
    if (!(pca_threshold > 0.0 && pca_threshold <= 1.0)) throw ValidationError("config: pca_threshold must lie in (0, 1]");
    if (priors.alpha0 && !(*priors.alpha0 > 0.0)) throw ValidationError("config: priors.alpha0 must be positive");
    if (priors.K && *priors.K < 1) throw ValidationError("config: priors.K must be >= 1");
  }

  [[nodiscard]] GpOptions gp_options() const {
    GpOptions g;
    g.nugget = nugget;
    g.multistarts = multistarts;
    g.max_evals = max_evals;
    return g;
  }

  [[nodiscard]] MixtureConfig mixture_config() const {
    MixtureConfig c;
    c.gp = gp_options();
    c.elbo_tol = elbo_tol;
    c.max_iter = max_iter;
    c.seed = seed;
    c.literal_tau_exponent = literal_tau_exponent;
    return c;
  }

  [[nodiscard]] BaselineConfig baseline_config() const {
    return BaselineConfig{gp_options(), seed, pca_threshold};
  }

  /// Defaults from the node coordinates with the configured overrides applied.
  [[nodiscard]] HyperPriors make_priors(const Eigen::MatrixXd& S) const {
    HyperPriors p = default_priors(S);
    if (priors.alpha0) p.alpha0 = *priors.alpha0;
    if (priors.K) p.K = *priors.K;
    if (priors.kappa0) p.kappa0 = *priors.kappa0;
    if (priors.mu0) p.mu0 = *priors.mu0;
    if (priors.Sigma0) p.Sigma0 = *priors.Sigma0;
    if (priors.W0) p.W0 = *priors.W0;
    try {
      p.validate();
    } catch (const InvalidArgument& e) {
      throw ValidationError(std::string("config: ") + e.what());
    }
    return p;
  }
};

namespace detail {

inline void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ValidationError("config: " + where + " must be an object");
  for (const auto& [key, _] : j.items())
    if (!allowed.count(key)) throw ValidationError("config: unknown key '" + where + key + "'");
}

}  // namespace detail

inline RunConfig parse_config(const json& j) {
  RunConfig c;
  try {
    detail::reject_unknown(j,
                           {"seed", "model_type", "nugget", "elbo_tol", "max_iter", "literal_tau_exponent",
                            "pca_threshold", "optimizer", "priors"},
                           "");
    if (j.contains("seed")) {
      if (!j["seed"].is_number_unsigned()) throw ValidationError("config: seed must be a nonnegative integer");
      c.seed = j["seed"].get<std::uint64_t>();
    }
    if (j.contains("model_type")) c.model_type = j["model_type"].get<std::string>();
    if (j.contains("nugget")) c.nugget = j["nugget"].get<double>();
    if (j.contains("elbo_tol")) c.elbo_tol = j["elbo_tol"].get<double>();
    if (j.contains("max_iter")) c.max_iter = j["max_iter"].get<int>();
    if (j.contains("literal_tau_exponent")) c.literal_tau_exponent = j["literal_tau_exponent"].get<bool>();
    if (j.contains("pca_threshold")) c.pca_threshold = j["pca_threshold"].get<double>();
    if (j.contains("optimizer")) {
      const json& o = j["optimizer"];
      detail::reject_unknown(o, {"multistarts", "max_evals"}, "optimizer.");
      if (o.contains("multistarts")) c.multistarts = o["multistarts"].get<int>();
      if (o.contains("max_evals")) c.max_evals = o["max_evals"].get<int>();
    }
    if (j.contains("priors")) {
      const json& p = j["priors"];
      detail::reject_unknown(p, {"alpha0", "K", "kappa0", "mu0", "Sigma0", "W0"}, "priors.");
      if (p.contains("alpha0")) c.priors.alpha0 = p["alpha0"].get<double>();
      if (p.contains("K")) c.priors.K = p["K"].get<int>();
      if (p.contains("kappa0")) c.priors.kappa0 = p["kappa0"].get<double>();
      if (p.contains("mu0")) c.priors.mu0 = jsonio::to_vec(p["mu0"]);
      if (p.contains("Sigma0")) c.priors.Sigma0 = jsonio::to_mat(p["Sigma0"]);
      if (p.contains("W0")) c.priors.W0 = jsonio::to_mat(p["W0"]);
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: wrong value type (") + e.what() + ")");
  } catch (const LoadError& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  try {
    return parse_config(jsonio::read_file(path));
  } catch (const LoadError& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
}

}  // namespace mcgp
