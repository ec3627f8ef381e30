// mcgp: generate Poisson datasets, fit and evaluate mesh-clustered GP
// emulators and baselines, report clusters, run the convergence study.
//
// Exit codes: 0 success, 2 invalid input or files, 3 numerical degeneracy,
// 1 anything else.

#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mcgp/mcgp.hpp"

namespace {

struct ConfigFlags {
  std::string config_file;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> model_type;
  std::optional<double> nugget;
  std::optional<double> elbo_tol;
  std::optional<int> max_iter;
  std::optional<int> multistarts;
  std::optional<int> max_evals;
  std::optional<double> alpha0;
  std::optional<int> K;
  bool literal_tau = false;

  void attach(CLI::App* app, bool with_model_type) {
    app->add_option("--config", config_file, "JSON run configuration")->check(CLI::ExistingFile);
    app->add_option("--seed", seed, "random seed");
    if (with_model_type)
      app->add_option("--model-type", model_type, "mcgp, ugp, igp or pcagp")
          ->check(CLI::IsMember({"mcgp", "ugp", "igp", "pcagp"}));
    app->add_option("--nugget", nugget, "correlation nugget g");
    app->add_option("--elbo-tol", elbo_tol, "relative ELBO change for convergence");
    app->add_option("--max-iter", max_iter, "maximum EM iterations");
    app->add_option("--multistarts", multistarts, "optimizer restarts per lengthscale search");
    app->add_option("--max-evals", max_evals, "simplex evaluations per restart");
    app->add_option("--alpha0", alpha0, "DP concentration");
    app->add_option("--K", K, "truncation level");
    app->add_flag("--literal-tau-exponent", literal_tau, "use -log tau^2 instead of -n log tau^2 in the E-step");
  }

  // flags > config file > defaults
  [[nodiscard]] mcgp::RunConfig resolve() const {
    mcgp::RunConfig c = config_file.empty() ? mcgp::RunConfig{} : mcgp::load_config(config_file);
    if (seed) c.seed = *seed;
    if (model_type) c.model_type = *model_type;
    if (nugget) c.nugget = *nugget;
    if (elbo_tol) c.elbo_tol = *elbo_tol;
    if (max_iter) c.max_iter = *max_iter;
    if (multistarts) c.multistarts = *multistarts;
    if (max_evals) c.max_evals = *max_evals;
    if (alpha0) c.priors.alpha0 = *alpha0;
    if (K) c.priors.K = *K;
    if (literal_tau) c.literal_tau_exponent = true;
    c.validate();
    return c;
  }
};

Eigen::Vector2d parse_point(const std::string& s) {
  const auto comma = s.find(',');
  if (comma == std::string::npos) throw mcgp::ValidationError("--at expects s1,s2");
  try {
    return {std::stod(s.substr(0, comma)), std::stod(s.substr(comma + 1))};
  } catch (const std::exception&) {
    throw mcgp::ValidationError("--at expects two numbers s1,s2");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mesh-clustered Gaussian process emulator toolkit"};
  app.set_help_flag("--help", "print help and exit");
  app.require_subcommand(1);

  mcgp::GenerateArgs gen;
  std::optional<std::string> gen_inputs;
  std::optional<int> gen_eq, gen_lin;
  auto* generate = app.add_subcommand("generate", "solve the parametric Poisson problem and write a dataset");
  generate->add_option("--out", gen.out, "dataset directory")->required();
  generate->add_option("--h", gen.h, "target mesh size in (0, 0.5]")->capture_default_str();
  generate->add_option("--equispaced", gen_eq, "n cell-centred inputs x_i = -1 + (2i-1)/n");
  generate->add_option("--linspace", gen_lin, "n inputs from -1 to 1 inclusive");
  generate->add_option("--inputs", gen_inputs, "CSV file with one input per row")->check(CLI::ExistingFile);
  generate->add_option("--seed", gen.seed, "recorded in the manifest");
  generate->add_flag("--header", gen.header, "write CSV header lines");

  mcgp::FitArgs fit;
  ConfigFlags fit_flags;
  auto* fitcmd = app.add_subcommand("fit", "fit an emulator to a dataset");
  fitcmd->add_option("--dataset", fit.dataset, "dataset directory")->required();
  fitcmd->add_option("--out", fit.out, "model directory")->required();
  fit_flags.attach(fitcmd, true);

  mcgp::PredictArgs pred;
  std::optional<std::string> pred_inputs, pred_dataset, pred_at;
  auto* predict = app.add_subcommand("predict", "predict node values (and optionally a field point)");
  predict->add_option("--model", pred.model, "model directory")->required();
  predict->add_option("--inputs", pred_inputs, "CSV of test inputs");
  predict->add_option("--dataset", pred_dataset, "dataset directory providing inputs.csv and the mesh");
  std::string pred_out;
  predict->add_option("--out", pred_out, "directory for pred_mean.csv and pred_var.csv");
  predict->add_option("--at", pred_at, "field query point s1,s2 (prints x,mean,variance)");
  predict->add_flag("--header", pred.header, "write CSV header lines");

  mcgp::EvaluateArgs eval;
  std::optional<std::string> eval_truth, eval_out;
  auto* evaluate = app.add_subcommand("evaluate", "RMSE, mean CRPS and timings against a truth dataset");
  evaluate->add_option("--model", eval.model, "model directory")->required();
  evaluate->add_option("--truth", eval_truth, "truth dataset directory (default: regenerate on the model mesh)");
  evaluate->add_option("--out", eval_out, "report JSON path");
  evaluate->add_option("--test-points", eval.test_points, "size of the default test design")->capture_default_str();
  evaluate->add_option("--repeats", eval.repeats, "timing repeats (median reported)")->capture_default_str();
  evaluate->add_flag("--per-node", eval.per_node, "include per-node RMSE");

  mcgp::ClustersArgs clus;
  std::optional<std::string> clus_out;
  auto* clusters = app.add_subcommand("clusters", "cluster table and per-node assignments of an mcgp model");
  clusters->add_option("--model", clus.model, "model directory")->required();
  clusters->add_option("--out", clus_out, "directory for clusters.csv and node_clusters.csv");
  clusters->add_option("--threshold", clus.threshold, "display threshold on q")->capture_default_str();

  mcgp::ConvergenceArgs conv;
  ConfigFlags conv_flags;
  std::optional<std::string> conv_out;
  auto* convergence = app.add_subcommand("convergence", "error-rate study over design size and mesh size");
  convergence->add_option("--n", conv.n_grid, "design sizes")->delimiter(',')->capture_default_str();
  convergence->add_option("--h", conv.h_grid, "mesh sizes")->delimiter(',')->capture_default_str();
  convergence->add_option("--nu-grid", conv.nu_grid, "candidate nu values")->delimiter(',')->capture_default_str();
  convergence->add_option("--r-grid", conv.r_grid, "candidate r values")->delimiter(',')->capture_default_str();
  convergence->add_option("--samples", conv.samples, "Monte Carlo sample size")->capture_default_str();
  convergence->add_option("--out", conv_out, "output directory");
  conv_flags.attach(convergence, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*generate) {
      if (gen_eq) gen.equispaced = *gen_eq;
      if (gen_lin) gen.linspace = *gen_lin;
      if (gen_inputs) gen.inputs = *gen_inputs;
      const auto ds = mcgp::cmd_generate(gen);
      std::cout << "wrote " << gen.out.string() << ": N=" << ds.mesh.num_nodes() << " n=" << ds.inputs.rows()
                << " elements=" << ds.mesh.num_elements() << '\n';
    } else if (*fitcmd) {
      fit.config = fit_flags.resolve();
      const auto s = mcgp::cmd_fit(fit);
      std::cout << s.model_type << " fit in " << s.seconds << " s";
      if (s.model_type == "mcgp")
        std::cout << ", " << s.iterations << " iterations, " << (s.converged ? "converged" : "NOT converged") << ", "
                  << s.used_clusters << " clusters used";
      std::cout << '\n';
    } else if (*predict) {
      if (pred_inputs) pred.inputs = *pred_inputs;
      if (pred_dataset) pred.dataset = *pred_dataset;
      if (!pred_out.empty()) pred.out = pred_out;
      if (pred_at) pred.at = parse_point(*pred_at);
      if (!pred.out && !pred.at) throw mcgp::ValidationError("predict: give --out and/or --at");
      mcgp::cmd_predict(pred, &std::cout);
    } else if (*evaluate) {
      if (eval_truth) eval.truth = *eval_truth;
      if (eval_out) eval.out = *eval_out;
      const auto r = mcgp::cmd_evaluate(eval);
      std::cout << mcgp::to_json(r).dump(2) << '\n';
    } else if (*clusters) {
      if (clus_out) clus.out = *clus_out;
      mcgp::cmd_clusters(clus, &std::cout);
    } else if (*convergence) {
      conv.config = conv_flags.resolve();
      if (conv_out) conv.out = *conv_out;
      mcgp::cmd_convergence(conv, &std::cout);
    }
  } catch (const mcgp::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const mcgp::InvalidArgument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const mcgp::OutOfDomain& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const mcgp::NumericalDegeneracy& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
