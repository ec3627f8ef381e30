#pragma once

// The six pipeline commands behind the `mcgp` tool. Each takes a plain
// argument struct so it can be driven from tests as well as from the CLI.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include "json.hpp"

#include "mcgp/baselines.hpp"
#include "mcgp/config.hpp"
#include "mcgp/csv.hpp"
#include "mcgp/emulator.hpp"
#include "mcgp/error.hpp"
#include "mcgp/fem.hpp"
#include "mcgp/io.hpp"
#include "mcgp/metrics.hpp"
#include "mcgp/mixture.hpp"

namespace mcgp {

namespace fs = std::filesystem;

inline Eigen::MatrixXd column(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

// ---------------------------------------------------------------- generate

struct GenerateArgs {
  fs::path out;
  double h = 0.2;
  std::optional<int> equispaced;  // cell-centred design -1 + (2i-1)/n
  std::optional<int> linspace;    // endpoint-inclusive design
  std::optional<fs::path> inputs;
  bool header = false;
  std::uint64_t seed = 0;
};

inline PoissonDataset cmd_generate(const GenerateArgs& a) {
  const int specs = int(a.equispaced.has_value()) + int(a.linspace.has_value()) + int(a.inputs.has_value());
  if (specs != 1) throw ValidationError("generate: give exactly one of --equispaced, --linspace, --inputs");
  if (!(a.h > 0.0 && a.h <= 0.5)) throw ValidationError("generate: --h must lie in (0, 0.5]");
  std::vector<double> x;
  if (a.equispaced) {
    if (*a.equispaced < 1) throw ValidationError("generate: --equispaced needs n >= 1");
    x = equispaced_design(*a.equispaced);
  } else if (a.linspace) {
    if (*a.linspace < 1) throw ValidationError("generate: --linspace needs n >= 1");
    x = linspace_design(*a.linspace);
  } else {
    const Eigen::MatrixXd in = csv::read(*a.inputs);
    if (in.cols() != 1 || in.rows() == 0)
      throw ValidationError(a.inputs->filename().string() + ": expected one input value per row");
    for (Eigen::Index i = 0; i < in.rows(); ++i) {
      if (!(in(i, 0) >= -1.0 && in(i, 0) <= 1.0))
        throw ValidationError(a.inputs->filename().string() + ": inputs must lie in [-1, 1]");
      x.push_back(in(i, 0));
    }
  }
  PoissonDataset ds = generate_dataset(a.h, x);
  save_dataset(ds, a.out, a.h, a.seed, a.header);
  return ds;
}

// --------------------------------------------------------------------- fit

struct FitArgs {
  fs::path dataset;
  fs::path out;
  RunConfig config;
};

struct FitSummary {
  std::string model_type;
  double seconds = 0.0;
  bool converged = true;
  int iterations = 0;
  int used_clusters = 0;
};

inline FitSummary cmd_fit(const FitArgs& a) {
  a.config.validate();
  const DatasetFiles files = load_dataset(a.dataset);
  const PoissonDataset& ds = files.data;
  const ModelMeta meta{files.h, a.config.seed};
  FitSummary s;
  s.model_type = a.config.model_type;
  const auto t0 = std::chrono::steady_clock::now();
  json log;
  if (a.config.model_type == "mcgp") {
    const HyperPriors priors = a.config.make_priors(ds.mesh.nodes);
    FittedEmulator model = fit(ds.solutions, ds.inputs, ds.mesh.nodes, priors, a.config.mixture_config());
    s.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const FitDiagnostics& d = model.diagnostics();
    s.converged = d.converged;
    s.iterations = d.iterations;
    s.used_clusters = count_used_clusters(model.responsibilities());
    save_model(model, a.out, meta);
    Eigen::MatrixXd trace(static_cast<Eigen::Index>(d.elbo_trace.size()), 2);
    for (std::size_t i = 0; i < d.elbo_trace.size(); ++i) {
      trace(static_cast<Eigen::Index>(i), 0) = static_cast<double>(i + 1);
      trace(static_cast<Eigen::Index>(i), 1) = d.elbo_trace[i];
    }
    csv::write(a.out / "elbo_trace.csv", trace, {"iteration", "elbo"});
    log["iteration_seconds"] = d.iteration_seconds;
    log["used_clusters"] = s.used_clusters;
    log["prior_regularized"] = priors.regularized;
  } else {
    BaselineModel model = fit_baseline(baseline_type_from_string(a.config.model_type), ds.solutions, ds.inputs,
                                       ds.mesh.nodes, a.config.baseline_config());
    s.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    save_model(model, a.out, meta);
  }
  log["model_type"] = s.model_type;
  log["fit_seconds"] = s.seconds;
  log["converged"] = s.converged;
  log["iterations"] = s.iterations;
  jsonio::write_file(a.out / "fit_log.json", log);
  return s;
}

// ----------------------------------------------------------------- predict

inline PredictionBatch predict_batch(const LoadedModel& m, const Eigen::MatrixXd& X) {
  return std::visit([&](const auto& model) { return predict_all_nodes(model, X); }, m.model);
}

inline void check_inputs_match(const LoadedModel& m, const Eigen::MatrixXd& X, const std::string& what) {
  if (X.cols() != m.design().cols())
    throw ValidationError(what + ": inputs have " + std::to_string(X.cols()) + " columns, model expects " +
                          std::to_string(m.design().cols()));
  if (!X.allFinite()) throw ValidationError(what + ": non-finite input");
}

inline void check_nodes_match(const LoadedModel& m, const TriMesh& mesh, const std::string& what) {
  if (mesh.num_nodes() != m.nodes().rows())
    throw ValidationError(what + ": dataset has N = " + std::to_string(mesh.num_nodes()) + " nodes, model has N = " +
                          std::to_string(m.nodes().rows()));
}

/// Mesh for field queries: from a dataset directory when given, else rebuilt
/// from the training mesh size recorded in the model.
inline TriMesh model_mesh(const LoadedModel& m, const std::optional<fs::path>& dataset) {
  TriMesh mesh;
  if (dataset) {
    mesh = load_dataset(*dataset).data.mesh;
  } else {
    if (!m.meta.mesh_h) throw ValidationError("model has no recorded mesh size; pass --dataset");
    mesh = build_mesh(*m.meta.mesh_h);
  }
  check_nodes_match(m, mesh, "mesh");
  if ((mesh.nodes - m.nodes()).cwiseAbs().maxCoeff() > 1e-12)
    throw ValidationError("mesh: node coordinates differ from the model's nodes");
  return mesh;
}

struct PredictArgs {
  fs::path model;
  std::optional<fs::path> inputs;   // CSV, one input per row
  std::optional<fs::path> dataset;  // dataset directory (inputs.csv and mesh)
  std::optional<fs::path> out;
  std::optional<Eigen::Vector2d> at;
  bool header = false;
};

struct FieldValue {
  double x = 0.0;
  GaussianMoments moments;
};

inline std::vector<FieldValue> cmd_predict(const PredictArgs& a, std::ostream* log = nullptr) {
  const LoadedModel m = load_model(a.model);
  Eigen::MatrixXd X;
  if (a.inputs) X = csv::read(*a.inputs);
  else if (a.dataset) X = csv::read(*a.dataset / "inputs.csv");
  else throw ValidationError("predict: give --inputs or --dataset");
  check_inputs_match(m, X, "predict");
  if (a.dataset) check_nodes_match(m, load_dataset(*a.dataset).data.mesh, "predict");

  if (a.out) {
    const PredictionBatch p = predict_batch(m, X);
    fs::create_directories(*a.out);
    std::vector<std::string> header;
    if (a.header)
      for (Eigen::Index j = 0; j < p.mean.cols(); ++j) header.push_back("node" + std::to_string(j));
    csv::write(*a.out / "pred_mean.csv", p.mean, header);
    csv::write(*a.out / "pred_var.csv", p.variance, header);
  }
  std::vector<FieldValue> field;
  if (a.at) {
    if (!m.is_mcgp()) throw ValidationError("predict: --at is supported for mcgp models only");
    const TriMesh mesh = model_mesh(m, a.dataset);
    const auto& model = std::get<FittedEmulator>(m.model);
    for (Eigen::Index r = 0; r < X.rows(); ++r) {
      const GaussianMoments g = predict_field(model, mesh, *a.at, X.row(r).transpose());
      field.push_back({X(r, 0), g});
      if (log) *log << csv::format_double(X(r, 0)) << ',' << csv::format_double(g.mean) << ','
                    << csv::format_double(g.variance) << '\n';
    }
  }
  return field;
}

// ---------------------------------------------------------------- evaluate

struct EvaluateArgs {
  fs::path model;
  std::optional<fs::path> truth;  // dataset directory; default: 201 equispaced inputs on the model mesh
  std::optional<fs::path> out;
  int test_points = 201;
  int repeats = 3;
  bool per_node = false;
};

/// RMSE and mean CRPS over every (test input, node) pair, plus timings.
inline EvalReport evaluate_model(const LoadedModel& m, const Eigen::MatrixXd& X, const Eigen::MatrixXd& truth,
                                 int repeats = 3) {
  if (truth.rows() != X.rows() || truth.cols() != m.nodes().rows())
    throw ValidationError("evaluate: truth shape does not match test inputs and model nodes");
  EvalReport r;
  std::vector<double> times;
  PredictionBatch pred;
  for (int i = 0; i < std::max(1, repeats); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    pred = predict_batch(m, X);
    times.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
  }
  std::nth_element(times.begin(), times.begin() + times.size() / 2, times.end());
  r.predict_ms_per_run = X.rows() ? times[times.size() / 2] / static_cast<double>(X.rows()) : 0.0;
  r.rmse = rmse(truth, pred.mean);
  r.per_node_rmse = per_node_rmse(truth, pred.mean);

  double crps_sum = 0.0;
  if (m.is_mcgp()) {
    const auto& model = std::get<FittedEmulator>(m.model);
    for (Eigen::Index t = 0; t < X.rows(); ++t) {
      const ClusterQuery q = model.query(X.row(t).transpose());
      for (Eigen::Index j = 0; j < truth.cols(); ++j) {
        const NodePrediction p = model.node_prediction(q, j);
        crps_sum += crps_mixture(p.weights, p.component_means, p.component_variances, truth(t, j));
      }
    }
  } else {
    for (Eigen::Index t = 0; t < X.rows(); ++t)
      for (Eigen::Index j = 0; j < truth.cols(); ++j)
        crps_sum += crps_normal(pred.mean(t, j), std::sqrt(std::max(0.0, pred.variance(t, j))), truth(t, j));
  }
  r.mean_crps = crps_sum / static_cast<double>(truth.size());
  return r;
}

inline EvalReport cmd_evaluate(const EvaluateArgs& a) {
  const LoadedModel m = load_model(a.model);
  Eigen::MatrixXd X, truth;
  if (a.truth) {
    const DatasetFiles t = load_dataset(*a.truth);
    check_nodes_match(m, t.data.mesh, "evaluate");
    X = t.data.inputs;
    truth = t.data.solutions.transpose();
  } else {
    if (!m.meta.mesh_h) throw ValidationError("evaluate: model has no recorded mesh size; pass --truth");
    if (m.design().cols() != 1) throw ValidationError("evaluate: default truth needs a scalar input");
    if (a.test_points < 1) throw ValidationError("evaluate: --test-points must be >= 1");
    const PoissonDataset t = generate_dataset(*m.meta.mesh_h, linspace_design(a.test_points));
    check_nodes_match(m, t.mesh, "evaluate");
    X = t.inputs;
    truth = t.solutions.transpose();
  }
  check_inputs_match(m, X, "evaluate");
  EvalReport r = evaluate_model(m, X, truth, a.repeats);
  const fs::path fit_log = a.model / "fit_log.json";
  if (fs::exists(fit_log)) {
    const json log = jsonio::read_file(fit_log);
    if (log.contains("fit_seconds") && log["fit_seconds"].is_number()) r.fit_seconds = log["fit_seconds"];
  }
  if (!a.per_node) r.per_node_rmse.reset();
  if (a.out) {
    json j = to_json(r);
    j["model_type"] = m.type();
    j["test_points"] = X.rows();
    jsonio::write_file(*a.out, j);
  }
  return r;
}

// ---------------------------------------------------------------- clusters

struct ClusterRow {
  int k = 0;
  double tau_sq = 0.0;
  Eigen::VectorXd theta;
  int node_count = 0;  // nodes with q_jk >= threshold
  double mass = 0.0;
  bool used = false;
  bool active = true;
  bool degenerate = false;
};

struct ClustersArgs {
  fs::path model;
  std::optional<fs::path> out;
  double threshold = 1e-3;
};

inline std::vector<ClusterRow> cmd_clusters(const ClustersArgs& a, std::ostream* log = nullptr) {
  const LoadedModel m = load_model(a.model);
  if (!m.is_mcgp()) throw ValidationError("clusters: model type '" + m.type() + "' has no clusters");
  const auto& model = std::get<FittedEmulator>(m.model);
  const Eigen::MatrixXd& q = model.responsibilities();
  std::vector<ClusterRow> rows;
  for (int k = 0; k < model.K(); ++k) {
    const ClusterHyper& h = model.hypers()[k];
    ClusterRow r{k, h.tau_sq, h.theta.values(), static_cast<int>((q.col(k).array() >= a.threshold).count()),
                 q.col(k).sum(), q.col(k).maxCoeff() >= a.threshold, h.active, h.degenerate};
    rows.push_back(r);
  }
  if (log) {
    *log << "cluster  used  nodes      mass        tau_sq  theta\n";
    for (const auto& r : rows) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "%7d  %4s  %5d  %8.3f  %12.5g ", r.k, r.used ? "yes" : "no", r.node_count, r.mass,
                    r.tau_sq);
      *log << buf;
      for (Eigen::Index i = 0; i < r.theta.size(); ++i) *log << ' ' << csv::format_double(r.theta[i]);
      *log << (r.degenerate ? "  (degenerate)" : "") << '\n';
    }
    *log << count_used_clusters(q, a.threshold) << " clusters reach max q >= " << a.threshold << '\n';
  }
  if (a.out) {
    fs::create_directories(*a.out);
    const Eigen::Index p = model.design().cols();
    Eigen::MatrixXd table(model.K(), 7 + p);
    std::vector<std::string> header{"cluster", "used", "node_count", "mass", "tau_sq", "active", "degenerate"};
    for (Eigen::Index i = 0; i < p; ++i) header.push_back("theta" + std::to_string(i + 1));
    for (const auto& r : rows) {
      table.row(r.k).head(7) << r.k, r.used, r.node_count, r.mass, r.tau_sq, r.active, r.degenerate;
      table.row(r.k).tail(p) = r.theta.transpose();
    }
    csv::write(*a.out / "clusters.csv", table, header);
    Eigen::MatrixXd nodes(q.rows(), 5);
    for (Eigen::Index j = 0; j < q.rows(); ++j) {
      Eigen::Index arg;
      const double best = q.row(j).maxCoeff(&arg);
      nodes.row(j) << static_cast<double>(j), model.nodes()(j, 0), model.nodes().cols() > 1 ? model.nodes()(j, 1) : 0.0,
          static_cast<double>(arg), best;
    }
    csv::write(*a.out / "node_clusters.csv", nodes, {"node", "s1", "s2", "cluster", "max_q"});
    csv::write(*a.out / "responsibilities.csv", q);
  }
  return rows;
}

// ------------------------------------------------------------- convergence

struct ConvergenceArgs {
  std::vector<int> n_grid{5, 10, 15, 20, 25};
  std::vector<double> h_grid{0.4, 0.2, 0.1, 0.05, 0.025};
  std::vector<int> nu_grid{1, 2, 3, 4, 5, 6};
  std::vector<int> r_grid{1, 2, 3, 4, 5, 6};
  int samples = 2000;
  RunConfig config;
  std::optional<fs::path> out;
};

struct ConvergenceCell {
  int n = 0;
  double h = 0.0;
  double h_x = 0.0;  // design spacing 2/(n-1)
  double h_t = 0.0;  // realised mesh pitch
  double error = 0.0;
  double fit_seconds = 0.0;
  int iterations = 0;
  int used_clusters = 0;
};

struct ConvergenceReport {
  std::vector<ConvergenceCell> cells;
  ConvergenceFit fit;
};

/// Monte Carlo L2 error of the emulated field mean over Omega x [-1, 1].
inline double emulator_l2_error(const FittedEmulator& model, const TriMesh& mesh, int samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double acc = 0.0;
  Eigen::Index hint = 0;
  Eigen::VectorXd x(1);
  for (int i = 0; i < samples; ++i) {
    const Eigen::Vector2d s(unit(rng), unit(rng));
    x[0] = -1.0 + 2.0 * unit(rng);
    const Location loc = locate(mesh, s, hint);
    hint = loc.element;
    const GaussianMoments g = predict_field(model, mesh, s, x, hint);
    const double d = g.mean - analytic_solution(s, x[0]);
    acc += d * d;
  }
  return std::sqrt(2.0 * acc / samples);
}

inline ConvergenceReport cmd_convergence(const ConvergenceArgs& a, std::ostream* log = nullptr) {
  a.config.validate();
  if (a.samples < 1) throw ValidationError("convergence: --samples must be >= 1");
  for (int n : a.n_grid)
    if (n < 2) throw ValidationError("convergence: every n must be >= 2");
  for (double h : a.h_grid)
    if (!(h > 0.0 && h <= 0.5)) throw ValidationError("convergence: every h must lie in (0, 0.5]");
  ConvergenceReport rep;
  std::vector<double> hx, ht, err;
  for (double h : a.h_grid)
    for (int n : a.n_grid) {
      const PoissonDataset ds = generate_dataset(h, linspace_design(n));
      const HyperPriors priors = a.config.make_priors(ds.mesh.nodes);
      const auto t0 = std::chrono::steady_clock::now();
      const FittedEmulator model = fit(ds.solutions, ds.inputs, ds.mesh.nodes, priors, a.config.mixture_config());
      ConvergenceCell c;
      c.n = n;
      c.h = h;
      c.h_x = 2.0 / (n - 1);
      c.h_t = ds.mesh.mesh_size;
      c.fit_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      c.iterations = model.diagnostics().iterations;
      c.used_clusters = count_used_clusters(model.responsibilities());
      c.error = emulator_l2_error(model, ds.mesh, a.samples, a.config.seed);
      rep.cells.push_back(c);
      hx.push_back(c.h_x);
      ht.push_back(c.h_t);
      err.push_back(c.error);
      if (log)
        *log << "n=" << n << " h=" << h << " N=" << ds.mesh.num_nodes() << " error=" << csv::format_double(c.error)
             << " fit=" << c.fit_seconds << "s\n";
    }
  rep.fit = convergence_regression(hx, ht, err, a.nu_grid, a.r_grid);
  if (a.out) {
    fs::create_directories(*a.out);
    Eigen::MatrixXd grid(static_cast<Eigen::Index>(rep.cells.size()), 3);
    for (std::size_t i = 0; i < rep.cells.size(); ++i)
      grid.row(static_cast<Eigen::Index>(i)) << rep.cells[i].h_x, rep.cells[i].h_t, rep.cells[i].error;
    csv::write(*a.out / "convergence_grid.csv", grid, {"h_X", "h_T", "error"});
    json cells = json::array();
    for (const auto& c : rep.cells)
      cells.push_back({{"n", c.n},
                       {"h", c.h},
                       {"h_X", c.h_x},
                       {"h_T", c.h_t},
                       {"error", c.error},
                       {"iterations", c.iterations},
                       {"used_clusters", c.used_clusters},
                       {"fit_seconds", c.fit_seconds}});
    jsonio::write_file(*a.out / "convergence.json",
                       json{{"a", rep.fit.a},
                            {"b", rep.fit.b},
                            {"nu", rep.fit.nu},
                            {"r", rep.fit.r},
                            {"r_squared", rep.fit.r_squared},
                            {"samples", a.samples},
                            {"seed", a.config.seed},
                            {"cells", cells}});
  }
  if (log)
    *log << "a=" << rep.fit.a << " b=" << rep.fit.b << " nu=" << rep.fit.nu << " r=" << rep.fit.r
         << " R^2=" << rep.fit.r_squared << '\n';
  return rep;
}

}  // namespace mcgp
