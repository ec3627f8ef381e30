#pragma once

// On-disk formats: dataset directories (five CSVs plus manifest.json) and
// model directories (model.json plus CSV sidecars). See docs/file_formats.md.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include "json.hpp"

#include "mcgp/baselines.hpp"
#include "mcgp/csv.hpp"
#include "mcgp/emulator.hpp"
#include "mcgp/error.hpp"
#include "mcgp/fem.hpp"
#include "mcgp/mesh.hpp"
#include "mcgp/mixture.hpp"

namespace mcgp {

inline constexpr int kModelFormatVersion = 1;
inline constexpr int kDatasetFormatVersion = 1;
inline constexpr const char* kGeneratorVersion = "mcgp-femgen 1";

using json = nlohmann::json;

namespace jsonio {

inline json vec(const Eigen::VectorXd& v) { return std::vector<double>(v.begin(), v.end()); }

inline json mat(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Eigen::VectorXd to_vec(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline Eigen::MatrixXd to_mat(const json& j) {
  if (!j.is_array()) throw LoadError("expected a matrix (array of rows)");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const Eigen::Index cols = rows ? static_cast<Eigen::Index>(j[0].size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto row = j[static_cast<std::size_t>(r)].get<std::vector<double>>();
    if (static_cast<Eigen::Index>(row.size()) != cols) throw LoadError("ragged matrix in model file");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)];
  }
  return m;
}

inline void write_file(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << j.dump(2) << '\n';
  if (!out) throw Error("write to '" + path.string() + "' failed");
}

inline json read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw LoadError(path.filename().string() + ": malformed JSON (" + e.what() + ")");
  }
}

}  // namespace jsonio

// ---------------------------------------------------------------- datasets

struct DatasetFiles {
  PoissonDataset data;
  std::optional<double> h;  // generator target mesh size, if known
  std::uint64_t seed = 0;
};

inline void save_dataset(const PoissonDataset& ds, const std::filesystem::path& dir, double h,
                         std::uint64_t seed = 0, bool header = false) {
  std::filesystem::create_directories(dir);
  const auto N = ds.mesh.num_nodes();
  const auto n = ds.inputs.rows();
  auto names = [](const std::string& stem, Eigen::Index count) {
    std::vector<std::string> v;
    for (Eigen::Index i = 1; i <= count; ++i) v.push_back(stem + std::to_string(i));
    return v;
  };
  using H = std::vector<std::string>;
  csv::write(dir / "nodes.csv", ds.mesh.nodes, header ? H{"s1", "s2"} : H{});
  csv::write(dir / "elements.csv", ds.mesh.elements, header ? names("v", 6) : H{});
  Eigen::VectorXi boundary(N);
  for (Eigen::Index j = 0; j < N; ++j) boundary[j] = ds.mesh.boundary[static_cast<std::size_t>(j)];
  csv::write(dir / "boundary.csv", boundary, header ? H{"boundary"} : H{});
  csv::write(dir / "inputs.csv", ds.inputs, header ? names("x", ds.inputs.cols()) : H{});
  csv::write(dir / "solutions.csv", ds.solutions, header ? names("input", n) : H{});
  json manifest{{"format", "mcgp-dataset"},
                {"version", kDatasetFormatVersion},
                {"generator", kGeneratorVersion},
                {"h", h},
                {"mesh_size", ds.mesh.mesh_size},
                {"n", n},
                {"N", N},
                {"p", ds.inputs.cols()},
                {"elements", ds.mesh.num_elements()},
                {"seed", seed},
                {"analytic_available", ds.analytic_available}};
  jsonio::write_file(dir / "manifest.json", manifest);
}

/// Reads and cross-checks a dataset directory; shape problems raise
/// ValidationError naming the offending file.
inline DatasetFiles load_dataset(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw ValidationError("dataset directory '" + dir.string() + "' not found");
  DatasetFiles out;
  PoissonDataset& ds = out.data;
  ds.mesh.nodes = csv::read(dir / "nodes.csv");
  const Eigen::Index N = ds.mesh.nodes.rows();
  if (N == 0 || ds.mesh.nodes.cols() != 2) throw ValidationError("nodes.csv: expected N rows of 2 coordinates");
  if (!ds.mesh.nodes.allFinite()) throw ValidationError("nodes.csv: non-finite coordinate");

  const Eigen::MatrixXd el = csv::read(dir / "elements.csv");
  if (el.cols() != 6 || el.rows() == 0) throw ValidationError("elements.csv: expected rows of 6 node indices");
  ds.mesh.elements.resize(el.rows(), 6);
  for (Eigen::Index e = 0; e < el.rows(); ++e)
    for (int a = 0; a < 6; ++a) {
      const double v = el(e, a);
      if (v != std::floor(v) || v < 0 || v >= static_cast<double>(N))
        throw ValidationError("elements.csv: row " + std::to_string(e + 1) + " has an invalid node index");
      ds.mesh.elements(e, a) = static_cast<int>(v);
    }

  const Eigen::MatrixXd bd = csv::read(dir / "boundary.csv");
  if (bd.rows() != N || bd.cols() != 1) throw ValidationError("boundary.csv: expected " + std::to_string(N) + " rows");
  ds.mesh.boundary.resize(static_cast<std::size_t>(N));
  for (Eigen::Index j = 0; j < N; ++j) {
    if (bd(j, 0) != 0.0 && bd(j, 0) != 1.0) throw ValidationError("boundary.csv: entries must be 0 or 1");
    ds.mesh.boundary[static_cast<std::size_t>(j)] = bd(j, 0) != 0.0;
  }

  ds.inputs = csv::read(dir / "inputs.csv");
  if (ds.inputs.rows() == 0) throw ValidationError("inputs.csv: no inputs");
  ds.solutions = csv::read(dir / "solutions.csv");
  if (ds.solutions.rows() != N)
    throw ValidationError("solutions.csv: " + std::to_string(ds.solutions.rows()) + " rows, expected N = " +
                          std::to_string(N));
  if (ds.solutions.cols() != ds.inputs.rows())
    throw ValidationError("solutions.csv: " + std::to_string(ds.solutions.cols()) + " columns, expected n = " +
                          std::to_string(ds.inputs.rows()));
  if (!ds.solutions.allFinite()) throw ValidationError("solutions.csv: non-finite value");

  compute_adjacency(ds.mesh);
  if (std::filesystem::exists(dir / "manifest.json")) {
    const json m = jsonio::read_file(dir / "manifest.json");
    if (m.contains("h") && m["h"].is_number()) out.h = m["h"].get<double>();
    if (m.contains("mesh_size") && m["mesh_size"].is_number()) ds.mesh.mesh_size = m["mesh_size"].get<double>();
    if (m.contains("seed") && m["seed"].is_number_unsigned()) out.seed = m["seed"].get<std::uint64_t>();
    if (m.contains("analytic_available")) ds.analytic_available = m["analytic_available"].get<bool>();
  }
  return out;
}

// ------------------------------------------------------------------ models

/// Provenance stored next to the fitted parameters.
struct ModelMeta {
  std::optional<double> mesh_h;  // generator mesh size of the training dataset
  std::uint64_t seed = 0;
};

struct LoadedModel {
  std::variant<FittedEmulator, BaselineModel> model;
  ModelMeta meta;

  [[nodiscard]] bool is_mcgp() const { return model.index() == 0; }
  [[nodiscard]] std::string type() const {
    return is_mcgp() ? "mcgp" : to_string(std::get<BaselineModel>(model).type());
  }
  [[nodiscard]] const Eigen::MatrixXd& design() const {
    return std::visit([](const auto& m) -> const Eigen::MatrixXd& { return m.design(); }, model);
  }
  [[nodiscard]] const Eigen::MatrixXd& nodes() const {
    return std::visit([](const auto& m) -> const Eigen::MatrixXd& { return m.nodes(); }, model);
  }
};

namespace detail {

inline json meta_json(const ModelMeta& meta) {
  return json{{"mesh_h", meta.mesh_h ? json(*meta.mesh_h) : json(nullptr)}, {"seed", meta.seed}};
}

inline json header_json(const std::string& type, double nugget, const Eigen::MatrixXd& design,
                        const Eigen::MatrixXd& nodes, const ModelMeta& meta) {
  return json{{"format", "mcgp-model"}, {"version", kModelFormatVersion}, {"type", type},
              {"nugget", nugget},       {"meta", meta_json(meta)},        {"design", jsonio::mat(design)},
              {"nodes", jsonio::mat(nodes)}};
}

}  // namespace detail

inline void save_model(const FittedEmulator& m, const std::filesystem::path& dir, const ModelMeta& meta = {}) {
  std::filesystem::create_directories(dir);
  json j = detail::header_json("mcgp", m.nugget(), m.design(), m.nodes(), meta);
  const HyperPriors& p = m.priors();
  j["priors"] = {{"alpha0", p.alpha0}, {"mu0", jsonio::vec(p.mu0)},         {"Sigma0", jsonio::mat(p.Sigma0)},
                 {"W0", jsonio::mat(p.W0)}, {"kappa0", p.kappa0}, {"K", p.K}, {"regularized", p.regularized}};
  const VariationalState& st = m.state();
  json means = json::array(), precisions = json::array(), scales = json::array();
  for (int k = 0; k < st.K(); ++k) {
    means.push_back(jsonio::vec(st.means[k]));
    precisions.push_back(jsonio::mat(st.precisions[k]));
    scales.push_back(jsonio::mat(st.wishart_scales[k]));
  }
  j["state"] = {{"beta_a", jsonio::vec(st.beta_a)}, {"beta_b", jsonio::vec(st.beta_b)},
                {"means", means},                   {"precisions", precisions},
                {"wishart_scales", scales},         {"wishart_dofs", jsonio::vec(st.wishart_dofs)}};
  json clusters = json::array();
  for (const auto& h : m.hypers())
    clusters.push_back({{"theta", jsonio::vec(h.theta.values())},
                        {"tau_sq", h.tau_sq},
                        {"active", h.active},
                        {"degenerate", h.degenerate}});
  j["clusters"] = clusters;
  const FitDiagnostics& d = m.diagnostics();
  j["fit"] = {{"converged", d.converged},
              {"iterations", d.iterations},
              {"uniform_row_fallbacks", d.uniform_row_fallbacks},
              {"elbo_trace", d.elbo_trace}};
  jsonio::write_file(dir / "model.json", j);
  csv::write(dir / "responsibilities.csv", m.responsibilities());
  csv::write(dir / "solutions.csv", m.solutions());
}

inline void save_model(const BaselineModel& m, const std::filesystem::path& dir, const ModelMeta& meta = {}) {
  std::filesystem::create_directories(dir);
  json j = detail::header_json(to_string(m.type()), m.nugget(), m.design(), m.nodes(), meta);
  json outputs = json::array();
  for (const auto& h : m.hypers())
    outputs.push_back({{"theta", jsonio::vec(h.theta.values())}, {"tau_sq", h.tau_sq}, {"degenerate", h.degenerate}});
  j["outputs"] = outputs;
  if (m.type() == BaselineType::pcagp) {
    const PcaBasis& p = m.pca();
    j["pca"] = {{"mean_field", jsonio::vec(p.mean_field)},
                {"components", jsonio::mat(p.components)},
                {"scores", jsonio::mat(p.scores)},
                {"explained_variance_ratios", jsonio::vec(p.explained_variance_ratios)},
                {"all_ratios", jsonio::vec(p.all_ratios)}};
  }
  jsonio::write_file(dir / "model.json", j);
  csv::write(dir / "solutions.csv", m.solutions());
}

namespace detail {

inline Lengthscales read_theta(const json& j, Eigen::Index p) {
  Eigen::VectorXd v = jsonio::to_vec(j);
  if (v.size() != p) throw LoadError("lengthscale dimension does not match the design");
  return Lengthscales(std::move(v));
}

inline LoadedModel load_model_impl(const std::filesystem::path& dir) {
  const json j = jsonio::read_file(dir / "model.json");
  if (!j.is_object() || j.value("format", std::string{}) != "mcgp-model")
    throw LoadError("model.json: not an mcgp model file");
  if (j.at("version").get<int>() != kModelFormatVersion)
    throw LoadError("model.json: unsupported format version " + j.at("version").dump() + " (expected " +
                    std::to_string(kModelFormatVersion) + ")");
  const std::string type = j.at("type").get<std::string>();
  const double nugget = j.at("nugget").get<double>();
  Eigen::MatrixXd design = jsonio::to_mat(j.at("design"));
  Eigen::MatrixXd nodes = jsonio::to_mat(j.at("nodes"));
  const Eigen::Index p = design.cols();
  ModelMeta meta;
  const json& mj = j.at("meta");
  if (mj.at("mesh_h").is_number()) meta.mesh_h = mj.at("mesh_h").get<double>();
  meta.seed = mj.at("seed").get<std::uint64_t>();

  Eigen::MatrixXd B;
  try {
    B = csv::read(dir / "solutions.csv");
  } catch (const ValidationError& e) {
    throw LoadError(std::string("solutions.csv: ") + e.what());
  }
  if (B.rows() != nodes.rows() || B.cols() != design.rows())
    throw LoadError("solutions.csv: shape " + std::to_string(B.rows()) + "x" + std::to_string(B.cols()) +
                    " does not match the model (" + std::to_string(nodes.rows()) + "x" +
                    std::to_string(design.rows()) + ")");

  if (type == "mcgp") {
    HyperPriors pr;
    const json& pj = j.at("priors");
    pr.alpha0 = pj.at("alpha0").get<double>();
    pr.mu0 = jsonio::to_vec(pj.at("mu0"));
    pr.Sigma0 = jsonio::to_mat(pj.at("Sigma0"));
    pr.W0 = jsonio::to_mat(pj.at("W0"));
    pr.kappa0 = pj.at("kappa0").get<double>();
    pr.K = pj.at("K").get<int>();
    pr.regularized = pj.at("regularized").get<bool>();

    VariationalState st;
    const json& sj = j.at("state");
    st.beta_a = jsonio::to_vec(sj.at("beta_a"));
    st.beta_b = jsonio::to_vec(sj.at("beta_b"));
    for (const auto& v : sj.at("means")) st.means.push_back(jsonio::to_vec(v));
    for (const auto& v : sj.at("precisions")) st.precisions.push_back(jsonio::to_mat(v));
    for (const auto& v : sj.at("wishart_scales")) st.wishart_scales.push_back(jsonio::to_mat(v));
    st.wishart_dofs = jsonio::to_vec(sj.at("wishart_dofs"));
    try {
      st.resp = csv::read(dir / "responsibilities.csv");
    } catch (const ValidationError& e) {
      throw LoadError(std::string("responsibilities.csv: ") + e.what());
    }
    std::vector<ClusterHyper> hypers;
    for (const auto& c : j.at("clusters"))
      hypers.push_back({read_theta(c.at("theta"), p), c.at("tau_sq").get<double>(), c.at("active").get<bool>(),
                        c.at("degenerate").get<bool>()});
    const auto K = static_cast<Eigen::Index>(hypers.size());
    if (st.resp.rows() != B.rows() || st.resp.cols() != K)
      throw LoadError("responsibilities.csv: shape does not match the model");
    if (static_cast<Eigen::Index>(st.means.size()) != K || static_cast<Eigen::Index>(st.precisions.size()) != K ||
        static_cast<Eigen::Index>(st.wishart_scales.size()) != K || st.wishart_dofs.size() != K ||
        st.beta_a.size() != std::max<Eigen::Index>(K - 1, 0) || st.beta_b.size() != st.beta_a.size())
      throw LoadError("model.json: variational state does not match the cluster count");

    FittedEmulator model(std::move(design), std::move(B), std::move(nodes), std::move(pr), std::move(st),
                         std::move(hypers), nugget);
    FitDiagnostics d;
    const json& fj = j.at("fit");
    d.converged = fj.at("converged").get<bool>();
    d.iterations = fj.at("iterations").get<int>();
    d.uniform_row_fallbacks = fj.at("uniform_row_fallbacks").get<int>();
    d.elbo_trace = fj.at("elbo_trace").get<std::vector<double>>();
    model.set_diagnostics(std::move(d));
    return {std::move(model), meta};
  }

  const BaselineType bt = baseline_type_from_string(type);
  std::vector<OutputHyper> hypers;
  for (const auto& o : j.at("outputs"))
    hypers.push_back({read_theta(o.at("theta"), p), o.at("tau_sq").get<double>(), o.at("degenerate").get<bool>()});
  PcaBasis pca;
  if (bt == BaselineType::pcagp) {
    const json& cj = j.at("pca");
    pca.mean_field = jsonio::to_vec(cj.at("mean_field"));
    pca.components = jsonio::to_mat(cj.at("components"));
    pca.scores = jsonio::to_mat(cj.at("scores"));
    pca.explained_variance_ratios = jsonio::to_vec(cj.at("explained_variance_ratios"));
    pca.all_ratios = jsonio::to_vec(cj.at("all_ratios"));
    const Eigen::Index M = static_cast<Eigen::Index>(hypers.size());
    if (M == 0) {
      pca.components.resize(B.rows(), 0);
      pca.scores.resize(design.rows(), 0);
    }
    if (pca.components.rows() != B.rows() || pca.components.cols() != M || pca.scores.cols() != M)
      throw LoadError("model.json: PCA basis does not match the outputs");
  }
  return {BaselineModel(bt, std::move(design), std::move(B), std::move(nodes), std::move(hypers), nugget,
                        std::move(pca)),
          meta};
}

}  // namespace detail

/// Loads any model directory written by save_model. Every structural problem
/// (missing or truncated files, wrong version, inconsistent shapes) surfaces
/// as LoadError; no partially built model escapes.
inline LoadedModel load_model(const std::filesystem::path& dir) {
  try {
    return detail::load_model_impl(dir);
  } catch (const LoadError&) {
    throw;
  } catch (const json::exception& e) {
    throw LoadError(std::string("model.json: ") + e.what());
  } catch (const Error& e) {
    throw LoadError(std::string("invalid model: ") + e.what());
  }
}

}  // namespace mcgp
