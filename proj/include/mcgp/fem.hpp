#pragma once

// Quadratic-element FEM for -Laplace(u) = f on the unit square with Dirichlet
// data, the parametric Poisson benchmark and its closed-form solution.

#include <array>
#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "mcgp/error.hpp"
#include "mcgp/mesh.hpp"
#include "mcgp/parallel.hpp"

namespace mcgp {

struct QuadraturePoint {
  Eigen::Vector3d bary;
  double weight;  // fraction of the element area
};

/// Symmetric 6-point triangle rule, exact for polynomials of degree 4.
inline const std::array<QuadraturePoint, 6>& triangle_rule6() {
  static const std::array<QuadraturePoint, 6> rule = [] {
    constexpr double a = 0.445948490915965, b = 0.108103018168070, wa = 0.223381589678011;
    constexpr double c = 0.091576213509771, d = 0.816847572980459, wc = 0.109951743655322;
    return std::array<QuadraturePoint, 6>{{{{a, a, b}, wa},
                                           {{a, b, a}, wa},
                                           {{b, a, a}, wa},
                                           {{c, c, d}, wc},
                                           {{c, d, c}, wc},
                                           {{d, c, c}, wc}}};
  }();
  return rule;
}

using SourceFn = std::function<double(const Eigen::Vector2d&)>;

/// Global stiffness matrix int grad(v_a) . grad(v_b), all N nodes.
inline Eigen::SparseMatrix<double> assemble_stiffness(const TriMesh& mesh) {
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(mesh.num_elements()) * 36);
  for (Eigen::Index e = 0; e < mesh.num_elements(); ++e) {
    const ElementGeometry g = element_geometry(mesh, e);
    Eigen::Matrix<double, 6, 6> ke = Eigen::Matrix<double, 6, 6>::Zero();
    for (const auto& q : triangle_rule6()) {
      const ShapeValues sv = shape_from_barycentric(g, q.bary);
      for (int a = 0; a < 6; ++a)
        for (int b = 0; b < 6; ++b) ke(a, b) += q.weight * g.area * sv.grad[a].dot(sv.grad[b]);
    }
    for (int a = 0; a < 6; ++a)
      for (int b = 0; b < 6; ++b) trips.emplace_back(mesh.elements(e, a), mesh.elements(e, b), ke(a, b));
  }
  Eigen::SparseMatrix<double> K(mesh.num_nodes(), mesh.num_nodes());
  K.setFromTriplets(trips.begin(), trips.end());
  return K;
}

/// Load vector int f v_a.
inline Eigen::VectorXd assemble_load(const TriMesh& mesh, const SourceFn& source) {
  Eigen::VectorXd F = Eigen::VectorXd::Zero(mesh.num_nodes());
  for (Eigen::Index e = 0; e < mesh.num_elements(); ++e) {
    const ElementGeometry g = element_geometry(mesh, e);
    for (const auto& q : triangle_rule6()) {
      const ShapeValues sv = shape_from_barycentric(g, q.bary);
      const Eigen::Vector2d s = g.vertices.transpose() * q.bary;
      const double fq = source(s) * q.weight * g.area;
      for (int a = 0; a < 6; ++a) F[mesh.elements(e, a)] += fq * sv.value[a];
    }
  }
  return F;
}

/// Factorized interior block of the stiffness matrix; solves many right-hand
/// sides on one mesh.
class DirichletSolver {
 public:
  explicit DirichletSolver(const TriMesh& mesh) : mesh_(&mesh), stiffness_(assemble_stiffness(mesh)) {
    const Eigen::Index N = mesh.num_nodes();
    interior_index_.assign(N, -1);
    for (Eigen::Index j = 0; j < N; ++j)
      if (!mesh.boundary[j]) interior_index_[j] = interior_count_++;
    std::vector<Eigen::Triplet<double>> ii, ib;
    for (int col = 0; col < stiffness_.outerSize(); ++col)
      for (Eigen::SparseMatrix<double>::InnerIterator it(stiffness_, col); it; ++it) {
        const Eigen::Index r = interior_index_[it.row()];
        if (r < 0) continue;
        const Eigen::Index c = interior_index_[it.col()];
        if (c >= 0) ii.emplace_back(r, c, it.value());
        else ib.emplace_back(r, it.col(), it.value());
      }
    Eigen::SparseMatrix<double> Kii(interior_count_, interior_count_);
    Kii.setFromTriplets(ii.begin(), ii.end());
    coupling_.resize(interior_count_, N);
    coupling_.setFromTriplets(ib.begin(), ib.end());
    if (interior_count_ > 0) {
      chol_.compute(Kii);
      if (chol_.info() != Eigen::Success) throw MeshError("stiffness matrix is singular after boundary elimination");
    }
  }

  [[nodiscard]] const Eigen::SparseMatrix<double>& stiffness() const { return stiffness_; }

  /// Solves -Laplace(u) = source with u = boundary_value on boundary nodes.
  [[nodiscard]] Eigen::VectorXd solve(const SourceFn& source, const SourceFn& boundary_value) const {
    const TriMesh& mesh = *mesh_;
    const Eigen::Index N = mesh.num_nodes();
    Eigen::VectorXd u = Eigen::VectorXd::Zero(N);
    for (Eigen::Index j = 0; j < N; ++j)
      if (mesh.boundary[j]) u[j] = boundary_value(mesh.nodes.row(j).transpose());
    if (interior_count_ == 0) return u;
    const Eigen::VectorXd F = assemble_load(mesh, source);
    Eigen::VectorXd rhs(interior_count_);
    for (Eigen::Index j = 0; j < N; ++j)
      if (interior_index_[j] >= 0) rhs[interior_index_[j]] = F[j];
    rhs -= coupling_ * u;
    const Eigen::VectorXd ui = chol_.solve(rhs);
    if (chol_.info() != Eigen::Success) throw MeshError("FEM solve failed");
    for (Eigen::Index j = 0; j < N; ++j)
      if (interior_index_[j] >= 0) u[j] = ui[interior_index_[j]];
    return u;
  }

 private:
  const TriMesh* mesh_;
  Eigen::SparseMatrix<double> stiffness_;
  Eigen::SparseMatrix<double> coupling_;  // interior rows, all-node columns
  std::vector<Eigen::Index> interior_index_;
  Eigen::Index interior_count_ = 0;
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> chol_;
};

/// u0(s, x) = exp(x s1) sin(pi s1) sin(pi s2).
inline double analytic_solution(const Eigen::Vector2d& s, double x) {
  return std::exp(x * s[0]) * std::sin(std::numbers::pi * s[0]) * std::sin(std::numbers::pi * s[1]);
}

/// Laplace(u0) for the benchmark: (x^2 - 2 pi^2) e^{x s1} sin(pi s1) sin(pi s2)
/// + 2 x pi e^{x s1} cos(pi s1) sin(pi s2).
inline double poisson_laplacian(const Eigen::Vector2d& s, double x) {
  constexpr double pi = std::numbers::pi;
  const double ex = std::exp(x * s[0]);
  return (x * x - 2.0 * pi * pi) * ex * std::sin(pi * s[0]) * std::sin(pi * s[1]) +
         2.0 * x * pi * ex * std::cos(pi * s[0]) * std::sin(pi * s[1]);
}

inline void check_poisson_input(double x) {
  if (!std::isfinite(x) || x < -1.0 || x > 1.0) throw InvalidArgument("solve_poisson: input must lie in [-1, 1]");
}

inline Eigen::VectorXd solve_poisson(const DirichletSolver& solver, double x) {
  check_poisson_input(x);
  return solver.solve([x](const Eigen::Vector2d& s) { return -poisson_laplacian(s, x); },
                      [](const Eigen::Vector2d&) { return 0.0; });
}

inline Eigen::VectorXd solve_poisson(const TriMesh& mesh, double x) {
  check_poisson_input(x);
  return solve_poisson(DirichletSolver(mesh), x);
}

/// ||u_h - exact||_{L2} with the 6-point rule on each element split into 4.
inline double l2_error(const TriMesh& mesh, const Eigen::VectorXd& u, const SourceFn& exact) {
  static const std::array<std::array<Eigen::Vector3d, 3>, 4> sub = [] {
    const Eigen::Vector3d v1(1, 0, 0), v2(0, 1, 0), v3(0, 0, 1);
    const Eigen::Vector3d m12 = 0.5 * (v1 + v2), m23 = 0.5 * (v2 + v3), m13 = 0.5 * (v1 + v3);
    return std::array<std::array<Eigen::Vector3d, 3>, 4>{
        {{v1, m12, m13}, {m12, v2, m23}, {m13, m23, v3}, {m12, m23, m13}}};
  }();
  double acc = 0.0;
  for (Eigen::Index e = 0; e < mesh.num_elements(); ++e) {
    const ElementGeometry g = element_geometry(mesh, e);
    for (const auto& tri : sub)
      for (const auto& q : triangle_rule6()) {
        const Eigen::Vector3d xi = q.bary[0] * tri[0] + q.bary[1] * tri[1] + q.bary[2] * tri[2];
        const ShapeValues sv = shape_from_barycentric(g, xi);
        double uh = 0.0;
        for (int a = 0; a < 6; ++a) uh += sv.value[a] * u[mesh.elements(e, a)];
        const Eigen::Vector2d s = g.vertices.transpose() * xi;
        const double diff = uh - exact(s);
        acc += q.weight * 0.25 * g.area * diff * diff;
      }
  }
  return std::sqrt(acc);
}

/// x_i = -1 + (2i - 1)/n: n equal cells of [-1, 1], one point at each centre.
inline std::vector<double> equispaced_design(int n) {
  if (n < 1) throw InvalidArgument("equispaced_design: n must be >= 1");
  std::vector<double> x(n);
  for (int i = 1; i <= n; ++i) x[i - 1] = -1.0 + (2.0 * i - 1.0) / n;
  return x;
}

/// n points from -1 to 1 inclusive.
inline std::vector<double> linspace_design(int n) {
  if (n < 1) throw InvalidArgument("linspace_design: n must be >= 1");
  if (n == 1) return {0.0};
  std::vector<double> x(n);
  for (int i = 0; i < n; ++i) x[i] = -1.0 + 2.0 * i / (n - 1);
  return x;
}

struct PoissonDataset {
  TriMesh mesh;
  Eigen::MatrixXd inputs;     // n x 1
  Eigen::MatrixXd solutions;  // N x n, row j = node j
  bool analytic_available = true;
};

inline PoissonDataset generate_dataset(double h, const std::vector<double>& inputs) {
  if (inputs.empty()) throw InvalidArgument("generate_dataset: no inputs");
  PoissonDataset ds;
  ds.mesh = build_mesh(h);
  const DirichletSolver solver(ds.mesh);
  const auto n = static_cast<Eigen::Index>(inputs.size());
  ds.inputs.resize(n, 1);
  ds.solutions.resize(ds.mesh.num_nodes(), n);
  for (Eigen::Index i = 0; i < n; ++i) ds.inputs(i, 0) = inputs[i];
  parallel_for(inputs.size(), [&](std::size_t i) {
    ds.solutions.col(static_cast<Eigen::Index>(i)) = solve_poisson(solver, inputs[i]);
  });
  return ds;
}

}  // namespace mcgp
