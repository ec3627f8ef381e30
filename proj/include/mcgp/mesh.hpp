#pragma once

// Six-node quadratic triangles on the unit square: construction, element
// geometry, quadratic shape functions and point location.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mcgp/error.hpp"

namespace mcgp {

using ElementMatrix = Eigen::Matrix<int, Eigen::Dynamic, 6, Eigen::RowMajor>;

/// Nodes (N x 2), elements (E x 6: vertices 1-3 counter-clockwise, then the
/// midsides of edges (1,2), (2,3), (1,3)), boundary flags and the grid pitch.
struct TriMesh {
  Eigen::MatrixXd nodes;
  ElementMatrix elements;
  std::vector<std::uint8_t> boundary;
  double mesh_size = 0.0;
  /// neighbors(e, i): element across the edge opposite vertex i, or -1.
  Eigen::Matrix<int, Eigen::Dynamic, 3, Eigen::RowMajor> neighbors;

  [[nodiscard]] Eigen::Index num_nodes() const { return nodes.rows(); }
  [[nodiscard]] Eigen::Index num_elements() const { return elements.rows(); }
};

inline void compute_adjacency(TriMesh& mesh) {
  const Eigen::Index E = mesh.num_elements();
  mesh.neighbors.setConstant(E, 3, -1);
  std::map<std::pair<int, int>, std::pair<int, int>> edge_owner;  // edge -> (element, local opposite vertex)
  for (Eigen::Index e = 0; e < E; ++e) {
    for (int i = 0; i < 3; ++i) {
      int a = mesh.elements(e, (i + 1) % 3);
      int b = mesh.elements(e, (i + 2) % 3);
      if (a > b) std::swap(a, b);
      auto [it, inserted] = edge_owner.try_emplace({a, b}, static_cast<int>(e), i);
      if (!inserted) {
        mesh.neighbors(e, i) = it->second.first;
        mesh.neighbors(it->second.first, it->second.second) = static_cast<int>(e);
      }
    }
  }
}

/// Structured triangulation of [0,1]^2: ceil(1/h) square cells per side, each
/// split along its lower-left/upper-right diagonal, with midside nodes. Nodes
/// are the (2m+1)^2 points of the half-pitch lattice, numbered row by row.
inline TriMesh build_mesh(double h) {
  if (!(h > 0.0 && h <= 0.5)) throw InvalidArgument("build_mesh: h must lie in (0, 0.5]");
  const int m = static_cast<int>(std::ceil(1.0 / h - 1e-9));
  const int side = 2 * m + 1;
  TriMesh mesh;
  mesh.mesh_size = 1.0 / m;
  mesh.nodes.resize(static_cast<Eigen::Index>(side) * side, 2);
  mesh.boundary.assign(static_cast<std::size_t>(side) * side, 0);
  auto id = [side](int col, int row) { return row * side + col; };
  for (int row = 0; row < side; ++row)
    for (int col = 0; col < side; ++col) {
      const int k = id(col, row);
      mesh.nodes(k, 0) = static_cast<double>(col) / (2.0 * m);
      mesh.nodes(k, 1) = static_cast<double>(row) / (2.0 * m);
      mesh.boundary[k] = (col == 0 || row == 0 || col == side - 1 || row == side - 1) ? 1 : 0;
    }
  mesh.elements.resize(2 * m * m, 6);
  int e = 0;
  for (int j = 0; j < m; ++j)
    for (int i = 0; i < m; ++i) {
      const int c = 2 * i;
      const int r = 2 * j;
      // lower-right triangle: LL, LR, UR
      mesh.elements.row(e++) << id(c, r), id(c + 2, r), id(c + 2, r + 2), id(c + 1, r), id(c + 2, r + 1),
          id(c + 1, r + 1);
      // upper-left triangle: LL, UR, UL
      mesh.elements.row(e++) << id(c, r), id(c + 2, r + 2), id(c, r + 2), id(c + 1, r + 1), id(c + 1, r + 2),
          id(c, r + 1);
    }
  compute_adjacency(mesh);
  return mesh;
}

/// Affine data of one element: barycentric xi_i(s) = a_i + b_i s1 + c_i s2.
struct ElementGeometry {
  Eigen::Matrix<double, 3, 2> vertices;
  Eigen::Matrix<double, 3, 2> grad_xi;  // row i = (b_i, c_i)
  Eigen::Vector3d offset;               // a_i
  double area = 0.0;
};

inline ElementGeometry element_geometry(const TriMesh& mesh, Eigen::Index e) {
  ElementGeometry g;
  for (int i = 0; i < 3; ++i) g.vertices.row(i) = mesh.nodes.row(mesh.elements(e, i));
  const double x1 = g.vertices(0, 0), y1 = g.vertices(0, 1);
  const double x2 = g.vertices(1, 0), y2 = g.vertices(1, 1);
  const double x3 = g.vertices(2, 0), y3 = g.vertices(2, 1);
  const double det = (x2 - x1) * (y3 - y1) - (x3 - x1) * (y2 - y1);
  if (!(std::abs(det) > 1e-14) || !std::isfinite(det))
    throw MeshError("element " + std::to_string(e) + " has zero area");
  g.area = 0.5 * std::abs(det);
  g.offset << (x2 * y3 - x3 * y2) / det, (x3 * y1 - x1 * y3) / det, (x1 * y2 - x2 * y1) / det;
  g.grad_xi << (y2 - y3) / det, (x3 - x2) / det, (y3 - y1) / det, (x1 - x3) / det, (y1 - y2) / det,
      (x2 - x1) / det;
  return g;
}

inline Eigen::Vector3d barycentric(const ElementGeometry& g, const Eigen::Vector2d& s) {
  return g.offset + g.grad_xi * s;
}

struct ShapeValues {
  std::array<double, 6> value{};
  std::array<Eigen::Vector2d, 6> grad{};
};

/// Quadratic shape functions from barycentric coordinates:
/// v_i = xi_i(2 xi_i - 1) for the vertices, 4 xi_a xi_b for the midsides.
inline ShapeValues shape_from_barycentric(const ElementGeometry& g, const Eigen::Vector3d& xi) {
  ShapeValues out;
  const Eigen::Vector2d d0 = g.grad_xi.row(0).transpose();
  const Eigen::Vector2d d1 = g.grad_xi.row(1).transpose();
  const Eigen::Vector2d d2 = g.grad_xi.row(2).transpose();
  const std::array<Eigen::Vector2d, 3> dxi{d0, d1, d2};
  for (int i = 0; i < 3; ++i) {
    out.value[i] = xi[i] * (2.0 * xi[i] - 1.0);
    out.grad[i] = (4.0 * xi[i] - 1.0) * dxi[i];
  }
  constexpr std::array<std::pair<int, int>, 3> mids{{{0, 1}, {1, 2}, {0, 2}}};
  for (int m = 0; m < 3; ++m) {
    const auto [a, b] = mids[m];
    out.value[3 + m] = 4.0 * xi[a] * xi[b];
    out.grad[3 + m] = 4.0 * (xi[b] * dxi[a] + xi[a] * dxi[b]);
  }
  return out;
}

inline ShapeValues shape_functions(const TriMesh& mesh, Eigen::Index e, const Eigen::Vector2d& s) {
  const ElementGeometry g = element_geometry(mesh, e);
  return shape_from_barycentric(g, barycentric(g, s));
}

struct Location {
  Eigen::Index element = -1;
  Eigen::Vector3d bary = Eigen::Vector3d::Zero();
};

/// Walks through element adjacency from `hint`, falling back to a scan of
/// every element. Throws OutOfDomain with the nearest element otherwise.
inline Location locate(const TriMesh& mesh, const Eigen::Vector2d& s, Eigen::Index hint = 0, double tol = 1e-12) {
  const Eigen::Index E = mesh.num_elements();
  if (E == 0) throw MeshError("locate: empty mesh");
  if (!s.allFinite()) throw InvalidArgument("locate: non-finite point");
  Eigen::Index e = (hint >= 0 && hint < E) ? hint : 0;
  for (Eigen::Index step = 0; step <= E; ++step) {
    const Eigen::Vector3d xi = barycentric(element_geometry(mesh, e), s);
    Eigen::Index worst;
    if (xi.minCoeff(&worst) >= -tol) return {e, xi};
    const int next = mesh.neighbors.rows() == E ? mesh.neighbors(e, worst) : -1;
    if (next < 0) break;
    e = next;
  }
  Eigen::Index nearest = 0;
  double nearest_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < E; ++k) {
    const ElementGeometry g = element_geometry(mesh, k);
    const Eigen::Vector3d xi = barycentric(g, s);
    if (xi.minCoeff() >= -tol) return {k, xi};
    const double dist = (g.vertices.colwise().mean().transpose() - s).norm();
    if (dist < nearest_d) {
      nearest_d = dist;
      nearest = k;
    }
  }
  throw OutOfDomain("point (" + std::to_string(s[0]) + ", " + std::to_string(s[1]) +
                        ") lies outside the mesh; nearest element " + std::to_string(nearest),
                    nearest);
}

/// Evaluates sum_j u_j v_j(s) on the containing element.
inline double evaluate_field(const TriMesh& mesh, const Eigen::VectorXd& u, const Eigen::Vector2d& s,
                             Eigen::Index hint = 0) {
  const Location loc = locate(mesh, s, hint);
  const ShapeValues sv = shape_from_barycentric(element_geometry(mesh, loc.element), loc.bary);
  double acc = 0.0;
  for (int i = 0; i < 6; ++i) acc += sv.value[i] * u[mesh.elements(loc.element, i)];
  return acc;
}

}  // namespace mcgp
