#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "mcgp/fem.hpp"

using namespace mcgp;

TEST(Shape, KroneckerDeltaAtElementNodes) {
  const TriMesh mesh = build_mesh(0.5);
  for (Eigen::Index e = 0; e < mesh.num_elements(); ++e)
    for (int a = 0; a < 6; ++a) {
      const Eigen::Vector2d s = mesh.nodes.row(mesh.elements(e, a)).transpose();
      const ShapeValues sv = shape_functions(mesh, e, s);
      for (int b = 0; b < 6; ++b) EXPECT_NEAR(sv.value[b], a == b ? 1.0 : 0.0, 1e-13);
    }
}

TEST(Shape, PartitionOfUnityAndQuadraticReproduction) {
  const TriMesh mesh = build_mesh(0.25);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto q = [](const Eigen::Vector2d& s) { return 0.3 + s[0] - 2.0 * s[1] + s[0] * s[0] - 0.7 * s[0] * s[1] + 3.0 * s[1] * s[1]; };
  Eigen::VectorXd qn(mesh.num_nodes());
  for (Eigen::Index i = 0; i < qn.size(); ++i) qn[i] = q(mesh.nodes.row(i).transpose());
  for (int t = 0; t < 10; ++t) {
    const Eigen::Vector2d s(u(rng), u(rng));
    const Location loc = locate(mesh, s);
    const ShapeValues sv = shape_functions(mesh, loc.element, s);
    double sum = 0.0;
    Eigen::Vector2d gsum = Eigen::Vector2d::Zero();
    for (int a = 0; a < 6; ++a) {
      sum += sv.value[a];
      gsum += sv.grad[a];
    }
    EXPECT_NEAR(sum, 1.0, 1e-13);
    EXPECT_LT(gsum.norm(), 1e-11);
    EXPECT_NEAR(evaluate_field(mesh, qn, s), q(s), 1e-12);
  }
}

TEST(Mesh, CoarseMeshCounts) {
  const TriMesh mesh = build_mesh(0.5);
  EXPECT_EQ(mesh.num_elements(), 8);
  EXPECT_EQ(mesh.num_nodes(), 25);
  EXPECT_DOUBLE_EQ(mesh.mesh_size, 0.5);
  int boundary = 0;
  for (auto b : mesh.boundary) boundary += b;
  EXPECT_EQ(boundary, 16);
}

TEST(Mesh, RealisedPitchRoundsCellCountUp) {
  EXPECT_DOUBLE_EQ(build_mesh(0.3).mesh_size, 0.25);
  EXPECT_DOUBLE_EQ(build_mesh(0.1).mesh_size, 0.1);
  EXPECT_THROW(build_mesh(0.0), InvalidArgument);
  EXPECT_THROW(build_mesh(0.7), InvalidArgument);
}

TEST(Mesh, ElementsAreCounterClockwiseWithCentredMidsides) {
  const TriMesh mesh = build_mesh(0.2);
  double area = 0.0;
  for (Eigen::Index e = 0; e < mesh.num_elements(); ++e) {
    Eigen::Matrix<double, 6, 2> P;
    for (int a = 0; a < 6; ++a) P.row(a) = mesh.nodes.row(mesh.elements(e, a));
    const double det = (P(1, 0) - P(0, 0)) * (P(2, 1) - P(0, 1)) - (P(2, 0) - P(0, 0)) * (P(1, 1) - P(0, 1));
    EXPECT_GT(det, 0.0);
    area += 0.5 * det;
    EXPECT_LT((P.row(3) - 0.5 * (P.row(0) + P.row(1))).norm(), 1e-15);
    EXPECT_LT((P.row(4) - 0.5 * (P.row(1) + P.row(2))).norm(), 1e-15);
    EXPECT_LT((P.row(5) - 0.5 * (P.row(0) + P.row(2))).norm(), 1e-15);
  }
  EXPECT_NEAR(area, 1.0, 1e-12);
}

TEST(Mesh, BoundaryFlagsMatchGeometry) {
  const TriMesh mesh = build_mesh(0.25);
  for (Eigen::Index i = 0; i < mesh.num_nodes(); ++i) {
    const double x = mesh.nodes(i, 0), y = mesh.nodes(i, 1);
    const bool on = x == 0.0 || y == 0.0 || x == 1.0 || y == 1.0;
    EXPECT_EQ(mesh.boundary[i] != 0, on);
  }
}

TEST(Locate, OutsidePointThrows) {
  const TriMesh mesh = build_mesh(0.5);
  EXPECT_THROW(locate(mesh, Eigen::Vector2d(1.2, 0.5)), OutOfDomain);
  EXPECT_NO_THROW(locate(mesh, Eigen::Vector2d(1.0, 1.0)));
}

TEST(Poisson, ZeroInputApproximatesSineProduct) {
  const TriMesh mesh = build_mesh(0.1);
  const Eigen::VectorXd u = solve_poisson(mesh, 0.0);
  for (Eigen::Index i = 0; i < mesh.num_nodes(); ++i) {
    const Eigen::Vector2d s = mesh.nodes.row(i).transpose();
    if (mesh.boundary[i]) {
      EXPECT_EQ(u[i], 0.0);
    } else {
      EXPECT_NEAR(u[i], std::sin(std::numbers::pi * s[0]) * std::sin(std::numbers::pi * s[1]), 2e-3);
    }
  }
}

TEST(Poisson, L2ErrorIsThirdOrder) {
  const double x = 0.6;
  auto exact = [x](const Eigen::Vector2d& s) { return analytic_solution(s, x); };
  const TriMesh coarse = build_mesh(0.2), fine = build_mesh(0.1);
  const double e1 = l2_error(coarse, solve_poisson(coarse, x), exact);
  const double e2 = l2_error(fine, solve_poisson(fine, x), exact);
  EXPECT_GT(e1 / e2, 8.0 * 0.6);
  EXPECT_LT(e1 / e2, 8.0 * 1.4);
}

TEST(Poisson, RejectsInputOutsideRange) {
  const TriMesh mesh = build_mesh(0.5);
  EXPECT_THROW(solve_poisson(mesh, 1.5), InvalidArgument);
  EXPECT_THROW(solve_poisson(mesh, std::nan("")), InvalidArgument);
}

TEST(Analytic, KnownValues) {
  const Eigen::Vector2d centre(0.5, 0.5);
  EXPECT_NEAR(analytic_solution(centre, 0.0), 1.0, 1e-15);
  EXPECT_NEAR(analytic_solution(centre, 1.0), std::exp(0.5), 1e-15);
  for (double t : {0.0, 0.3, 1.0}) {
    EXPECT_NEAR(analytic_solution(Eigen::Vector2d(0.0, t), 0.7), 0.0, 1e-15);
    EXPECT_NEAR(analytic_solution(Eigen::Vector2d(t, 1.0), -0.7), 0.0, 1e-15);
  }
}

TEST(Design, Equispaced) {
  const auto x = equispaced_design(5);
  ASSERT_EQ(x.size(), 5u);
  for (int i = 1; i <= 5; ++i) EXPECT_NEAR(x[i - 1], 0.4 * i - 1.2, 1e-15);
  EXPECT_THROW(equispaced_design(0), InvalidArgument);
}

TEST(Design, Linspace) {
  const auto x = linspace_design(201);
  ASSERT_EQ(x.size(), 201u);
  EXPECT_EQ(x.front(), -1.0);
  EXPECT_EQ(x.back(), 1.0);
  EXPECT_NEAR(x[100], 0.0, 1e-15);
  EXPECT_NEAR(x[1] - x[0], 0.01, 1e-15);
}

TEST(Dataset, ShapesAndDuplicateInputs) {
  const PoissonDataset ds = generate_dataset(0.25, {0.3, -0.5, 0.3});
  EXPECT_EQ(ds.solutions.rows(), ds.mesh.num_nodes());
  EXPECT_EQ(ds.solutions.cols(), 3);
  EXPECT_EQ(ds.inputs(1, 0), -0.5);
  EXPECT_EQ(ds.solutions.col(0), ds.solutions.col(2));
  EXPECT_NE(ds.solutions.col(0), ds.solutions.col(1));
  EXPECT_THROW(generate_dataset(0.25, {}), InvalidArgument);
}
