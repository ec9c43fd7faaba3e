#include <gtest/gtest.h>

#include <functional>
#include <unordered_map>

#include "artrecon/mesh.hpp"
#include "artrecon/poisson.hpp"
#include "support.hpp"

using namespace artrecon;

namespace {

VoxelGrid unit_grid(int resolution, double cell = 0.125) {
  VoxelGrid g;
  g.resolution = resolution;
  g.cell_size = cell;
  return g;
}

ScalarField field_from(const VoxelGrid& g, const std::function<double(const Eigen::Vector3d&)>& f) {
  ScalarField s{g, std::vector<double>(g.node_count())};
  const int n = g.resolution;
  for (int k = 0; k <= n; ++k)
    for (int j = 0; j <= n; ++j)
      for (int i = 0; i <= n; ++i) s.values[g.node_index(i, j, k)] = f(g.node_position(i, j, k));
  return s;
}

VectorField vector_field_from(const VoxelGrid& g,
                              const std::function<Eigen::Vector3d(const Eigen::Vector3d&)>& f) {
  VectorField v{g, std::vector<Eigen::Vector3d>(g.node_count())};
  const int n = g.resolution;
  for (int k = 0; k <= n; ++k)
    for (int j = 0; j <= n; ++j)
      for (int i = 0; i <= n; ++i) v.vectors[g.node_index(i, j, k)] = f(g.node_position(i, j, k));
  return v;
}

// Every undirected edge used by exactly two triangles.
bool every_edge_shared_twice(const TriangleMesh& m) {
  std::unordered_map<std::uint64_t, int> uses;
  for (const auto& t : m.triangles) {
    for (int e = 0; e < 3; ++e) {
      std::uint64_t a = t[e], b = t[(e + 1) % 3];
      if (a > b) std::swap(a, b);
      ++uses[(a << 32) | b];
    }
  }
  for (const auto& [edge, n] : uses) {
    if (n != 2) return false;
  }
  return !uses.empty();
}

}  // namespace

TEST(Grid, EnclosingPadsAndCentres) {
  std::vector<Eigen::Vector3d> pts{{0, 0, 0}, {2, 1, 0.5}};
  const VoxelGrid g = VoxelGrid::enclosing(pts, 5, 0.15);
  EXPECT_EQ(g.resolution, 32);
  EXPECT_NEAR(g.cell_size * 32, 2.0 * 1.3, 1e-12);
  EXPECT_TRUE(g.center().isApprox(Eigen::Vector3d(1, 0.5, 0.25)));
  for (const auto& p : pts) EXPECT_TRUE(g.contains(p));
  EXPECT_THROW(VoxelGrid::enclosing(std::vector<Eigen::Vector3d>{}, 5, 0.15), std::invalid_argument);
}

TEST(Params, Validation) {
  PoissonParams p;
  EXPECT_NO_THROW(p.validate());
  p.depth = 10;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p.depth = 3;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = {};
  p.pad_fraction = 0.0;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = {};
  p.cg_tolerance = -1.0;
  EXPECT_THROW(p.validate(), std::invalid_argument);
}

TEST(Splat, PointOnNodeGoesToThatNode) {
  const VoxelGrid g = unit_grid(16);
  PointCloud pc;
  pc.positions.push_back(g.node_position(5, 6, 7));
  pc.normals.emplace_back(0, 0, 1);
  const VectorField v = splat_normals(pc, g);
  for (std::size_t i = 0; i < v.vectors.size(); ++i) {
    if (i == g.node_index(5, 6, 7)) {
      EXPECT_EQ(v.vectors[i], Eigen::Vector3d(0, 0, 8.0));  // 1 / cell_size
    } else {
      EXPECT_EQ(v.vectors[i], Eigen::Vector3d::Zero());
    }
  }
}

TEST(Splat, CellCentreSplitsEvenly) {
  const VoxelGrid g = unit_grid(16);
  PointCloud pc;
  pc.positions.push_back(g.node_position(3, 3, 3) + Eigen::Vector3d::Constant(0.0625));
  pc.normals.emplace_back(1, 0, 0);
  const VectorField v = splat_normals(pc, g);
  for (int c = 0; c < 8; ++c) {
    EXPECT_EQ(v.vectors[g.node_index(3 + (c & 1), 3 + ((c >> 1) & 1), 3 + ((c >> 2) & 1))],
              Eigen::Vector3d(0.125 * 8.0, 0, 0));
  }
}

TEST(Splat, SumEqualsNormalsOverCellSize) {
  const PointCloud pc = testsupport::sphere_cloud(500, 1);
  const VoxelGrid g = VoxelGrid::enclosing(pc.positions, 5, 0.15);
  const VectorField v = splat_normals(pc, g);
  Eigen::Vector3d sum = Eigen::Vector3d::Zero(), expect = Eigen::Vector3d::Zero();
  for (const auto& x : v.vectors) sum += x;
  for (const auto& n : pc.normals) expect += n / g.cell_size;
  EXPECT_LT((sum - expect).norm(), 1e-9);
}

TEST(Splat, Errors) {
  const VoxelGrid g = unit_grid(16);
  PointCloud pc;
  pc.positions.emplace_back(0.5, 0.5, 0.5);
  EXPECT_THROW(splat_normals(pc, g), std::invalid_argument);
  pc.normals.emplace_back(0, 0, 1);
  pc.positions[0] = {5, 5, 5};
  EXPECT_THROW(splat_normals(pc, g), std::invalid_argument);
}

TEST(Divergence, ConstantFieldIsZero) {
  const VoxelGrid g = unit_grid(16);
  const ScalarField d = divergence(vector_field_from(g, [](auto&) { return Eigen::Vector3d(1, -2, 3); }));
  for (double x : d.values) EXPECT_EQ(x, 0.0);
}

TEST(Divergence, LinearFields) {
  const VoxelGrid g = unit_grid(16, 0.1);
  const ScalarField dx = divergence(vector_field_from(g, [](auto& p) { return Eigen::Vector3d(p.x(), 0, 0); }));
  const ScalarField dxyz = divergence(vector_field_from(g, [](auto& p) { return Eigen::Vector3d(p); }));
  for (std::size_t i = 0; i < dx.values.size(); ++i) {
    EXPECT_NEAR(dx.values[i], 1.0, 1e-6);
    EXPECT_NEAR(dxyz.values[i], 3.0, 1e-6);
  }
}

// Hand-computed trilinear weights and central/one-sided differences for a
// single point. Dyadic cell size and offsets keep every product exact.
TEST(Divergence, SingleSplatMatchesHandStencil) {
  const VoxelGrid g = unit_grid(16, 0.125);
  const double f[3] = {0.25, 0.5, 0.75};
  const int b[3] = {6, 7, 8};
  const Eigen::Vector3d normal(0.6, 0.8, 0.0);
  PointCloud pc;
  pc.positions.push_back(g.node_position(b[0], b[1], b[2]) +
                         0.125 * Eigen::Vector3d(f[0], f[1], f[2]));
  pc.normals.push_back(normal);

  const int n = g.resolution;
  std::vector<Eigen::Vector3d> splat(g.node_count(), Eigen::Vector3d::Zero());
  for (int dk = 0; dk < 2; ++dk)
    for (int dj = 0; dj < 2; ++dj)
      for (int di = 0; di < 2; ++di) {
        const double w = (di ? f[0] : 1 - f[0]) * (dj ? f[1] : 1 - f[1]) * (dk ? f[2] : 1 - f[2]);
        splat[g.node_index(b[0] + di, b[1] + dj, b[2] + dk)] = (w * 8.0) * normal;
      }
  const ScalarField div = divergence(splat_normals(pc, g));
  for (int k = 0; k <= n; ++k)
    for (int j = 0; j <= n; ++j)
      for (int i = 0; i <= n; ++i) {
        const int c[3] = {i, j, k};
        double expect = 0.0;
        for (int a = 0; a < 3; ++a) {
          auto at = [&](int off) {
            int q[3] = {i, j, k};
            q[a] += off;
            return splat[g.node_index(q[0], q[1], q[2])][a];
          };
          if (c[a] == 0) expect += (at(1) - at(0)) / 0.125;
          else if (c[a] == n) expect += (at(0) - at(-1)) / 0.125;
          else expect += (at(1) - at(-1)) / 0.25;
        }
        ASSERT_EQ(div.values[g.node_index(i, j, k)], expect) << i << "," << j << "," << k;
      }
}

TEST(Solve, ZeroRhsGivesZero) {
  const VoxelGrid g = unit_grid(16);
  const SolveResult r = solve_poisson(ScalarField{g, std::vector<double>(g.node_count(), 0.0)}, {});
  for (double x : r.chi.values) EXPECT_EQ(x, 0.0);
  EXPECT_EQ(r.report.iterations, 0);
  EXPECT_TRUE(r.report.converged);
}

// f vanishes on the boundary; rhs is the 7-point stencil applied to f here,
// independently of the library, so the discrete solution is f itself.
TEST(Solve, ManufacturedProductOfSines) {
  const VoxelGrid g = unit_grid(32, 1.0 / 32);
  const ScalarField f = field_from(g, [](const Eigen::Vector3d& p) {
    return std::sin(M_PI * p.x()) * std::sin(2 * M_PI * p.y()) * std::sin(M_PI * p.z());
  });
  ScalarField rhs{g, std::vector<double>(g.node_count(), 0.0)};
  const double h2 = g.cell_size * g.cell_size;
  for (int k = 1; k < 32; ++k)
    for (int j = 1; j < 32; ++j)
      for (int i = 1; i < 32; ++i) {
        const double sum = f.at(i - 1, j, k) + f.at(i + 1, j, k) + f.at(i, j - 1, k) +
                           f.at(i, j + 1, k) + f.at(i, j, k - 1) + f.at(i, j, k + 1);
        rhs.values[g.node_index(i, j, k)] = (sum - 6.0 * f.at(i, j, k)) / h2;
      }
  const SolveResult r = solve_poisson(rhs, {});
  double max_err = 0.0, sup = 0.0;
  for (std::size_t i = 0; i < f.values.size(); ++i) {
    max_err = std::max(max_err, std::abs(r.chi.values[i] - f.values[i]));
    sup = std::max(sup, std::abs(f.values[i]));
  }
  EXPECT_LE(max_err, 0.02 * sup);
  EXPECT_TRUE(r.report.converged);
  EXPECT_LE(r.report.residual_norm, 1e-6 * r.report.rhs_norm);

  // Library laplacian agrees with the hand stencil.
  const ScalarField lap = laplacian(f);
  for (std::size_t i = 0; i < lap.values.size(); ++i) EXPECT_NEAR(lap.values[i], rhs.values[i], 1e-9);
}

TEST(Solve, ResidualNeverIncreases) {
  const PointCloud pc = testsupport::sphere_cloud(3000, 2);
  const VoxelGrid g = VoxelGrid::enclosing(pc.positions, 5, 0.15);
  ScalarField rhs = divergence(splat_normals(pc, g));
  const SolveResult r = solve_poisson(rhs, {});
  const auto& h = r.report.residual_history;
  ASSERT_EQ(h.size(), static_cast<std::size_t>(r.report.iterations) + 1);
  for (std::size_t i = 1; i < h.size(); ++i) ASSERT_LE(h[i], h[i - 1]) << "iteration " << i;
  EXPECT_LE(r.report.residual_norm, 1e-6 * r.report.rhs_norm);
}

TEST(Solve, IterationCapReportsNotConverged) {
  const PointCloud pc = testsupport::sphere_cloud(1000, 3);
  const VoxelGrid g = VoxelGrid::enclosing(pc.positions, 5, 0.15);
  PoissonParams p;
  p.cg_max_iters = 3;
  const SolveResult r = solve_poisson(divergence(splat_normals(pc, g)), p);
  EXPECT_EQ(r.report.iterations, 3);
  EXPECT_FALSE(r.report.converged);
}

TEST(Solve, NonFiniteRhsRejected) {
  const VoxelGrid g = unit_grid(16);
  ScalarField rhs{g, std::vector<double>(g.node_count(), 0.0)};
  rhs.values[100] = std::numeric_limits<double>::infinity();
  EXPECT_THROW(solve_poisson(rhs, {}), std::invalid_argument);
}

// Reflecting the cloud in the plane x = centre.x reflects chi node for node.
TEST(Solve, MirrorSymmetry) {
  PointCloud pc = testsupport::sphere_cloud(2000, 4, {0.2, -0.1, 0.3});
  for (auto& p : pc.positions) p.x() += 0.3 * p.y() * p.y();  // break the sphere's own symmetry
  for (auto& n : pc.normals) n = (n + Eigen::Vector3d(0.3, 0, 0)).normalized();
  const VoxelGrid g = VoxelGrid::enclosing(pc.positions, 5, 0.15);
  PointCloud mirrored = pc;
  const double cx = g.center().x();
  for (auto& p : mirrored.positions) p.x() = 2 * cx - p.x();
  for (auto& n : mirrored.normals) n.x() = -n.x();

  const SolveResult a = solve_poisson(divergence(splat_normals(pc, g)), {});
  const SolveResult b = solve_poisson(divergence(splat_normals(mirrored, g)), {});
  const int n = g.resolution;
  for (int k = 0; k <= n; ++k)
    for (int j = 0; j <= n; ++j)
      for (int i = 0; i <= n; ++i) {
        ASSERT_NEAR(a.chi.at(i, j, k), b.chi.at(n - i, j, k), 1e-6);
      }
}

TEST(Isovalue, FixedAndConstant) {
  const VoxelGrid g = unit_grid(16);
  const ScalarField c{g, std::vector<double>(g.node_count(), 2.5)};
  const PointCloud pc = testsupport::sphere_cloud(100, 5, Eigen::Vector3d::Constant(1.0), 0.5);
  PoissonParams p;
  EXPECT_DOUBLE_EQ(select_isovalue(c, pc, p), 2.5);
  p.iso_strategy = IsoStrategy::Fixed;
  EXPECT_EQ(select_isovalue(c, pc, p), 0.5);
  p.iso_strategy = IsoStrategy::MeanAtSamples;
  EXPECT_THROW(select_isovalue(c, PointCloud{}, p), std::invalid_argument);
}

TEST(Isovalue, SphereWithinSampleRange) {
  const PointCloud pc = testsupport::sphere_cloud(4000, 6);
  const VoxelGrid g = VoxelGrid::enclosing(pc.positions, 5, 0.15);
  const SolveResult r = solve_poisson(divergence(splat_normals(pc, g)), {});
  double lo = 1e300, hi = -1e300;
  for (const auto& p : pc.positions) {
    lo = std::min(lo, r.chi.sample(p));
    hi = std::max(hi, r.chi.sample(p));
  }
  const double iso = select_isovalue(r.chi, pc, {});
  EXPECT_GE(iso, lo);
  EXPECT_LE(iso, hi);
}

TEST(MarchingCubes, RadialDistanceSphere) {
  const VoxelGrid g = unit_grid(32, 3.0 / 32);
  ScalarField chi = field_from(g, [&](const Eigen::Vector3d& p) { return (p - g.center()).norm(); });
  const double r = 1.1;
  const TriangleMesh m = marching_cubes(chi, r);
  ASSERT_FALSE(m.triangles.empty());
  std::size_t close = 0;
  for (const auto& v : m.vertices) {
    if (std::abs((v - g.center()).norm() - r) <= g.cell_size) ++close;
  }
  EXPECT_GE(close, static_cast<std::size_t>(0.95 * m.vertices.size()));
  EXPECT_TRUE(every_edge_shared_twice(m));
  EXPECT_EQ(mesh_stats(m).components, 1u);
}

TEST(MarchingCubes, OutOfRangeIsovalueGivesEmptyMesh) {
  const VoxelGrid g = unit_grid(16);
  ScalarField chi = field_from(g, [](const Eigen::Vector3d& p) { return p.x(); });
  EXPECT_TRUE(marching_cubes(chi, 100.0).empty());
  EXPECT_TRUE(marching_cubes(chi, -1.0).empty());
  EXPECT_FALSE(isovalue_in_range(chi, 100.0));
}

// chi larger inside: triangles must face outward, along -grad(chi).
TEST(MarchingCubes, WindingFollowsDecreasingField) {
  const VoxelGrid g = unit_grid(24, 0.1);
  const Eigen::Vector3d c = g.center();
  ScalarField chi = field_from(g, [&](const Eigen::Vector3d& p) {
    const Eigen::Vector3d d = p - c;
    return 1.0 - std::sqrt(d.x() * d.x() / 0.8 + d.y() * d.y() + d.z() * d.z() / 0.6);
  });
  const TriangleMesh m = marching_cubes(chi, 0.0);
  for (const auto& t : m.triangles) {
    const Eigen::Vector3d a = m.vertices[t[0]], b = m.vertices[t[1]], e = m.vertices[t[2]];
    const Eigen::Vector3d face = (b - a).cross(e - a);
    const Eigen::Vector3d d = (a + b + e) / 3.0 - c;
    const Eigen::Vector3d neg_grad(d.x() / 0.8, d.y(), d.z() / 0.6);
    ASSERT_GT(face.dot(neg_grad), 0.0);
  }
  EXPECT_GT(testsupport::signed_volume(m), 0.0);
}

TEST(MarchingCubes, NoDegenerateTrianglesWhenNodesSitOnIsovalue) {
  const VoxelGrid g = unit_grid(16, 0.25);
  // Plane field hitting nodes exactly, plus a sphere crossing many nodes.
  ScalarField plane = field_from(g, [](const Eigen::Vector3d& p) { return p.x() + 0.5 * p.y(); });
  ScalarField ball = field_from(g, [&](const Eigen::Vector3d& p) {
    return std::round((p - g.center()).squaredNorm() * 16.0) / 16.0;
  });
  for (const auto& [field, iso] : {std::pair{plane, 2.0}, std::pair{ball, 2.25}}) {
    const TriangleMesh m = marching_cubes(field, iso);
    ASSERT_FALSE(m.triangles.empty());
    EXPECT_NO_THROW(m.validate());
    for (const auto& t : m.triangles) {
      ASSERT_GT(testsupport::triangle_area(m, t), 1e-12 * g.cell_size * g.cell_size);
    }
  }
}

TEST(MarchingCubes, SharedEdgesShareVertices) {
  const VoxelGrid g = unit_grid(16, 0.25);
  ScalarField chi = field_from(g, [&](const Eigen::Vector3d& p) { return (p - g.center()).norm(); });
  const TriangleMesh m = marching_cubes(chi, 1.3);
  for (std::size_t i = 0; i < m.vertices.size(); ++i)
    for (std::size_t j = i + 1; j < m.vertices.size(); ++j) {
      ASSERT_NE(m.vertices[i], m.vertices[j]);
    }
}

TEST(Reconstruct, UnitSphereDepth6) {
  const PointCloud pc = testsupport::sphere_cloud(10000, 7);
  const Reconstruction r = reconstruct(pc, {});
  const MeshStats s = mesh_stats(r.mesh);
  EXPECT_EQ(s.boundary_edges, 0u);
  EXPECT_EQ(s.non_manifold_edges, 0u);
  EXPECT_EQ(s.components, 1u);
  EXPECT_TRUE(every_edge_shared_twice(r.mesh));
  std::size_t close = 0;
  for (const auto& v : r.mesh.vertices) {
    if (std::abs(v.norm() - 1.0) <= 0.02) ++close;
  }
  EXPECT_GE(close, static_cast<std::size_t>(0.95 * r.mesh.vertices.size()));
  EXPECT_GT(testsupport::signed_volume(r.mesh), 0.0);
  EXPECT_TRUE(r.solve.converged);
  EXPECT_FALSE(r.isovalue_out_of_range);
}

TEST(Reconstruct, Deterministic) {
  const PointCloud pc = testsupport::sphere_cloud(3000, 8);
  PoissonParams p;
  p.depth = 5;
  const Reconstruction a = reconstruct(pc, p);
  const Reconstruction b = reconstruct(pc, p);
  EXPECT_EQ(a.mesh.vertices, b.mesh.vertices);
  EXPECT_EQ(a.mesh.triangles, b.mesh.triangles);
  EXPECT_EQ(a.solve.residual_history, b.solve.residual_history);
}

// A lone sheet is closed behind by the zero boundary; support trimming
// removes that closure and leaves the sheet.
TEST(Reconstruct, PlanarPatchLeavesSingleSheetAfterTrim) {
  PointCloud pc;
  for (int y = 0; y <= 60; ++y)
    for (int x = 0; x <= 60; ++x) {
      pc.positions.emplace_back(-0.5 + x / 60.0, -0.5 + y / 60.0, 1.0);
      pc.normals.emplace_back(0, 0, -1);
    }
  const Reconstruction r = reconstruct(pc, {});
  const double h = r.grid.cell_size;
  std::size_t behind_raw = 0;
  for (const auto& v : r.mesh.vertices) behind_raw += v.z() > 1.0 + 2 * h;
  EXPECT_GT(behind_raw, 0u);

  const TrimResult t = trim_low_support(r.mesh, pc, 2 * h, 1);
  EXPECT_EQ(mesh_stats(t.mesh).components, 1u);
  for (const auto& v : t.mesh.vertices) ASSERT_LE(std::abs(v.z() - 1.0), 2 * h);
  for (const auto& t2 : t.mesh.triangles) ASSERT_GT(testsupport::triangle_area(t.mesh, t2), 0.0);
  const MeshStats s = mesh_stats(t.mesh);
  EXPECT_LT(s.bbox_min.x(), -0.45);
  EXPECT_GT(s.bbox_max.x(), 0.45);
}

TEST(Reconstruct, EmptyCloudRejected) {
  EXPECT_THROW(reconstruct(PointCloud{}, {}), std::invalid_argument);
}
