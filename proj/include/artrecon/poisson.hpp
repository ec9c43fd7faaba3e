#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "artrecon/geometry.hpp"
#include "artrecon/mesh.hpp"

namespace artrecon {

/// Regular cubic lattice with `resolution` cells (resolution + 1 nodes) per
/// axis. Node (i, j, k) sits at origin + cell_size * (i, j, k).
struct VoxelGrid {
  int resolution = 0;
  Eigen::Vector3d origin = Eigen::Vector3d::Zero();
  double cell_size = 1.0;

  int nodes_per_axis() const { return resolution + 1; }
  std::size_t node_count() const {
    const auto n = static_cast<std::size_t>(nodes_per_axis());
    return n * n * n;
  }
  std::size_t node_index(int i, int j, int k) const {
    const auto n = static_cast<std::size_t>(nodes_per_axis());
    return static_cast<std::size_t>(i) + n * (static_cast<std::size_t>(j) + n * k);
  }
  Eigen::Vector3d node_position(int i, int j, int k) const {
    return origin + cell_size * Eigen::Vector3d(i, j, k);
  }
  Eigen::Vector3d center() const {
    return origin + Eigen::Vector3d::Constant(0.5 * cell_size * resolution);
  }
  /// Strictly inside the outer faces.
  bool contains(const Eigen::Vector3d& p) const;

  void validate() const;

  /// Cube around the bounding box of `points`: the largest box extent is
  /// padded by pad_fraction on each side and split into 2^depth cells.
  static VoxelGrid enclosing(std::span<const Eigen::Vector3d> points, int depth,
                             double pad_fraction);
};

struct VectorField {
  VoxelGrid grid;
  std::vector<Eigen::Vector3d> vectors;
};

struct ScalarField {
  VoxelGrid grid;
  std::vector<double> values;

  double at(int i, int j, int k) const { return values[grid.node_index(i, j, k)]; }
  /// Trilinear interpolation; positions outside the grid are clamped to it.
  double sample(const Eigen::Vector3d& p) const;
};

enum class IsoStrategy { MeanAtSamples, Fixed };

struct PoissonParams {
  int depth = 6;
  double pad_fraction = 0.15;
  double cg_tolerance = 1e-6;
  int cg_max_iters = 3000;
  IsoStrategy iso_strategy = IsoStrategy::MeanAtSamples;
  double iso_value = 0.5;  // used by IsoStrategy::Fixed

  void validate() const;
};

struct SolveReport {
  int iterations = 0;
  double residual_norm = 0.0;  // ||laplacian(chi) - rhs||_2 over interior nodes
  double rhs_norm = 0.0;       // ||rhs||_2 over interior nodes
  bool converged = false;
  std::vector<double> residual_history;  // one entry per iteration, starting at x0
};

struct SolveResult {
  ScalarField chi;
  SolveReport report;
};

/// Raised when the residual grows for 50 consecutive iterations.
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, SolveReport report)
      : std::runtime_error(what), report(std::move(report)) {}
  SolveReport report;
};

/// Distributes each unit normal to the 8 surrounding nodes with trilinear
/// weights; the field is scaled by 1 / cell_size.
VectorField splat_normals(const PointCloud& pc, const VoxelGrid& grid);

/// Central differences at interior nodes, one-sided differences on the faces.
ScalarField divergence(const VectorField& v);

/// 7-point discrete Laplacian at interior nodes (boundary nodes read as 0).
ScalarField laplacian(const ScalarField& f);

/// Solves laplacian(chi) = rhs with chi = 0 on the grid faces.
SolveResult solve_poisson(const ScalarField& rhs, const PoissonParams& params);

double select_isovalue(const ScalarField& chi, const PointCloud& pc, const PoissonParams& params);

/// Isosurface of a node-sampled field. Nodes below `isovalue` count as
/// outside, so triangles face toward decreasing values. Shared cell edges
/// share one vertex.
TriangleMesh marching_cubes(const ScalarField& chi, double isovalue);

bool isovalue_in_range(const ScalarField& chi, double isovalue);

struct Reconstruction {
  TriangleMesh mesh;
  VoxelGrid grid;
  double isovalue = 0.0;
  bool isovalue_out_of_range = false;
  SolveReport solve;
};

/// Poisson surface reconstruction of an oriented cloud on a regular grid.
/// The indicator is larger inside the surface the normals point away from.
Reconstruction reconstruct(const PointCloud& pc, const PoissonParams& params);

}  // namespace artrecon
