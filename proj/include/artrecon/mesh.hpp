#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "artrecon/geometry.hpp"

namespace artrecon {

using Triangle = std::array<std::uint32_t, 3>;

/// Indexed triangle set with optional per-vertex colors in [0,1].
struct TriangleMesh {
  std::vector<Eigen::Vector3d> vertices;
  std::vector<Triangle> triangles;
  std::vector<Eigen::Vector3d> colors;

  bool has_colors() const { return !colors.empty(); }
  bool empty() const { return vertices.empty() && triangles.empty(); }

  /// Index bounds, no repeated vertex per triangle, colors parallel.
  void validate() const;
};

struct MeshStats {
  std::size_t vertex_count = 0;
  std::size_t triangle_count = 0;
  std::size_t boundary_edges = 0;     // edges used by exactly one triangle
  std::size_t non_manifold_edges = 0; // edges used by more than two
  std::size_t components = 0;         // connected via shared triangle edges
  Eigen::Vector3d bbox_min = Eigen::Vector3d::Zero();
  Eigen::Vector3d bbox_max = Eigen::Vector3d::Zero();

  bool watertight() const { return boundary_edges == 0; }
};

MeshStats mesh_stats(const TriangleMesh& mesh);

/// Per-vertex component labels (union-find over triangle edges), labelled
/// 0..n-1 in order of each component's smallest vertex index.
std::vector<std::uint32_t> component_labels(const TriangleMesh& mesh, std::size_t* count = nullptr);

/// Nearest cloud point color for every vertex (ties go to the lower index).
TriangleMesh transfer_colors(const TriangleMesh& mesh, const PointCloud& pc);

/// Thrown when trimming would leave nothing behind.
class TrimError : public std::runtime_error {
 public:
  TrimError(std::size_t vertices_before, std::size_t unsupported)
      : std::runtime_error("trimming removed all geometry (" + std::to_string(unsupported) +
                           " of " + std::to_string(vertices_before) +
                           " vertices lacked cloud support)"),
        vertices_before(vertices_before), unsupported(unsupported) {}

  std::size_t vertices_before;
  std::size_t unsupported;
};

struct TrimResult {
  TriangleMesh mesh;
  std::size_t unsupported_vertices = 0;
  std::size_t dropped_component_vertices = 0;
};

/// Removes vertices with fewer than `min_count` cloud points within
/// `radius` (plus their triangles), then keeps the largest connected
/// component by triangle count, ties going to the component holding the
/// smallest vertex index. Indices are compacted in original order.
TrimResult trim_low_support(const TriangleMesh& mesh, const PointCloud& pc, double radius,
                            std::size_t min_count);

/// Keeps the listed vertices (ascending), dropping triangles that touch
/// any other vertex, then any vertex no surviving triangle references.
TriangleMesh keep_vertices(const TriangleMesh& mesh, const std::vector<bool>& keep);

}  // namespace artrecon
