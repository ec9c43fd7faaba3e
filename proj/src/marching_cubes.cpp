#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "artrecon/poisson.hpp"
#include "marching_cubes_tables.hpp"

namespace artrecon {

namespace {

constexpr int kCorner[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                               {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
constexpr int kEdgeCorners[12][2] = {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}, {5, 6},
                                     {6, 7}, {7, 4}, {0, 4}, {1, 5}, {2, 6}, {3, 7}};

// Keeps interpolated vertices off the lattice nodes so no triangle collapses
// when a node value equals the isovalue.
constexpr double kMinEdgeFraction = 1e-5;

}  // namespace

TriangleMesh marching_cubes(const ScalarField& chi, double isovalue) {
  const VoxelGrid& g = chi.grid;
  const int n = g.resolution;
  TriangleMesh mesh;
  if (chi.values.size() != g.node_count()) {
    throw std::invalid_argument("scalar field does not match its grid");
  }
  if (!std::isfinite(isovalue) || !isovalue_in_range(chi, isovalue)) return mesh;

  // Lattice edge id = 3 * (lower node index) + axis.
  std::unordered_map<std::uint64_t, std::uint32_t> edge_vertex;

  auto vertex_on_edge = [&](int i, int j, int k, int edge) -> std::uint32_t {
    const int* ca = kCorner[kEdgeCorners[edge][0]];
    const int* cb = kCorner[kEdgeCorners[edge][1]];
    int a[3] = {i + ca[0], j + ca[1], k + ca[2]};
    int b[3] = {i + cb[0], j + cb[1], k + cb[2]};
    int axis = 0;
    while (a[axis] == b[axis]) ++axis;
    if (a[axis] > b[axis]) std::swap(a, b);

    const std::size_t lower = g.node_index(a[0], a[1], a[2]);
    const std::uint64_t key = 3 * static_cast<std::uint64_t>(lower) + axis;
    auto [it, inserted] = edge_vertex.try_emplace(key, static_cast<std::uint32_t>(mesh.vertices.size()));
    if (inserted) {
      const double va = chi.values[lower];
      const double vb = chi.at(b[0], b[1], b[2]);
      const double t = std::clamp((isovalue - va) / (vb - va), kMinEdgeFraction,
                                  1.0 - kMinEdgeFraction);
      Eigen::Vector3d pos = g.node_position(a[0], a[1], a[2]);
      pos[axis] += t * g.cell_size;
      mesh.vertices.push_back(pos);
    }
    return it->second;
  };

  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        int cube = 0;
        for (int c = 0; c < 8; ++c) {
          if (chi.at(i + kCorner[c][0], j + kCorner[c][1], k + kCorner[c][2]) < isovalue) {
            cube |= 1 << c;
          }
        }
        if (detail::kEdgeTable[cube] == 0) continue;
        const auto& tris = detail::kTriTable[cube];
        for (int t = 0; tris[t] >= 0; t += 3) {
          const std::uint32_t v0 = vertex_on_edge(i, j, k, tris[t]);
          const std::uint32_t v1 = vertex_on_edge(i, j, k, tris[t + 1]);
          const std::uint32_t v2 = vertex_on_edge(i, j, k, tris[t + 2]);
          // Table order already faces the below-iso (outside) corners.
          mesh.triangles.push_back({v0, v1, v2});
        }
      }
  return mesh;
}

}  // namespace artrecon
