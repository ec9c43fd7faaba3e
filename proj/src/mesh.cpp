#include "artrecon/mesh.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <unordered_map>

#include "artrecon/kdtree.hpp"

namespace artrecon {

namespace {

std::uint64_t edge_key(std::uint32_t a, std::uint32_t b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | b;
}

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n) {
    std::iota(parent_.begin(), parent_.end(), 0u);
  }
  std::uint32_t find(std::uint32_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void unite(std::uint32_t a, std::uint32_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    // Smaller index becomes the root so roots are component minima.
    if (b < a) std::swap(a, b);
    parent_[b] = a;
  }

 private:
  std::vector<std::uint32_t> parent_;
};

}  // namespace

void TriangleMesh::validate() const {
  const std::size_t n = vertices.size();
  for (const auto& t : triangles) {
    if (t[0] >= n || t[1] >= n || t[2] >= n) {
      throw std::invalid_argument("triangle index out of range");
    }
    if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) {
      throw std::invalid_argument("triangle repeats a vertex");
    }
  }
  if (!colors.empty() && colors.size() != n) {
    throw std::invalid_argument("mesh colors not parallel to vertices");
  }
}

std::vector<std::uint32_t> component_labels(const TriangleMesh& mesh, std::size_t* count) {
  DisjointSets sets(mesh.vertices.size());
  for (const auto& t : mesh.triangles) {
    sets.unite(t[0], t[1]);
    sets.unite(t[1], t[2]);
  }
  std::vector<std::uint32_t> labels(mesh.vertices.size());
  std::unordered_map<std::uint32_t, std::uint32_t> root_label;
  for (std::uint32_t v = 0; v < labels.size(); ++v) {
    const auto root = sets.find(v);
    auto [it, inserted] = root_label.try_emplace(root, static_cast<std::uint32_t>(root_label.size()));
    labels[v] = it->second;
  }
  if (count) *count = root_label.size();
  return labels;
}

MeshStats mesh_stats(const TriangleMesh& mesh) {
  mesh.validate();
  MeshStats s;
  s.vertex_count = mesh.vertices.size();
  s.triangle_count = mesh.triangles.size();

  std::unordered_map<std::uint64_t, std::uint32_t> edge_use;
  edge_use.reserve(mesh.triangles.size() * 2);
  for (const auto& t : mesh.triangles) {
    for (int e = 0; e < 3; ++e) ++edge_use[edge_key(t[e], t[(e + 1) % 3])];
  }
  for (const auto& [key, uses] : edge_use) {
    if (uses == 1) ++s.boundary_edges;
    if (uses > 2) ++s.non_manifold_edges;
  }
  component_labels(mesh, &s.components);

  if (!mesh.vertices.empty()) {
    s.bbox_min = s.bbox_max = mesh.vertices.front();
    for (const auto& v : mesh.vertices) {
      s.bbox_min = s.bbox_min.cwiseMin(v);
      s.bbox_max = s.bbox_max.cwiseMax(v);
    }
  }
  return s;
}

TriangleMesh transfer_colors(const TriangleMesh& mesh, const PointCloud& pc) {
  if (!pc.has_colors() || pc.empty()) {
    throw std::invalid_argument("color transfer requires a colored point cloud");
  }
  pc.validate();
  const KdTree tree(pc.positions);
  TriangleMesh out = mesh;
  out.colors.resize(mesh.vertices.size());
  for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
    out.colors[v] = pc.colors[tree.nearest(mesh.vertices[v]).index];
  }
  return out;
}

TriangleMesh keep_vertices(const TriangleMesh& mesh, const std::vector<bool>& keep) {
  std::vector<bool> referenced(mesh.vertices.size(), false);
  std::vector<Triangle> tris;
  tris.reserve(mesh.triangles.size());
  for (const auto& t : mesh.triangles) {
    if (keep[t[0]] && keep[t[1]] && keep[t[2]]) {
      tris.push_back(t);
      for (auto i : t) referenced[i] = true;
    }
  }

  constexpr auto kDropped = std::numeric_limits<std::uint32_t>::max();
  std::vector<std::uint32_t> remap(mesh.vertices.size(), kDropped);
  TriangleMesh out;
  for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
    if (!referenced[v]) continue;
    remap[v] = static_cast<std::uint32_t>(out.vertices.size());
    out.vertices.push_back(mesh.vertices[v]);
    if (mesh.has_colors()) out.colors.push_back(mesh.colors[v]);
  }
  out.triangles.reserve(tris.size());
  for (const auto& t : tris) out.triangles.push_back({remap[t[0]], remap[t[1]], remap[t[2]]});
  return out;
}

TrimResult trim_low_support(const TriangleMesh& mesh, const PointCloud& pc, double radius,
                            std::size_t min_count) {
  if (!(radius > 0.0)) throw std::invalid_argument("trim radius must be > 0");
  mesh.validate();

  TrimResult result;
  std::vector<bool> keep(mesh.vertices.size(), true);
  if (min_count > 0) {
    const KdTree tree(pc.positions);
    for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
      if (tree.count_within(mesh.vertices[v], radius, min_count) < min_count) {
        keep[v] = false;
        ++result.unsupported_vertices;
      }
    }
  }
  TriangleMesh supported = keep_vertices(mesh, keep);
  if (supported.triangles.empty()) {
    throw TrimError(mesh.vertices.size(), result.unsupported_vertices);
  }

  std::size_t count = 0;
  const auto labels = component_labels(supported, &count);
  std::vector<std::size_t> tri_count(count, 0);
  for (const auto& t : supported.triangles) ++tri_count[labels[t[0]]];
  // Labels follow smallest-vertex order, so the first maximum wins ties.
  const auto best = static_cast<std::uint32_t>(
      std::max_element(tri_count.begin(), tri_count.end()) - tri_count.begin());

  std::vector<bool> in_best(supported.vertices.size());
  for (std::size_t v = 0; v < in_best.size(); ++v) {
    in_best[v] = labels[v] == best;
    if (!in_best[v]) ++result.dropped_component_vertices;
  }
  result.mesh = keep_vertices(supported, in_best);
  return result;
}

}  // namespace artrecon
