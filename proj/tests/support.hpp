// Shared fixtures and brute-force oracles for the unit and acceptance tests.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Geometry>

#include "artrecon/geometry.hpp"
#include "artrecon/kdtree.hpp"
#include "artrecon/mesh.hpp"

namespace testsupport {

inline std::filesystem::path fixture_dir() { return ARTRECON_FIXTURE_DIR; }

class TempDir {
 public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "artrecon-XXXXXX").string();
    if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

// Copies a shipped scene (image, depth maps, scene.cfg) into `dest`.
inline void copy_scene(const std::string& name, const std::filesystem::path& dest) {
  std::filesystem::copy(fixture_dir() / "scenes" / name, dest,
                        std::filesystem::copy_options::recursive);
}

// Unit-sphere samples with outward normals, optionally offset.
inline artrecon::PointCloud sphere_cloud(std::size_t n, unsigned seed,
                                         const Eigen::Vector3d& center = Eigen::Vector3d::Zero(),
                                         double radius = 1.0) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> g;
  artrecon::PointCloud pc;
  for (std::size_t i = 0; i < n; ++i) {
    Eigen::Vector3d d(g(rng), g(rng), g(rng));
    d.normalize();
    pc.positions.push_back(center + radius * d);
    pc.normals.push_back(d);
  }
  return pc;
}

// O(n^2) reference: all other points sorted by (squared distance, index).
inline std::vector<artrecon::Neighbor> brute_knn(const std::vector<Eigen::Vector3d>& pts,
                                                 const Eigen::Vector3d& q, std::size_t k,
                                                 std::size_t exclude = SIZE_MAX) {
  std::vector<artrecon::Neighbor> all;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (i == exclude) continue;
    const Eigen::Vector3d d = pts[i] - q;
    all.push_back({i, d.x() * d.x() + d.y() * d.y() + d.z() * d.z()});
  }
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    return a.sq_distance != b.sq_distance ? a.sq_distance < b.sq_distance : a.index < b.index;
  });
  if (all.size() > k) all.resize(k);
  return all;
}

struct OutlierOracle {
  std::vector<double> mean_distances;
  double mean = 0.0;
  double stddev = 0.0;
  std::vector<std::size_t> removed;
};

// Statistical outlier removal computed from brute-force neighbour lists.
inline OutlierOracle brute_outliers(const std::vector<Eigen::Vector3d>& pts, std::size_t k,
                                    double ratio) {
  OutlierOracle o;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    double sum = 0.0;
    for (const auto& nb : brute_knn(pts, pts[i], k, i)) sum += std::sqrt(nb.sq_distance);
    o.mean_distances.push_back(sum / static_cast<double>(k));
  }
  const double n = static_cast<double>(pts.size());
  for (double m : o.mean_distances) o.mean += m;
  o.mean /= n;
  double ss = 0.0;
  for (double m : o.mean_distances) ss += (m - o.mean) * (m - o.mean);
  o.stddev = std::sqrt(ss / (n - 1.0));
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (o.mean_distances[i] > o.mean + ratio * o.stddev) o.removed.push_back(i);
  }
  return o;
}

// Z-buffer render of a mesh through a pinhole camera: nearest Z per pixel
// center, NaN where no triangle covers the pixel. Depth is interpolated
// perspective-correctly (linear in 1/Z across the screen).
inline std::vector<double> rasterize_depth(const artrecon::TriangleMesh& mesh,
                                           const artrecon::CameraIntrinsics& cam, int w, int h) {
  std::vector<double> z(static_cast<std::size_t>(w) * h, std::numeric_limits<double>::quiet_NaN());
  for (const auto& t : mesh.triangles) {
    Eigen::Vector2d s[3];
    double inv_z[3];
    bool ok = true;
    for (int c = 0; c < 3; ++c) {
      const Eigen::Vector3d& p = mesh.vertices[t[c]];
      if (p.z() <= 0.0) ok = false;
      s[c] = {cam.fx * p.x() / p.z() + cam.cx, cam.fy * p.y() / p.z() + cam.cy};
      inv_z[c] = 1.0 / p.z();
    }
    if (!ok) continue;
    const double area = (s[1] - s[0]).x() * (s[2] - s[0]).y() - (s[1] - s[0]).y() * (s[2] - s[0]).x();
    if (std::abs(area) < 1e-14) continue;
    const int u0 = std::max(0, static_cast<int>(std::floor(std::min({s[0].x(), s[1].x(), s[2].x()}))));
    const int u1 = std::min(w - 1, static_cast<int>(std::ceil(std::max({s[0].x(), s[1].x(), s[2].x()}))));
    const int v0 = std::max(0, static_cast<int>(std::floor(std::min({s[0].y(), s[1].y(), s[2].y()}))));
    const int v1 = std::min(h - 1, static_cast<int>(std::ceil(std::max({s[0].y(), s[1].y(), s[2].y()}))));
    for (int v = v0; v <= v1; ++v)
      for (int u = u0; u <= u1; ++u) {
        const Eigen::Vector2d q(u, v);
        auto edge = [&](const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
          return ((b - a).x() * (q - a).y() - (b - a).y() * (q - a).x()) / area;
        };
        const double b0 = edge(s[1], s[2]);
        const double b1 = edge(s[2], s[0]);
        const double b2 = edge(s[0], s[1]);
        if (b0 < 0.0 || b1 < 0.0 || b2 < 0.0) continue;
        const double depth = 1.0 / (b0 * inv_z[0] + b1 * inv_z[1] + b2 * inv_z[2]);
        double& cell = z[static_cast<std::size_t>(v) * w + u];
        if (std::isnan(cell) || depth < cell) cell = depth;
      }
  }
  return z;
}

inline double triangle_area(const artrecon::TriangleMesh& m, const artrecon::Triangle& t) {
  return 0.5 * (m.vertices[t[1]] - m.vertices[t[0]]).cross(m.vertices[t[2]] - m.vertices[t[0]]).norm();
}

// Signed enclosed volume; positive when triangles face outward.
inline double signed_volume(const artrecon::TriangleMesh& m) {
  double v = 0.0;
  for (const auto& t : m.triangles) {
    v += m.vertices[t[0]].dot(m.vertices[t[1]].cross(m.vertices[t[2]])) / 6.0;
  }
  return v;
}

}  // namespace testsupport
