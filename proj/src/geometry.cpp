#include "artrecon/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Eigenvalues>

#include "artrecon/kdtree.hpp"

namespace artrecon {

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0) || !std::isfinite(fx) || !std::isfinite(fy)) {
    throw std::invalid_argument("camera focal lengths must be positive and finite");
  }
  if (!std::isfinite(cx) || !std::isfinite(cy)) {
    throw std::invalid_argument("camera principal point must be finite");
  }
}

CameraIntrinsics CameraIntrinsics::default_for(int width, int height) {
  const double f = std::max(width, height);
  return {f, f, width / 2.0, height / 2.0};
}

void PointCloud::validate() const {
  const std::size_t n = positions.size();
  if (!colors.empty() && colors.size() != n) {
    throw std::invalid_argument("point cloud colors not parallel to positions");
  }
  if (!normals.empty() && normals.size() != n) {
    throw std::invalid_argument("point cloud normals not parallel to positions");
  }
  for (const auto& p : positions) {
    if (!p.allFinite()) throw std::invalid_argument("point cloud has non-finite positions");
  }
  for (const auto& nrm : normals) {
    if (std::abs(nrm.norm() - 1.0) > 1e-4) {
      throw std::invalid_argument("point cloud normal is not unit length");
    }
  }
}

PointCloud PointCloud::select(std::span<const std::size_t> indices) const {
  PointCloud out;
  out.positions.reserve(indices.size());
  for (std::size_t i : indices) out.positions.push_back(positions[i]);
  if (has_colors()) {
    out.colors.reserve(indices.size());
    for (std::size_t i : indices) out.colors.push_back(colors[i]);
  }
  if (has_normals()) {
    out.normals.reserve(indices.size());
    for (std::size_t i : indices) out.normals.push_back(normals[i]);
  }
  return out;
}

PointCloud back_project(const DepthMap& depth, const RgbImage& image,
                        const CameraIntrinsics& cam) {
  cam.validate();
  validate(depth);
  validate(image);
  if (depth.width != image.width || depth.height != image.height) {
    throw std::invalid_argument(
        "depth map " + std::to_string(depth.width) + "x" + std::to_string(depth.height) +
        " does not match image " + std::to_string(image.width) + "x" +
        std::to_string(image.height));
  }
  PointCloud pc;
  const std::size_t n = depth.values.size();
  pc.positions.reserve(n);
  pc.colors.reserve(n);
  for (int v = 0; v < depth.height; ++v) {
    for (int u = 0; u < depth.width; ++u) {
      const double d = depth.at(u, v);
      pc.positions.emplace_back((u - cam.cx) * d / cam.fx, (v - cam.cy) * d / cam.fy, d);
      pc.colors.push_back(image.at(u, v).cast<double>());
    }
  }
  return pc;
}

ProjectedPixel project(const Eigen::Vector3d& p, const CameraIntrinsics& cam) {
  cam.validate();
  if (!(p.z() > 0.0)) {
    throw std::invalid_argument("cannot project a point with non-positive depth");
  }
  return {cam.fx * p.x() / p.z() + cam.cx, cam.fy * p.y() / p.z() + cam.cy, p.z()};
}

void OutlierParams::validate() const {
  if (k_neighbors < 1) throw std::invalid_argument("outliers.k must be >= 1");
  if (!(std_ratio > 0.0)) throw std::invalid_argument("outliers.std_ratio must be > 0");
}

OutlierResult remove_statistical_outliers(const PointCloud& pc, const OutlierParams& params) {
  params.validate();
  pc.validate();
  const std::size_t n = pc.size();
  if (n <= params.k_neighbors) {
    throw std::invalid_argument("statistical outlier removal needs more than " +
                                std::to_string(params.k_neighbors) + " points, got " +
                                std::to_string(n));
  }

  const KdTree tree(pc.positions);
  OutlierResult result;
  result.mean_distances.resize(n);
  std::vector<Neighbor> nn;
  for (std::size_t i = 0; i < n; ++i) {
    tree.knn(pc.positions[i], params.k_neighbors, i, nn);
    double sum = 0.0;
    for (const auto& nb : nn) sum += std::sqrt(nb.sq_distance);
    result.mean_distances[i] = sum / static_cast<double>(nn.size());
  }

  // Sequential index-order reductions keep the statistics reproducible.
  double sum = 0.0;
  for (double m : result.mean_distances) sum += m;
  result.mean = sum / static_cast<double>(n);
  double sq = 0.0;
  for (double m : result.mean_distances) sq += (m - result.mean) * (m - result.mean);
  result.stddev = std::sqrt(sq / static_cast<double>(n - 1));
  result.threshold = result.mean + params.std_ratio * result.stddev;

  std::vector<std::size_t> keep;
  keep.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (result.mean_distances[i] > result.threshold) {
      result.removed_indices.push_back(i);
    } else {
      keep.push_back(i);
    }
  }
  result.cloud = pc.select(keep);
  return result;
}

NormalEstimate estimate_normals(const PointCloud& pc, std::size_t k_neighbors) {
  if (k_neighbors < 3) throw std::invalid_argument("normal estimation needs k >= 3");
  pc.validate();
  const std::size_t n = pc.size();
  if (n <= k_neighbors) {
    throw std::invalid_argument("normal estimation needs more than " +
                                std::to_string(k_neighbors) + " points, got " +
                                std::to_string(n));
  }

  NormalEstimate out;
  out.cloud = pc;
  out.cloud.normals.assign(n, Eigen::Vector3d::Zero());
  const KdTree tree(pc.positions);
  std::vector<Neighbor> nn;
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector3d& p = pc.positions[i];
    tree.knn(p, k_neighbors, i, nn);

    Eigen::Vector3d centroid = p;
    for (const auto& nb : nn) centroid += pc.positions[nb.index];
    centroid /= static_cast<double>(nn.size() + 1);
    Eigen::Matrix3d cov = (p - centroid) * (p - centroid).transpose();
    for (const auto& nb : nn) {
      const Eigen::Vector3d d = pc.positions[nb.index] - centroid;
      cov += d * d.transpose();
    }

    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
    const Eigen::Vector3d lambda = eig.eigenvalues();  // ascending
    Eigen::Vector3d normal;
    if (!(lambda[1] > 1e-12 * lambda[2])) {
      ++out.degenerate_count;
      const double len = p.norm();
      normal = len > 0.0 ? Eigen::Vector3d(-p / len) : Eigen::Vector3d(0.0, 0.0, -1.0);
    } else {
      normal = eig.eigenvectors().col(0).normalized();
      if (normal.dot(p) > 0.0) normal = -normal;
    }
    out.cloud.normals[i] = normal;
  }
  return out;
}

}  // namespace artrecon
