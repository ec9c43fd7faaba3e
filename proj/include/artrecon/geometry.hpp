#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "artrecon/raster.hpp"

namespace artrecon {

/// Pinhole intrinsics in pixel units.
struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;

  void validate() const;

  /// fx = fy = max(W,H), principal point at the raster center.
  static CameraIntrinsics default_for(int width, int height);
};

/// Parallel arrays; `colors` and `normals` are either empty or sized like
/// `positions`.
struct PointCloud {
  std::vector<Eigen::Vector3d> positions;
  std::vector<Eigen::Vector3d> colors;
  std::vector<Eigen::Vector3d> normals;

  std::size_t size() const { return positions.size(); }
  bool empty() const { return positions.empty(); }
  bool has_colors() const { return !colors.empty(); }
  bool has_normals() const { return !normals.empty(); }

  /// Throws std::invalid_argument when the parallel-array or unit-normal
  /// invariants are broken.
  void validate() const;

  /// Keeps the listed indices, in the given order.
  PointCloud select(std::span<const std::size_t> indices) const;
};

struct ProjectedPixel {
  double u = 0.0;
  double v = 0.0;
  double depth = 0.0;
};

/// One point per pixel: X = (u - cx) D / fx, Y = (v - cy) D / fy, Z = D.
/// Pixel (u, v) is column u, row v of the raster.
PointCloud back_project(const DepthMap& depth, const RgbImage& image,
                        const CameraIntrinsics& cam);

/// Inverse of back_project for a single point. Requires Z > 0.
ProjectedPixel project(const Eigen::Vector3d& p, const CameraIntrinsics& cam);

struct OutlierParams {
  std::size_t k_neighbors = 20;
  double std_ratio = 2.0;

  void validate() const;
};

struct OutlierResult {
  PointCloud cloud;
  std::vector<std::size_t> removed_indices;
  // Per-point mean distance to the k nearest neighbours, and the
  // cloud-wide statistics the threshold was derived from.
  std::vector<double> mean_distances;
  double mean = 0.0;
  double stddev = 0.0;
  double threshold = 0.0;
};

/// Drops points whose mean k-NN distance exceeds mean + std_ratio * stddev
/// (sample standard deviation). Survivors keep their relative order.
OutlierResult remove_statistical_outliers(const PointCloud& pc, const OutlierParams& params);

struct NormalEstimate {
  PointCloud cloud;
  // Neighbourhoods whose k+1 points were collinear (or coincident); those
  // points receive the unit vector toward the origin.
  std::size_t degenerate_count = 0;
};

/// PCA plane fit over each point and its k nearest neighbours. Normals are
/// unit length and oriented toward the camera at the origin (n . p <= 0).
NormalEstimate estimate_normals(const PointCloud& pc, std::size_t k_neighbors);

}  // namespace artrecon
