#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace artrecon {

struct Neighbor {
  std::size_t index = 0;
  double sq_distance = 0.0;

  /// Total order used everywhere: distance first, then lower index.
  friend bool operator<(const Neighbor& a, const Neighbor& b) {
    return a.sq_distance < b.sq_distance ||
           (a.sq_distance == b.sq_distance && a.index < b.index);
  }
  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// Squared Euclidean distance, evaluated component-wise in x, y, z order so
/// every caller gets bit-identical values.
inline double squared_distance(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  const double dx = a.x() - b.x();
  const double dy = a.y() - b.y();
  const double dz = a.z() - b.z();
  return dx * dx + dy * dy + dz * dz;
}

/// Static 3-d tree over a point set. Queries are const and thread-safe.
/// Equal distances are resolved by the lower point index, so results are
/// identical to a sorted brute-force scan.
class KdTree {
 public:
  static constexpr std::size_t kNoExclude = std::numeric_limits<std::size_t>::max();

  explicit KdTree(std::span<const Eigen::Vector3d> points);

  std::size_t size() const { return points_.size(); }

  /// The k nearest points sorted ascending. `exclude` drops one index from
  /// consideration (typically the query point itself).
  std::vector<Neighbor> knn(const Eigen::Vector3d& query, std::size_t k,
                            std::size_t exclude = kNoExclude) const;
  void knn(const Eigen::Vector3d& query, std::size_t k, std::size_t exclude,
           std::vector<Neighbor>& out) const;

  Neighbor nearest(const Eigen::Vector3d& query) const;

  /// All points with squared distance <= radius^2, sorted ascending.
  std::vector<Neighbor> radius_search(const Eigen::Vector3d& query, double radius) const;

  /// Number of points within radius, stopping early once `stop_at` is reached.
  std::size_t count_within(const Eigen::Vector3d& query, double radius,
                           std::size_t stop_at = std::numeric_limits<std::size_t>::max()) const;

 private:
  struct Node {
    // Leaf when split_axis < 0; children are node indices otherwise.
    int split_axis = -1;
    double split_value = 0.0;
    std::uint32_t left = 0;
    std::uint32_t right = 0;
    std::uint32_t begin = 0;
    std::uint32_t end = 0;
  };

  std::uint32_t build(std::uint32_t begin, std::uint32_t end);
  void knn_recurse(std::uint32_t node, const Eigen::Vector3d& q, std::size_t k,
                   std::size_t exclude, std::vector<Neighbor>& heap) const;
  template <typename Visit>
  bool radius_recurse(std::uint32_t node, const Eigen::Vector3d& q, double r2,
                      Visit& visit) const;

  std::vector<Eigen::Vector3d> points_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
};

}  // namespace artrecon
