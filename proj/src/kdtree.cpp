#include "artrecon/kdtree.hpp"

#include <algorithm>
#include <stdexcept>

namespace artrecon {

namespace {
constexpr std::uint32_t kLeafSize = 8;
}

KdTree::KdTree(std::span<const Eigen::Vector3d> points)
    : points_(points.begin(), points.end()) {
  if (points_.size() >= std::numeric_limits<std::uint32_t>::max()) {
    throw std::invalid_argument("point set too large for KdTree");
  }
  order_.resize(points_.size());
  for (std::uint32_t i = 0; i < order_.size(); ++i) order_[i] = i;
  nodes_.reserve(2 * points_.size() / kLeafSize + 1);
  if (!points_.empty()) build(0, static_cast<std::uint32_t>(points_.size()));
}

std::uint32_t KdTree::build(std::uint32_t begin, std::uint32_t end) {
  const auto id = static_cast<std::uint32_t>(nodes_.size());
  nodes_.emplace_back();
  if (end - begin <= kLeafSize) {
    nodes_[id].begin = begin;
    nodes_[id].end = end;
    return id;
  }

  Eigen::Vector3d lo = points_[order_[begin]];
  Eigen::Vector3d hi = lo;
  for (std::uint32_t i = begin + 1; i < end; ++i) {
    lo = lo.cwiseMin(points_[order_[i]]);
    hi = hi.cwiseMax(points_[order_[i]]);
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  if (hi[axis] == lo[axis]) {
    // All points coincide; splitting cannot separate them.
    nodes_[id].begin = begin;
    nodes_[id].end = end;
    return id;
  }

  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) {
                     const double pa = points_[a][axis];
                     const double pb = points_[b][axis];
                     return pa < pb || (pa == pb && a < b);
                   });
  const double split = points_[order_[mid]][axis];
  const std::uint32_t left = build(begin, mid);
  const std::uint32_t right = build(mid, end);
  Node& node = nodes_[id];
  node.split_axis = axis;
  node.split_value = split;
  node.left = left;
  node.right = right;
  node.begin = begin;
  node.end = end;
  return id;
}

void KdTree::knn_recurse(std::uint32_t id, const Eigen::Vector3d& q, std::size_t k,
                         std::size_t exclude, std::vector<Neighbor>& heap) const {
  const Node& node = nodes_[id];
  if (node.split_axis < 0) {
    for (std::uint32_t i = node.begin; i < node.end; ++i) {
      const std::size_t idx = order_[i];
      if (idx == exclude) continue;
      const Neighbor cand{idx, squared_distance(q, points_[idx])};
      if (heap.size() < k) {
        heap.push_back(cand);
        std::push_heap(heap.begin(), heap.end());
      } else if (cand < heap.front()) {
        std::pop_heap(heap.begin(), heap.end());
        heap.back() = cand;
        std::push_heap(heap.begin(), heap.end());
      }
    }
    return;
  }
  // Left holds coordinates <= split, right holds >= split.
  const double diff = q[node.split_axis] - node.split_value;
  const std::uint32_t near = diff <= 0.0 ? node.left : node.right;
  const std::uint32_t far = diff <= 0.0 ? node.right : node.left;
  knn_recurse(near, q, k, exclude, heap);
  // Equal distances must still be visited: a tie may carry a lower index.
  if (heap.size() < k || diff * diff <= heap.front().sq_distance) {
    knn_recurse(far, q, k, exclude, heap);
  }
}

void KdTree::knn(const Eigen::Vector3d& query, std::size_t k, std::size_t exclude,
                 std::vector<Neighbor>& out) const {
  out.clear();
  if (k == 0 || nodes_.empty()) return;
  out.reserve(k + 1);
  knn_recurse(0, query, k, exclude, out);
  std::sort_heap(out.begin(), out.end());
}

std::vector<Neighbor> KdTree::knn(const Eigen::Vector3d& query, std::size_t k,
                                  std::size_t exclude) const {
  std::vector<Neighbor> out;
  knn(query, k, exclude, out);
  return out;
}

Neighbor KdTree::nearest(const Eigen::Vector3d& query) const {
  if (points_.empty()) throw std::logic_error("nearest() on an empty KdTree");
  std::vector<Neighbor> out;
  knn(query, 1, kNoExclude, out);
  return out.front();
}

template <typename Visit>
bool KdTree::radius_recurse(std::uint32_t id, const Eigen::Vector3d& q, double r2,
                            Visit& visit) const {
  const Node& node = nodes_[id];
  if (node.split_axis < 0) {
    for (std::uint32_t i = node.begin; i < node.end; ++i) {
      const std::size_t idx = order_[i];
      const double d2 = squared_distance(q, points_[idx]);
      if (d2 <= r2 && !visit(Neighbor{idx, d2})) return false;
    }
    return true;
  }
  const double diff = q[node.split_axis] - node.split_value;
  const std::uint32_t near = diff <= 0.0 ? node.left : node.right;
  const std::uint32_t far = diff <= 0.0 ? node.right : node.left;
  if (!radius_recurse(near, q, r2, visit)) return false;
  return diff * diff > r2 || radius_recurse(far, q, r2, visit);
}

std::vector<Neighbor> KdTree::radius_search(const Eigen::Vector3d& query,
                                            double radius) const {
  std::vector<Neighbor> out;
  if (nodes_.empty() || radius < 0.0) return out;
  auto visit = [&](const Neighbor& n) {
    out.push_back(n);
    return true;
  };
  radius_recurse(0, query, radius * radius, visit);
  std::sort(out.begin(), out.end());
  return out;
}

std::size_t KdTree::count_within(const Eigen::Vector3d& query, double radius,
                                 std::size_t stop_at) const {
  std::size_t count = 0;
  if (nodes_.empty() || radius < 0.0 || stop_at == 0) return 0;
  auto visit = [&](const Neighbor&) { return ++count < stop_at; };
  radius_recurse(0, query, radius * radius, visit);
  return count;
}

}  // namespace artrecon
