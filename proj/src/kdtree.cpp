#include "pv/kdtree.hpp"

#include <algorithm>
#include <numeric>

namespace pv {

KdTree::KdTree(std::span<const Point3> points, std::size_t leaf_size) : points_(points) {
  order_.resize(points.size());
  std::iota(order_.begin(), order_.end(), 0u);
  if (!points.empty()) {
    nodes_.reserve(2 * points.size() / std::max<std::size_t>(leaf_size, 1) + 2);
    build(0, static_cast<std::uint32_t>(points.size()), std::max<std::size_t>(leaf_size, 1));
  }
}

std::int32_t KdTree::build(std::uint32_t begin, std::uint32_t end, std::size_t leaf_size) {
  const auto id = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back(Node{begin, end});
  if (end - begin <= leaf_size) return id;

  Eigen::Vector3d lo = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
  Eigen::Vector3d hi = -lo;
  for (auto i = begin; i < end; ++i) {
    lo = lo.cwiseMin(points_[order_[i]]);
    hi = hi.cwiseMax(points_[order_[i]]);
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  if (hi(axis) - lo(axis) <= 0.0) return id;  // all coincident

  const auto mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) { return points_[a](axis) < points_[b](axis); });
  const double split = points_[order_[mid]](axis);
  const auto left = build(begin, mid, leaf_size);
  const auto right = build(mid, end, leaf_size);
  nodes_[id].left = left;
  nodes_[id].right = right;
  nodes_[id].axis = axis;
  nodes_[id].split = split;
  return id;
}

Neighbor KdTree::nearest(const Point3& query) const {
  Neighbor best;
  if (!nodes_.empty()) nearest(0, query, best);
  return best;
}

void KdTree::nearest(std::int32_t node_id, const Point3& q, Neighbor& best) const {
  const Node& node = nodes_[node_id];
  if (node.axis < 0) {
    for (auto i = node.begin; i < node.end; ++i) {
      const std::size_t idx = order_[i];
      const double d = (points_[idx] - q).squaredNorm();
      if (d < best.distance_sq || (d == best.distance_sq && idx < best.index)) best = {idx, d};
    }
    return;
  }
  const double diff = q(node.axis) - node.split;
  const auto near = diff < 0.0 ? node.left : node.right;
  const auto far = diff < 0.0 ? node.right : node.left;
  nearest(near, q, best);
  if (diff * diff <= best.distance_sq) nearest(far, q, best);
}

std::vector<std::size_t> KdTree::radius_search(const Point3& query, double radius_value) const {
  std::vector<std::size_t> out;
  if (!nodes_.empty() && radius_value >= 0.0) radius(0, query, radius_value * radius_value, out);
  std::sort(out.begin(), out.end());
  return out;
}

void KdTree::radius(std::int32_t node_id, const Point3& q, double r2, std::vector<std::size_t>& out) const {
  const Node& node = nodes_[node_id];
  if (node.axis < 0) {
    for (auto i = node.begin; i < node.end; ++i) {
      if ((points_[order_[i]] - q).squaredNorm() <= r2) out.push_back(order_[i]);
    }
    return;
  }
  const double diff = q(node.axis) - node.split;
  if (diff <= 0.0 || diff * diff <= r2) radius(node.left, q, r2, out);
  if (diff >= 0.0 || diff * diff <= r2) radius(node.right, q, r2, out);
}

}  // namespace pv
