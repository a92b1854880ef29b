#pragma once

#include "pv/geometry.hpp"

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

namespace pv {

struct Neighbor {
  std::size_t index = 0;
  double distance_sq = std::numeric_limits<double>::infinity();
};

/// Static 3-d tree over a borrowed point array. The points must outlive the tree.
class KdTree {
 public:
  KdTree() = default;
  explicit KdTree(std::span<const Point3> points, std::size_t leaf_size = 12);

  std::size_t size() const { return points_.size(); }

  /// Nearest point; ties resolve to the lowest index.
  Neighbor nearest(const Point3& query) const;
  /// Indices of all points with ||p - query|| <= radius, ascending.
  std::vector<std::size_t> radius_search(const Point3& query, double radius) const;

 private:
  struct Node {
    std::uint32_t begin = 0, end = 0;
    std::int32_t left = -1, right = -1;
    int axis = -1;
    double split = 0.0;
  };

  std::int32_t build(std::uint32_t begin, std::uint32_t end, std::size_t leaf_size);
  void nearest(std::int32_t node, const Point3& q, Neighbor& best) const;
  void radius(std::int32_t node, const Point3& q, double r2, std::vector<std::size_t>& out) const;

  std::span<const Point3> points_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
};

}  // namespace pv
