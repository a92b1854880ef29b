#pragma once

// Data-parallel inner loops. Each kernel has a serial reference in
// pv::kernels::serial and an OpenMP version in pv::kernels::parallel with the
// same signature and bit-identical results; tests compare the two and
// bench/ times them.

#include "pv/geometry.hpp"
#include "pv/kdtree.hpp"

#include <Eigen/Core>

#include <span>
#include <vector>

namespace pv::kernels {

enum class Exec { serial, parallel };

/// Row-major so each template row is contiguous.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct BestMatch {
  std::size_t index = 0;
  double score = -2.0;
};

namespace serial {

/// min_d2[i] = min(min_d2[i], |p_i - chosen|^2); returns the argmax of the updated
/// array (lowest index on ties).
std::size_t fps_update(std::span<const Point3> points, const Point3& chosen, std::span<double> min_d2);

/// Nearest neighbour of every query under a prebuilt tree.
std::vector<Neighbor> nearest_batch(const KdTree& tree, std::span<const Point3> queries);

/// Row of `rows` with the largest dot product against `query`; lowest row on ties.
BestMatch best_dot(const RowMatrix& rows, const Eigen::VectorXd& query);

/// mean_i |a(p_i) - b(p_i)|
double mean_pair_distance(std::span<const Point3> points, const RigidTransform& a, const RigidTransform& b);

/// mean_i min_j |a(p_i) - b(p_j)|, brute force over all pairs.
double mean_closest_distance(std::span<const Point3> points, const RigidTransform& a, const RigidTransform& b);

}  // namespace serial

namespace parallel {

std::size_t fps_update(std::span<const Point3> points, const Point3& chosen, std::span<double> min_d2);
std::vector<Neighbor> nearest_batch(const KdTree& tree, std::span<const Point3> queries);
BestMatch best_dot(const RowMatrix& rows, const Eigen::VectorXd& query);
double mean_pair_distance(std::span<const Point3> points, const RigidTransform& a, const RigidTransform& b);
/// Same quantity as the serial version, using a k-d tree over b(points).
double mean_closest_distance(std::span<const Point3> points, const RigidTransform& a, const RigidTransform& b);

}  // namespace parallel

}  // namespace pv::kernels
