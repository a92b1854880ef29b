#include "pv/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstdint>

namespace pv::kernels {

namespace {

double sum_in_order(const std::vector<double>& values) {
  double s = 0.0;
  for (double v : values) s += v;
  return s;
}

}  // namespace

namespace serial {

std::size_t fps_update(std::span<const Point3> points, const Point3& chosen, std::span<double> min_d2) {
  std::size_t best = 0;
  double best_d = -1.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double d = (points[i] - chosen).squaredNorm();
    if (d < min_d2[i]) min_d2[i] = d;
    if (min_d2[i] > best_d) {
      best_d = min_d2[i];
      best = i;
    }
  }
  return best;
}

std::vector<Neighbor> nearest_batch(const KdTree& tree, std::span<const Point3> queries) {
  std::vector<Neighbor> out(queries.size());
  for (std::size_t i = 0; i < queries.size(); ++i) out[i] = tree.nearest(queries[i]);
  return out;
}

BestMatch best_dot(const RowMatrix& rows, const Eigen::VectorXd& query) {
  BestMatch best;
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    const double s = rows.row(i).dot(query);
    if (s > best.score) best = {static_cast<std::size_t>(i), s};
  }
  return best;
}

double mean_pair_distance(std::span<const Point3> points, const RigidTransform& a, const RigidTransform& b) {
  if (points.empty()) return 0.0;
  std::vector<double> d(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) d[i] = (a(points[i]) - b(points[i])).norm();
  return sum_in_order(d) / static_cast<double>(points.size());
}

double mean_closest_distance(std::span<const Point3> points, const RigidTransform& a, const RigidTransform& b) {
  if (points.empty()) return 0.0;
  const std::vector<Point3> moved = b.apply(points);
  std::vector<double> d(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Point3 q = a(points[i]);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& m : moved) best = std::min(best, (m - q).squaredNorm());
    d[i] = std::sqrt(best);
  }
  return sum_in_order(d) / static_cast<double>(points.size());
}

}  // namespace serial

namespace parallel {

std::size_t fps_update(std::span<const Point3> points, const Point3& chosen, std::span<double> min_d2) {
  const auto n = static_cast<std::int64_t>(points.size());
  std::size_t best = 0;
  double best_d = -1.0;
#pragma omp parallel
  {
    std::size_t local = 0;
    double local_d = -1.0;
#pragma omp for schedule(static) nowait
    for (std::int64_t i = 0; i < n; ++i) {
      const double d = (points[i] - chosen).squaredNorm();
      if (d < min_d2[i]) min_d2[i] = d;
      if (min_d2[i] > local_d) {
        local_d = min_d2[i];
        local = static_cast<std::size_t>(i);
      }
    }
#pragma omp critical(pv_fps_argmax)
    {
      if (local_d > best_d || (local_d == best_d && local < best)) {
        best_d = local_d;
        best = local;
      }
    }
  }
  return best;
}

std::vector<Neighbor> nearest_batch(const KdTree& tree, std::span<const Point3> queries) {
  std::vector<Neighbor> out(queries.size());
  const auto n = static_cast<std::int64_t>(queries.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) out[i] = tree.nearest(queries[i]);
  return out;
}

BestMatch best_dot(const RowMatrix& rows, const Eigen::VectorXd& query) {
  std::vector<double> scores(static_cast<std::size_t>(rows.rows()));
  const auto n = static_cast<std::int64_t>(rows.rows());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) scores[i] = rows.row(i).dot(query);
  BestMatch best;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i] > best.score) best = {i, scores[i]};
  }
  return best;
}

double mean_pair_distance(std::span<const Point3> points, const RigidTransform& a, const RigidTransform& b) {
  if (points.empty()) return 0.0;
  std::vector<double> d(points.size());
  const auto n = static_cast<std::int64_t>(points.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) d[i] = (a(points[i]) - b(points[i])).norm();
  return sum_in_order(d) / static_cast<double>(points.size());
}

double mean_closest_distance(std::span<const Point3> points, const RigidTransform& a, const RigidTransform& b) {
  if (points.empty()) return 0.0;
  const std::vector<Point3> moved = b.apply(points);
  const KdTree tree(moved);
  std::vector<double> d(points.size());
  const auto n = static_cast<std::int64_t>(points.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) d[i] = std::sqrt(tree.nearest(a(points[i])).distance_sq);
  return sum_in_order(d) / static_cast<double>(points.size());
}

}  // namespace parallel

}  // namespace pv::kernels
