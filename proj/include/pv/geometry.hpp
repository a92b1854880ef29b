#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace pv {

using Point3 = Eigen::Vector3d;

/**
 * @brief Ordered point set with optional unit normals.
 *
 * When present, normals.size() == points.size().
 */
struct PointCloud {
  std::vector<Point3> points;
  std::vector<Point3> normals;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  bool has_normals() const { return !normals.empty() && normals.size() == points.size(); }
};

/**
 * @brief Element of SE(3).
 *
 * x -> R x + t. Construction from an arbitrary matrix re-orthonormalizes it and
 * rejects reflections or matrices far from SO(3).
 */
class RigidTransform {
 public:
  RigidTransform() : rotation_(Eigen::Matrix3d::Identity()), translation_(Eigen::Vector3d::Zero()) {}
  RigidTransform(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation);

  static RigidTransform identity() { return {}; }
  static RigidTransform from_translation(const Eigen::Vector3d& t);
  static RigidTransform from_rotation(const Eigen::Matrix3d& r);

  const Eigen::Matrix3d& rotation() const { return rotation_; }
  const Eigen::Vector3d& translation() const { return translation_; }
  Eigen::Matrix4d matrix() const;

  Point3 apply(const Point3& p) const { return rotation_ * p + translation_; }
  Point3 operator()(const Point3& p) const { return apply(p); }
  std::vector<Point3> apply(std::span<const Point3> points) const;
  /// Rotates normals as well as moving points.
  PointCloud apply(const PointCloud& cloud) const;

 private:
  struct Unchecked {};
  RigidTransform(Unchecked, const Eigen::Matrix3d& r, const Eigen::Vector3d& t) : rotation_(r), translation_(t) {}

  friend RigidTransform compose(const RigidTransform& a, const RigidTransform& b);
  friend RigidTransform invert(const RigidTransform& t);

  Eigen::Matrix3d rotation_;
  Eigen::Vector3d translation_;
};

/// compose(a, b)(x) == a(b(x)).
RigidTransform compose(const RigidTransform& a, const RigidTransform& b);
RigidTransform invert(const RigidTransform& t);

/// Axis-angle rotation (axis scaled by angle, angle in [0, pi]) plus translation.
struct PoseVector6 {
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  Eigen::Vector3d rotation = Eigen::Vector3d::Zero();

  std::array<double, 6> as_array() const {
    return {translation.x(), translation.y(), translation.z(), rotation.x(), rotation.y(), rotation.z()};
  }
  static PoseVector6 from_array(const std::array<double, 6>& v) {
    return {Eigen::Vector3d(v[0], v[1], v[2]), Eigen::Vector3d(v[3], v[4], v[5])};
  }
};

/// Rotation angle in [0, pi].
double rotation_angle(const Eigen::Matrix3d& r);
/// Rotation logarithm as axis * angle with angle in [0, pi]. Defined everywhere.
Eigen::Vector3d rotation_log(const Eigen::Matrix3d& r);
Eigen::Matrix3d rotation_exp(const Eigen::Vector3d& w);

/// Closest rotation to an arbitrary 3x3 matrix (polar factor with det +1).
Eigen::Matrix3d project_to_rotation(const Eigen::Matrix3d& m);

inline constexpr double kAngleNearPiMargin = 1e-6;

/// Throws Errc::AngleNearPi when the rotation angle is within 1e-6 of pi.
PoseVector6 to_vector(const RigidTransform& t);
RigidTransform from_vector(const PoseVector6& v);

struct PcaOptions {
  double degeneracy_epsilon = 0.05;
};

/**
 * @brief Canonical frame of a point set.
 *
 * Returns T with T(x) = E^T (x - centroid), where the columns of E are the
 * covariance eigenvectors sorted by descending eigenvalue. The first two axes are
 * flipped so that the third moment along them is non-negative and the third axis
 * is their cross product. Throws Errc::DegenerateFrame when fewer than 4 points,
 * collinear input, or when lambda1/lambda2 or lambda2/lambda3 is not above
 * 1 + degeneracy_epsilon.
 */
RigidTransform pca_frame(std::span<const Point3> points, const PcaOptions& options = {});
inline RigidTransform pca_frame(const PointCloud& cloud, const PcaOptions& options = {}) {
  return pca_frame(std::span<const Point3>(cloud.points), options);
}

Point3 centroid(std::span<const Point3> points);

/// Enclosing-ball diameter: Ritter's ball checked against the exact farthest pair
/// of a deterministic subsample of at most 5000 points.
double object_diameter(std::span<const Point3> points);
inline double object_diameter(const PointCloud& cloud) { return object_diameter(std::span<const Point3>(cloud.points)); }

/// Least-squares rigid transform mapping src[i] onto dst[i] (SVD, reflection-corrected).
RigidTransform fit_rigid(std::span<const Point3> src, std::span<const Point3> dst);

}  // namespace pv
