#include "pv/geometry.hpp"

#include "pv/error.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace pv {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::InvalidTransform: return "InvalidTransform";
    case Errc::DegenerateFrame: return "DegenerateFrame";
    case Errc::AngleNearPi: return "AngleNearPi";
    case Errc::CountExceedsCloud: return "CountExceedsCloud";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::EmptySegment: return "EmptySegment";
    case Errc::IoError: return "IoError";
    case Errc::ParseError: return "ParseError";
    case Errc::UnsupportedProperty: return "UnsupportedProperty";
    case Errc::TooFewPoints: return "TooFewPoints";
    case Errc::ModelNotStandardized: return "ModelNotStandardized";
    case Errc::SegmentTooSmall: return "SegmentTooSmall";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::UnknownModel: return "UnknownModel";
    case Errc::EmptyDatabase: return "EmptyDatabase";
    case Errc::DatabaseTooSmall: return "DatabaseTooSmall";
    case Errc::NoClusterSurvives: return "NoClusterSurvives";
    case Errc::NoCorrespondences: return "NoCorrespondences";
  }
  return "Unknown";
}

Eigen::Matrix3d project_to_rotation(const Eigen::Matrix3d& m) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  d(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  return svd.matrixU() * d * svd.matrixV().transpose();
}

RigidTransform::RigidTransform(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation) {
  if (!rotation.allFinite() || !translation.allFinite()) {
    throw Error(Errc::InvalidTransform, "non-finite entries");
  }
  if (rotation.determinant() <= 0.0) {
    throw Error(Errc::InvalidTransform, "rotation determinant is not positive");
  }
  const double ortho_error = (rotation.transpose() * rotation - Eigen::Matrix3d::Identity()).norm();
  if (ortho_error > 1e-3) {
    throw Error(Errc::InvalidTransform, "rotation is not orthonormal");
  }
  // Leave machine-precision rotations untouched so stored transforms round-trip bit for bit.
  rotation_ = ortho_error <= 1e-12 ? rotation : project_to_rotation(rotation);
  translation_ = translation;
}

RigidTransform RigidTransform::from_translation(const Eigen::Vector3d& t) {
  return RigidTransform(Eigen::Matrix3d::Identity(), t);
}

RigidTransform RigidTransform::from_rotation(const Eigen::Matrix3d& r) { return RigidTransform(r, Eigen::Vector3d::Zero()); }

Eigen::Matrix4d RigidTransform::matrix() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = rotation_;
  m.topRightCorner<3, 1>() = translation_;
  return m;
}

std::vector<Point3> RigidTransform::apply(std::span<const Point3> points) const {
  std::vector<Point3> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(apply(p));
  return out;
}

PointCloud RigidTransform::apply(const PointCloud& cloud) const {
  PointCloud out;
  out.points = apply(std::span<const Point3>(cloud.points));
  if (cloud.has_normals()) {
    out.normals.reserve(cloud.normals.size());
    for (const auto& n : cloud.normals) out.normals.push_back(rotation_ * n);
  }
  return out;
}

RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  return RigidTransform(RigidTransform::Unchecked{}, a.rotation_ * b.rotation_,
                        a.rotation_ * b.translation_ + a.translation_);
}

RigidTransform invert(const RigidTransform& t) {
  const Eigen::Matrix3d rt = t.rotation_.transpose();
  return RigidTransform(RigidTransform::Unchecked{}, rt, -(rt * t.translation_));
}

double rotation_angle(const Eigen::Matrix3d& r) { return rotation_log(r).norm(); }

Eigen::Vector3d rotation_log(const Eigen::Matrix3d& r) {
  // Quaternion route stays accurate at both 0 and pi.
  const Eigen::AngleAxisd aa(Eigen::Quaterniond(r).normalized());
  return aa.axis() * aa.angle();
}

Eigen::Matrix3d rotation_exp(const Eigen::Vector3d& w) {
  const double angle = w.norm();
  if (angle == 0.0) return Eigen::Matrix3d::Identity();
  return Eigen::AngleAxisd(angle, w / angle).toRotationMatrix();
}

PoseVector6 to_vector(const RigidTransform& t) {
  const Eigen::Vector3d w = rotation_log(t.rotation());
  if (w.norm() >= std::numbers::pi - kAngleNearPiMargin) {
    throw Error(Errc::AngleNearPi, "rotation angle too close to pi for a canonical axis-angle vector");
  }
  return {t.translation(), w};
}

RigidTransform from_vector(const PoseVector6& v) {
  if (!v.translation.allFinite() || !v.rotation.allFinite()) {
    throw Error(Errc::InvalidTransform, "non-finite pose vector");
  }
  return RigidTransform(rotation_exp(v.rotation), v.translation);
}

Point3 centroid(std::span<const Point3> points) {
  Point3 c = Point3::Zero();
  for (const auto& p : points) c += p;
  return points.empty() ? c : Point3(c / static_cast<double>(points.size()));
}

RigidTransform pca_frame(std::span<const Point3> points, const PcaOptions& options) {
  if (points.size() < 4) throw Error(Errc::DegenerateFrame, "fewer than 4 points");

  const Point3 c = centroid(points);
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& p : points) {
    const Eigen::Vector3d d = p - c;
    cov.noalias() += d * d.transpose();
  }
  cov /= static_cast<double>(points.size());

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(cov);
  // Ascending order from Eigen; reverse to descending.
  const Eigen::Vector3d ev = solver.eigenvalues();
  const double l1 = ev(2), l2 = ev(1), l3 = std::max(ev(0), 0.0);
  if (!(l1 > 0.0) || l2 <= 1e-12 * l1) throw Error(Errc::DegenerateFrame, "collinear or coincident points");
  const double ratio = 1.0 + options.degeneracy_epsilon;
  if (!(l1 > ratio * l2) || !(l2 > ratio * l3)) {
    throw Error(Errc::DegenerateFrame, "covariance eigenvalues too close");
  }

  Eigen::Vector3d axes[2] = {solver.eigenvectors().col(2), solver.eigenvectors().col(1)};
  const double scale = std::sqrt(l1);
  const double tie = 1e-12 * scale * scale * scale;
  for (auto& e : axes) {
    double moment = 0.0;
    for (const auto& p : points) {
      const double s = (p - c).dot(e);
      moment += s * s * s;
    }
    moment /= static_cast<double>(points.size());
    const bool flip = std::abs(moment) < tie ? e.sum() < 0.0 : moment < 0.0;
    if (flip) e = -e;
  }

  Eigen::Matrix3d basis;
  basis.col(0) = axes[0];
  basis.col(1) = axes[1];
  basis.col(2) = axes[0].cross(axes[1]);
  const Eigen::Matrix3d r = basis.transpose();
  return RigidTransform(r, -(r * c));
}

double object_diameter(std::span<const Point3> points) {
  if (points.size() < 2) return 0.0;

  // Ritter's bounding sphere.
  auto farthest_from = [&](const Point3& q) {
    std::size_t best = 0;
    double best_d = -1.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      const double d = (points[i] - q).squaredNorm();
      if (d > best_d) {
        best_d = d;
        best = i;
      }
    }
    return best;
  };
  const std::size_t y = farthest_from(points[0]);
  const std::size_t z = farthest_from(points[y]);
  Point3 center = 0.5 * (points[y] + points[z]);
  double radius = 0.5 * (points[y] - points[z]).norm();
  for (const auto& p : points) {
    const double d = (p - center).norm();
    if (d > radius) {
      const double grown = 0.5 * (radius + d);
      center += ((d - grown) / d) * (p - center);
      radius = grown;
    }
  }

  // Exact farthest pair on a strided subsample.
  const std::size_t stride = (points.size() + 4999) / 5000;
  std::vector<Point3> sub;
  for (std::size_t i = 0; i < points.size(); i += stride) sub.push_back(points[i]);
  double pair2 = 0.0;
  for (std::size_t i = 0; i < sub.size(); ++i) {
    for (std::size_t j = i + 1; j < sub.size(); ++j) pair2 = std::max(pair2, (sub[i] - sub[j]).squaredNorm());
  }
  const double pair = std::sqrt(pair2);

  // The enclosing-ball diameter lies in [pair, 2 * radius]. Ritter overshoots
  // near-spherical extents by a few percent, so the verified pair distance wins.
  return std::min(pair, 2.0 * radius);
}

RigidTransform fit_rigid(std::span<const Point3> src, std::span<const Point3> dst) {
  if (src.size() != dst.size()) throw Error(Errc::LengthMismatch, "fit_rigid: correspondence sets differ in size");
  if (src.empty()) throw Error(Errc::NoCorrespondences, "fit_rigid: no correspondences");
  const Point3 cs = centroid(src);
  const Point3 cd = centroid(dst);
  Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) h.noalias() += (src[i] - cs) * (dst[i] - cd).transpose();
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  d(2, 2) = (svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  const Eigen::Matrix3d r = svd.matrixV() * d * svd.matrixU().transpose();
  return RigidTransform(r, cd - r * cs);
}

}  // namespace pv
