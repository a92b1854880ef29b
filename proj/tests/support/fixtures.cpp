#include "fixtures.hpp"

#include <array>
#include <cmath>
#include <numbers>

namespace fixtures {

namespace {

using pv::Point3;

struct Box {
  Point3 lo, hi;
  bool inside(const Point3& p) const {
    return (p.array() > lo.array() + 1e-9).all() && (p.array() < hi.array() - 1e-9).all();
  }
  double area() const {
    const Point3 e = hi - lo;
    return 2.0 * (e.x() * e.y() + e.y() * e.z() + e.x() * e.z());
  }
  Point3 sample(std::mt19937_64& rng) const {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const Point3 e = hi - lo;
    const std::array<double, 3> faces{e.y() * e.z(), e.x() * e.z(), e.x() * e.y()};
    double pick = u(rng) * (faces[0] + faces[1] + faces[2]);
    int axis = 0;
    while (axis < 2 && pick > faces[axis]) pick -= faces[axis++];
    Point3 p(lo.x() + u(rng) * e.x(), lo.y() + u(rng) * e.y(), lo.z() + u(rng) * e.z());
    p(axis) = u(rng) < 0.5 ? lo(axis) : hi(axis);
    return p;
  }
};

// Surface of a union of boxes: sample each box by area, drop points buried in another.
pv::PointCloud box_union(const std::vector<Box>& boxes, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<double> areas;
  for (const auto& b : boxes) areas.push_back(b.area());
  std::discrete_distribution<std::size_t> which(areas.begin(), areas.end());
  pv::PointCloud c;
  while (c.size() < n) {
    const std::size_t i = which(rng);
    const Point3 p = boxes[i].sample(rng);
    bool buried = false;
    for (std::size_t j = 0; j < boxes.size(); ++j) buried |= j != i && boxes[j].inside(p);
    if (!buried) c.points.push_back(p);
  }
  return c;
}

struct Ellipsoid {
  Point3 center;
  Point3 radii;
  double inside_value(const Point3& p) const { return ((p - center).array() / radii.array()).square().sum(); }
};

Point3 random_direction(std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Point3 d(g(rng), g(rng), g(rng));
  return d.normalized();
}

}  // namespace

pv::PointCloud bracket(std::size_t n, std::uint64_t seed) {
  // L-shaped bracket with a gusset block and an offset tab.
  return box_union({{{0.0, 0.0, 0.0}, {0.20, 0.04, 0.12}},
                    {{0.0, 0.0, 0.0}, {0.04, 0.14, 0.12}},
                    {{0.04, 0.04, 0.0}, {0.09, 0.08, 0.05}},
                    {{0.14, -0.03, 0.08}, {0.20, 0.0, 0.12}}},
                   n, seed);
}

pv::PointCloud duck(std::size_t n, std::uint64_t seed) {
  // Body, head, beak and tail as overlapping ellipsoids; keep surface points not inside another part.
  const std::vector<Ellipsoid> parts{{{0.0, 0.0, 0.0}, {0.09, 0.06, 0.05}},
                                     {{0.065, 0.0, 0.065}, {0.038, 0.035, 0.036}},
                                     {{0.108, 0.0, 0.058}, {0.03, 0.016, 0.008}},
                                     {{-0.09, 0.0, 0.03}, {0.03, 0.02, 0.012}}};
  std::mt19937_64 rng(seed);
  std::vector<double> weights;
  for (const auto& e : parts) weights.push_back(e.radii.prod() / e.radii.minCoeff());
  std::discrete_distribution<std::size_t> which(weights.begin(), weights.end());
  std::uniform_real_distribution<double> u(0.0, 1.0);
  pv::PointCloud c;
  while (c.size() < n) {
    const std::size_t i = which(rng);
    const Point3 d = random_direction(rng);
    const Point3 p = parts[i].center + d.cwiseProduct(parts[i].radii);
    // Thin out the stretched directions so density stays roughly uniform.
    const double stretch = (d.cwiseQuotient(parts[i].radii)).norm() * parts[i].radii.minCoeff();
    if (u(rng) > stretch) continue;
    bool buried = false;
    for (std::size_t j = 0; j < parts.size(); ++j) buried |= j != i && parts[j].inside_value(p) < 1.0;
    if (!buried) c.points.push_back(p);
  }
  return c;
}

pv::PointCloud blob(std::size_t n, std::uint64_t seed) {
  // Star-shaped surface r(d) = R (1 + sum of low-order bumps), squashed along y and z.
  std::mt19937_64 rng(seed);
  std::vector<std::pair<Point3, double>> bumps;
  std::normal_distribution<double> g(0.0, 1.0);
  for (int i = 0; i < 6; ++i) bumps.emplace_back(random_direction(rng), 0.3 * g(rng));
  pv::PointCloud c;
  while (c.size() < n) {
    const Point3 d = random_direction(rng);
    double r = 1.0;
    for (const auto& [axis, a] : bumps) r += a * std::pow(d.dot(axis), 3);
    c.points.push_back(Point3(0.08 * r * d.x(), 0.06 * r * d.y(), 0.045 * r * d.z()));
  }
  return c;
}

pv::PointCloud toy_box(std::size_t n, std::uint64_t seed) {
  return box_union({{{-0.06, -0.04, -0.02}, {0.06, 0.04, 0.02}}}, n, seed);
}

pv::PointCloud cylinder(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double r = 0.03, h = 0.12;
  const double side = 2.0 * std::numbers::pi * r * h, cap = std::numbers::pi * r * r;
  pv::PointCloud c;
  while (c.size() < n) {
    const double phi = 2.0 * std::numbers::pi * u(rng);
    if (u(rng) * (side + 2.0 * cap) < side) {
      c.points.emplace_back(r * std::cos(phi), r * std::sin(phi), h * (u(rng) - 0.5));
    } else {
      const double rr = r * std::sqrt(u(rng));
      c.points.emplace_back(rr * std::cos(phi), rr * std::sin(phi), u(rng) < 0.5 ? -h / 2 : h / 2);
    }
  }
  return c;
}

std::vector<Named> acceptance_models() {
  return {{"bracket", bracket()}, {"duck", duck()}, {"blob", blob()}};
}

pv::RigidTransform random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::Quaterniond q(g(rng), g(rng), g(rng), g(rng));
  q.normalize();
  return pv::RigidTransform::from_rotation(q.toRotationMatrix());
}

pv::RigidTransform random_pose(std::mt19937_64& rng, double translation_scale) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const auto r = random_rotation(rng);
  return pv::RigidTransform(r.rotation(), translation_scale * Eigen::Vector3d(u(rng), u(rng), 1.0 + std::abs(u(rng))));
}

std::vector<Point3> random_points(std::size_t n, std::uint64_t seed, double scale) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  std::vector<Point3> p(n);
  for (auto& x : p) x = Point3(u(rng), u(rng), u(rng));
  return p;
}

}  // namespace fixtures
