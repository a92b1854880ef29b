#pragma once

#include "pv/geometry.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace fixtures {

// Procedural test objects, uniformly sampled on their surfaces.
pv::PointCloud bracket(std::size_t n = 2000, std::uint64_t seed = 1);
pv::PointCloud duck(std::size_t n = 2000, std::uint64_t seed = 2);
pv::PointCloud blob(std::size_t n = 2000, std::uint64_t seed = 3);
// 3:2:1 cuboid, small enough for quick database builds.
pv::PointCloud toy_box(std::size_t n = 600, std::uint64_t seed = 4);
// Capped cylinder along z; rotationally symmetric about its axis.
pv::PointCloud cylinder(std::size_t n = 1500, std::uint64_t seed = 5);

struct Named {
  std::string name;
  pv::PointCloud cloud;
};
std::vector<Named> acceptance_models();

pv::RigidTransform random_pose(std::mt19937_64& rng, double translation_scale);
pv::RigidTransform random_rotation(std::mt19937_64& rng);

// Unit cube random points; handy for property tests.
std::vector<pv::Point3> random_points(std::size_t n, std::uint64_t seed, double scale = 1.0);

}  // namespace fixtures
