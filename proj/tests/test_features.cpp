#include "fixtures.hpp"

#include "pv/error.hpp"
#include "pv/features.hpp"
#include "pv/patches.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

using namespace pv;

namespace {

std::vector<Feature> random_features(std::size_t count, int d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Feature> out;
  for (std::size_t i = 0; i < count; ++i) {
    Feature f(d);
    for (int j = 0; j < d; ++j) f(j) = u(rng);
    out.push_back(f);
  }
  return out;
}

std::vector<Point3> patch_points(std::uint64_t seed) {
  const auto db = build_patch_database_from_raw(fixtures::bracket(1500, seed), 20, {}, "b");
  return db.records[seed % db.records.size()].normalized_points.points;
}

}  // namespace

TEST_SUITE("features") {

TEST_CASE("descriptor layout follows the feature dimension") {
  CHECK(descriptor_layout(2048).grid == 8);
  CHECK(descriptor_layout(256).grid == 5);
  CHECK(descriptor_layout(45).grid == 1);
  CHECK_THROWS_WITH_AS(descriptor_layout(8), doctest::Contains("DimensionMismatch"), Error);
}

TEST_CASE("descriptor basics") {
  const auto pts = patch_points(1);
  const auto f = compute_descriptor(pts, 256);
  CHECK(f.size() == 256);
  CHECK(f.norm() == doctest::Approx(1.0));
  CHECK(f.minCoeff() >= -1.0);
  CHECK(f.tail(256 - descriptor_layout(256).raw()).norm() == 0.0);

  auto shuffled = pts;
  std::mt19937_64 rng(3);
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  CHECK((compute_descriptor(shuffled, 256) - f).cwiseAbs().maxCoeff() < 1e-12);

  CHECK((compute_descriptor(patch_points(2), 256) - f).norm() > 1e-3);
}

TEST_CASE("points at the origin fill the center cell only") {
  const std::vector<Point3> origin(50, Point3::Zero());
  const auto f = compute_descriptor(origin, 256);
  const auto layout = descriptor_layout(256);
  const int g = layout.grid;
  const int mid = g / 2;
  const int center = (mid * g + mid) * g + mid;
  for (int c = 0; c < layout.occupancy(); ++c) {
    if (c == center) {
      CHECK(f(c) > 0.0);
    } else {
      CHECK(f(c) == 0.0);
    }
  }
  CHECK(f.segment(layout.occupancy(), DescriptorLayout::kMoments).norm() == 0.0);
  CHECK(compute_descriptor(std::vector<Point3>{}, 256).norm() == 0.0);
}

TEST_CASE("descriptor is Lipschitz in the points") {
  // Measured bound on fixture patches; guards against discontinuous binning.
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst = 0.0;
  for (std::uint64_t s = 1; s <= 4; ++s) {
    const auto pts = patch_points(s);
    const auto base = compute_descriptor(pts, 256);
    for (const double delta : {1e-3, 1e-4}) {
      auto moved = pts;
      for (auto& p : moved) p += delta * Point3(u(rng), u(rng), u(rng)) / std::sqrt(3.0);
      worst = std::max(worst, (compute_descriptor(moved, 256) - base).norm() / delta);
    }
  }
  MESSAGE("measured Lipschitz ratio " << worst);
  CHECK(worst < 50.0);
}

TEST_CASE("neighbour weights") {
  const Point3 c0(0.1, -0.2, 0.3);
  for (const double d : {1.0, 0.37, 12.5}) {
    CHECK(neighbor_weight(c0, c0, d) == 1.0);
    CHECK(neighbor_weight(c0 + Point3(d, 0, 0), c0, d) == 0.0);
    CHECK(neighbor_weight(c0 + Point3(0, 2 * d, 0), c0, d) == 0.0);
  }
  CHECK(neighbor_weight(Point3(0.25, 0, 0), Point3::Zero(), 1.0) == 0.75);
  CHECK_THROWS_AS(neighbor_weight(c0, c0, 0.0), Error);
}

TEST_CASE("reference vectors") {
  const auto zeros = reference_vector(0.0, 64, 1);
  const auto ones = reference_vector(1.0, 64, 1);
  CHECK(std::count(zeros.begin(), zeros.end(), 1) == 0);
  CHECK(std::count(ones.begin(), ones.end(), 1) == 64);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto half = reference_vector(0.5, 2048, seed);
    const auto pop = std::count(half.begin(), half.end(), 1);
    CHECK(std::abs(static_cast<double>(pop) - 1024.0) <= 3.0 * std::sqrt(2048 * 0.25));
  }
  CHECK(reference_vector(0.3, 100, 9) == reference_vector(0.3, 100, 9));
}

TEST_CASE("fusion identities") {
  const auto fs = random_features(4, 16, 7);
  const std::vector<Feature> one{fs[0]};
  const std::vector<double> w1{1.0};
  CHECK(wnff_fuse(one, w1, FusionMode::expected, 0) == fs[0]);
  CHECK(wnff_fuse(one, w1, FusionMode::sampled, 0) == fs[0]);

  const std::vector<double> all(4, 1.0);
  Feature mx = fs[0];
  for (const auto& f : fs) mx = mx.cwiseMax(f);
  CHECK(wnff_fuse(fs, all, FusionMode::expected, 0) == mx);
  CHECK(wnff_fuse(fs, all, FusionMode::sampled, 3) == mx);

  const std::vector<Feature> pair{fs[0], fs[1]};
  const std::vector<double> off{1.0, 0.0};
  CHECK(wnff_fuse(pair, off, FusionMode::expected, 0) == fs[0]);
  CHECK(wnff_fuse(pair, off, FusionMode::sampled, 0) == fs[0]);

  CHECK_THROWS_WITH_AS(wnff_fuse(pair, w1, FusionMode::expected, 0), doctest::Contains("LengthMismatch"), Error);
  CHECK_THROWS_AS(wnff_fuse(pair, off, FusionMode::concat, 0), Error);
}

TEST_CASE("fusion never amplifies and is monotone in the weights") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const auto fs = random_features(5, 32, 100 + trial);
    std::vector<double> w{1.0, u(rng), u(rng), u(rng), u(rng)};
    Feature mx = fs[0];
    for (const auto& f : fs) mx = mx.cwiseMax(f);
    for (const auto mode : {FusionMode::expected, FusionMode::sampled}) {
      const auto out = wnff_fuse(fs, w, mode, trial);
      CHECK((out.array() <= mx.array()).all());
    }
    const auto before = wnff_fuse(fs, w, FusionMode::expected, 0);
    const auto i = 1 + trial % 4;
    w[i] = std::min(1.0, w[i] + u(rng));
    const auto after = wnff_fuse(fs, w, FusionMode::expected, 0);
    CHECK((after.array() >= before.array()).all());
  }
}

TEST_CASE("sampled fusion matches exhaustive mask enumeration at d_f = 8") {
  constexpr int d = 8;
  const auto fs = random_features(3, d, 21);
  const std::vector<double> w{1.0, 0.7, 0.35};

  // Exact law of each output entry: enumerate every on/off pattern of the three masks.
  std::vector<std::map<double, double>> law(d);
  for (int j = 0; j < d; ++j) {
    for (int bits = 0; bits < 8; ++bits) {
      double p = 1.0, v = 0.0;
      for (int i = 0; i < 3; ++i) {
        const bool on = (bits >> i) & 1;
        p *= on ? w[i] : 1.0 - w[i];
        if (on) v = std::max(v, fs[i](j));
      }
      if (p > 0.0) law[j][v] += p;
    }
  }

  // Every seed must produce the max over its own masks, and across seeds the
  // frequencies must follow the enumerated law.
  const int trials = 20000;
  std::vector<std::map<double, int>> seen(d);
  for (int s = 0; s < trials; ++s) {
    const auto out = wnff_fuse(fs, w, FusionMode::sampled, static_cast<std::uint64_t>(s) * 7919);
    for (int i = 0; i < 3; ++i) {
      const auto m = reference_vector(w[i], d, static_cast<std::uint64_t>(s) * 7919 + i);
      for (int j = 0; j < d; ++j) {
        if (m[j]) REQUIRE(out(j) >= fs[i](j));
      }
    }
    for (int j = 0; j < d; ++j) {
      REQUIRE(law[j].count(out(j)) == 1);
      ++seen[j][out(j)];
    }
  }
  for (int j = 0; j < d; ++j) {
    for (const auto& [v, p] : law[j]) {
      const double sigma = std::sqrt(trials * p * (1 - p));
      CHECK(std::abs(seen[j][v] - trials * p) <= 4.0 * sigma + 1.0);
    }
  }
}

TEST_CASE("concat projection") {
  const auto fs = random_features(4, 12, 31);
  const ConcatProjection proj(12, 3);
  CHECK(proj.inputs() == 4);
  Eigen::VectorXd stacked(48);
  for (int i = 0; i < 4; ++i) stacked.segment(12 * i, 12) = fs[i];
  CHECK((proj.matrix() * stacked - proj.apply(fs)).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((proj.apply(fs) - (fs[0] + (fs[1] + fs[2] + fs[3]) / 3.0)).cwiseAbs().maxCoeff() < 1e-15);

  // Neighbour order does not matter.
  const std::vector<Feature> swapped{fs[0], fs[3], fs[1], fs[2]};
  CHECK((proj.apply(swapped) - proj.apply(fs)).cwiseAbs().maxCoeff() < 1e-15);

  const ConcatProjection solo(12, 0);
  CHECK(solo.apply(std::vector<Feature>{fs[2]}) == fs[2]);
  CHECK_THROWS_AS(proj.apply(std::vector<Feature>{fs[0]}), Error);
}

}  // TEST_SUITE
