#include "pv/sampling.hpp"

#include "pv/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace pv {

std::vector<std::size_t> farthest_point_sample(std::span<const Point3> points, std::size_t count, std::uint64_t seed,
                                               kernels::Exec exec) {
  if (count > points.size()) {
    throw Error(Errc::CountExceedsCloud,
                "requested " + std::to_string(count) + " samples from " + std::to_string(points.size()) + " points");
  }
  std::vector<std::size_t> chosen;
  if (count == 0) return chosen;
  chosen.reserve(count);

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, points.size() - 1);
  chosen.push_back(pick(rng));

  // Chosen entries are pinned to -inf so duplicates never re-select them.
  std::vector<double> min_d2(points.size(), std::numeric_limits<double>::infinity());
  min_d2[chosen.front()] = -std::numeric_limits<double>::infinity();
  while (chosen.size() < count) {
    const Point3& last = points[chosen.back()];
    const std::size_t next = exec == kernels::Exec::serial ? kernels::serial::fps_update(points, last, min_d2)
                                                           : kernels::parallel::fps_update(points, last, min_d2);
    min_d2[next] = -std::numeric_limits<double>::infinity();
    chosen.push_back(next);
  }
  return chosen;
}

std::vector<std::size_t> farthest_point_sample_spaced(std::span<const Point3> points, std::size_t min_count,
                                                      double spacing, std::uint64_t seed, std::size_t& spaced,
                                                      kernels::Exec exec) {
  if (min_count > points.size()) {
    throw Error(Errc::CountExceedsCloud,
                "requested " + std::to_string(min_count) + " samples from " + std::to_string(points.size()) + " points");
  }
  std::vector<std::size_t> chosen;
  spaced = 0;
  if (points.empty()) return chosen;

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, points.size() - 1);
  chosen.push_back(pick(rng));
  spaced = 1;
  const double spacing2 = spacing * spacing;

  std::vector<double> min_d2(points.size(), std::numeric_limits<double>::infinity());
  min_d2[chosen.front()] = -std::numeric_limits<double>::infinity();
  while (chosen.size() < points.size()) {
    const Point3& last = points[chosen.back()];
    const std::size_t next = exec == kernels::Exec::serial ? kernels::serial::fps_update(points, last, min_d2)
                                                           : kernels::parallel::fps_update(points, last, min_d2);
    const bool wide = min_d2[next] >= spacing2;
    if (!wide && chosen.size() >= min_count) break;
    if (wide && spaced == chosen.size()) ++spaced;
    min_d2[next] = -std::numeric_limits<double>::infinity();
    chosen.push_back(next);
  }
  return chosen;
}

double min_pairwise_distance(std::span<const Point3> points, std::span<const std::size_t> indices) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < indices.size(); ++i) {
    for (std::size_t j = i + 1; j < indices.size(); ++j) {
      best = std::min(best, (points[indices[i]] - points[indices[j]]).squaredNorm());
    }
  }
  return std::sqrt(best);
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finaliser over the combined value.
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace pv
