#pragma once

#include "pv/geometry.hpp"
#include "pv/kernels.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace pv {

/**
 * @brief Greedy farthest point sampling.
 *
 * The first index is a seeded uniform draw over the cloud; every later index
 * maximises the distance to the already chosen set (lowest index on ties).
 * Throws Errc::CountExceedsCloud when count > |points|.
 */
std::vector<std::size_t> farthest_point_sample(std::span<const Point3> points, std::size_t count, std::uint64_t seed,
                                               kernels::Exec exec = kernels::Exec::parallel);

/**
 * @brief FPS that keeps going until the samples are denser than `spacing`.
 *
 * Same sequence as farthest_point_sample with the same seed. Stops once at least
 * min_count indices are chosen and the next pick would lie closer than `spacing`
 * to the chosen set, or when the cloud is exhausted. `spaced` receives the length
 * of the prefix whose picks were all at least `spacing` away from earlier ones.
 */
std::vector<std::size_t> farthest_point_sample_spaced(std::span<const Point3> points, std::size_t min_count,
                                                      double spacing, std::uint64_t seed, std::size_t& spaced,
                                                      kernels::Exec exec = kernels::Exec::parallel);

/// Smallest pairwise distance within the selected subset.
double min_pairwise_distance(std::span<const Point3> points, std::span<const std::size_t> indices);

/// Mixes a base seed with a stream id into an independent 64-bit seed.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace pv
