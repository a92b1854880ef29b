#pragma once

#include "pv/config.hpp"
#include "pv/geometry.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <vector>

namespace pv {

using Feature = Eigen::VectorXd;
using ReferenceVector = std::vector<std::uint8_t>;

/// Block sizes of the raw descriptor for a given output dimension.
struct DescriptorLayout {
  int grid = 8;  // occupancy cells per axis
  static constexpr int kMoments = 12;
  static constexpr int kRadialBins = 32;
  static constexpr double kRadialMax = 1.5;

  int occupancy() const { return grid * grid * grid; }
  int raw() const { return occupancy() + kMoments + kRadialBins; }
};

/// Largest grid (at most 8 per axis) whose raw descriptor fits in d_f.
/// Throws Errc::DimensionMismatch when not even a 1-cell grid fits.
DescriptorLayout descriptor_layout(int d_f);

/**
 * @brief Deterministic, permutation-invariant patch descriptor.
 *
 * Blocks: trilinear occupancy over [-1,1]^3, per-axis moments of orders 1..4,
 * and a linearly binned radial histogram on [0, 1.5]. Each block is L2
 * normalized, the concatenation is zero padded to d_f and normalized again.
 */
Feature compute_descriptor(std::span<const Point3> normalized_points, int d_f);
inline Feature compute_descriptor(const PointCloud& normalized, int d_f) {
  return compute_descriptor(std::span<const Point3>(normalized.points), d_f);
}

/// clamp(1 - |c_i - c_0| / D, 0, 1)
double neighbor_weight(const Point3& c_i, const Point3& c_0, double diameter);

/// Each entry is 1 with probability omega under mt19937_64(seed).
ReferenceVector reference_vector(double omega, int d_f, std::uint64_t seed);

/**
 * Weighted max-pool over the center and neighbour features.
 * sampled:  F*[j] = max_i mask_i[j] F_i[j], mask_i = reference_vector(w_i, d_f, seed + i)
 * expected: F*[j] = max_i w_i F_i[j]
 * Throws Errc::LengthMismatch on mismatched inputs; concat is not a pooling mode.
 */
Feature wnff_fuse(std::span<const Feature> features, std::span<const double> weights, FusionMode mode,
                  std::uint64_t seed);

/**
 * @brief Linear map from the (k+1)*d_f concatenation back to d_f.
 *
 * Neighbours have no canonical order, so every neighbour block gets the same
 * coefficient: out = F_0 + (1/k) * sum_i F_i. No weights, no max-pool.
 */
class ConcatProjection {
 public:
  ConcatProjection(int d_f, int k);

  Feature apply(std::span<const Feature> features) const;
  /// Dense (d_f) x ((k+1) d_f) matrix of the same map, for tests.
  Eigen::MatrixXd matrix() const;
  int dim() const { return d_f_; }
  int inputs() const { return k_ + 1; }

 private:
  int d_f_;
  int k_;
};

}  // namespace pv
