#pragma once

#include "pv/geometry.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace pv {

/// One patch's estimate of the object pose (object frame -> scene frame).
struct PoseVote {
  RigidTransform pose;
  std::size_t source_patch = 0;
  double confidence = 1.0;
};

struct PoseCluster {
  RigidTransform pose;  // cluster mean
  std::vector<std::size_t> members;  // indices into the vote list, ascending
  double score = 0.0;

  /// Cluster mean as a 6-vector.
  PoseVector6 center() const { return to_vector(pose); }
};

/// P = invert(compose(from_vector(t_lo), t_gl)): scene -> patch frame -> object, inverted.
PoseVote cast_vote(const RigidTransform& t_gl, const PoseVector6& t_lo, std::size_t source_patch = 0,
                   double confidence = 1.0);

/// angle(R1^T R2) / pi + |t1 - t2| / D
double pose_distance(const RigidTransform& a, const RigidTransform& b, double diameter);

/// Translation mean plus the rotation closest to the mean rotation matrix.
RigidTransform mean_pose(std::span<const PoseVote> votes, std::span<const std::size_t> members);

struct AggregateOptions {
  int k = 10;
  double delta = 0.15;
  double min_frac = 0.05;
  int max_iters = 100;
  bool confidence_weighting = false;
};

/**
 * @brief Seeded K-means over pose votes followed by merging and pruning.
 *
 * Seeds are K distinct votes drawn with mt19937_64(seed); assignment uses
 * pose_distance and each center is the mean pose of its members. Afterwards
 * the closest pair of clusters closer than delta is merged until none remain,
 * and clusters smaller than min_frac * |votes| are dropped. Output is sorted by
 * descending score. Throws Errc::NoClusterSurvives when nothing is left.
 */
std::vector<PoseCluster> aggregate_votes(std::span<const PoseVote> votes, const AggregateOptions& options,
                                         double diameter, std::uint64_t seed);

enum class IcpDirection { model_to_scene, scene_to_model };

struct IcpOptions {
  int max_iters = 50;
  double tol = 1e-6;            // absolute RMSE improvement
  double reject_factor = 2.5;   // pairs beyond reject_factor * median are dropped
  double max_distance = 0.0;    // absolute cap on pair distance; 0 disables
  IcpDirection direction = IcpDirection::model_to_scene;
};

struct IcpResult {
  RigidTransform pose;
  double rmse = 0.0;
  std::vector<double> rmse_history;  // accepted iterations, starting with the initial pose
  int iterations = 0;
};

/**
 * @brief Point-to-point ICP of a model onto a scene segment.
 *
 * Steps are fitted on median-trimmed pairs, falling back to all pairs, and a
 * step is kept only if it does not increase the RMSE over all pairs inside
 * max_distance, so rmse_history is non-increasing. Throws Errc::NoCorrespondences when no pair survives the
 * rejection at the initial pose.
 */
IcpResult icp_refine(std::span<const Point3> model, std::span<const Point3> scene, const RigidTransform& initial,
                     const IcpOptions& options = {});

/// Greedy non-maximum suppression: drops any cluster within delta of a better one.
std::vector<PoseCluster> suppress_duplicates(std::vector<PoseCluster> clusters, double delta, double diameter);

}  // namespace pv
