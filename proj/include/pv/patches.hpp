#pragma once

#include "pv/geometry.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace pv {

inline constexpr std::size_t kMinPatchPoints = 16;

/// Points of a cloud inside a ball around a sampled center.
struct Patch {
  std::size_t id = 0;                // position of the center in the FPS order
  std::vector<std::size_t> indices;  // into the source cloud, ascending
  PointCloud points;                 // source-frame coordinates
  Point3 center = Point3::Zero();
  double radius = 0.0;
  std::vector<std::size_t> neighbor_ids;
};

/// Patch expressed in its local PCA frame.
struct StandardizedPatch {
  PointCloud points;
  RigidTransform to_lpcf;
};

/// A center patch, its neighbours and fusion weights (weights[0] = 1 for the center).
struct PatchGroup {
  std::size_t center_id = 0;
  std::vector<std::size_t> member_ids;  // center first, then neighbours by distance
  std::vector<double> weights;
  RigidTransform to_lpcf;
};

struct PatchParams {
  double radius_factor = 0.15;
  int n_points = 256;
  int k_neighbors = 8;
  /// Neighbours come from the FPS prefix whose picks are at least
  /// neighbor_spacing * D_obj apart, so database and scene neighbours share one
  /// spacing however much of the object is visible.
  double neighbor_spacing = 0.05;
  std::uint64_t seed = 0;
};

struct PatchRecord {
  std::size_t patch_id = 0;
  StandardizedPatch standardized;
  PointCloud normalized_points;
  std::vector<std::size_t> neighbor_ids;
  std::vector<double> neighbor_weights;  // k+1 entries, self first
  PoseVector6 gt_vector;                 // LPCF -> OCF
  std::string source;
  bool train = true;
};

struct PatchDatabase {
  std::string model_id;
  PointCloud model;       // in the object frame (OCF)
  RigidTransform to_ocf;  // original model coordinates -> OCF
  double diameter = 0.0;
  double radius = 0.0;
  PatchParams params;
  std::vector<Patch> patches;  // every usable sampled patch, ordered by id
  std::vector<PatchRecord> records;
  std::size_t dropped_degenerate = 0;
  std::size_t dropped_sparse = 0;

  const Patch& patch(std::size_t id) const;
  PatchGroup group(const PatchRecord& record) const;
  std::size_t train_count() const;
};

/// Model expressed in its own PCA frame plus the applied transform.
std::pair<PointCloud, RigidTransform> standardize_model(const PointCloud& model);

/// All points with |p - center| <= r. Throws Errc::TooFewPoints below 16 points.
Patch extract_patch(const PointCloud& cloud, const Point3& center, double radius);

/**
 * @brief Fixed-size, de-meaned, unit-scaled copy of a patch.
 *
 * Exactly n points: unchanged when |points| == n, a seeded subset when larger,
 * and every point plus seeded draws with replacement when smaller. The result is
 * de-meaned and divided by `radius`.
 */
PointCloud normalize_points(std::span<const Point3> points, double radius, int n, std::uint64_t seed);
PointCloud normalize_patch(const Patch& patch, int n, std::uint64_t seed);

StandardizedPatch standardize_patch(const Patch& patch);

/// Seed used to resample patch `id` under a base seed.
std::uint64_t patch_seed(std::uint64_t base, std::size_t id);

/**
 * @brief Patch database over a standardized model.
 *
 * FPS picks the centers, r = radius_factor * D_obj, and each non-degenerate patch
 * becomes a record whose ground truth is the LPCF -> OCF transform. Degenerate
 * or sparse patches are dropped and counted. Records are split 4:1 into
 * train/validation with a seeded shuffle. Throws Errc::ModelNotStandardized when
 * the model is not already in its PCA frame.
 */
PatchDatabase build_patch_database(const PointCloud& model, int num_patches, const PatchParams& params,
                                   const std::string& model_id = "object");

/// Standardizes a raw model and builds the database over it.
PatchDatabase build_patch_database_from_raw(const PointCloud& raw_model, int num_patches, const PatchParams& params,
                                            const std::string& model_id = "object");

struct ScenePatches {
  std::vector<Patch> patches;
  std::vector<PatchGroup> groups;  // one per non-degenerate center patch
  std::size_t requested = 0;
  std::size_t dropped_degenerate = 0;
  std::size_t dropped_sparse = 0;
  bool too_small = false;  // fewer usable centers than requested
};

/// FPS of m voting centers on a segment. Neighbours are the k nearest centers of
/// the spaced FPS prefix, which may extend past m.
ScenePatches sample_scene_patches(const PointCloud& segment, int m, double radius_factor, int k, double diameter,
                                  double neighbor_spacing, std::uint64_t seed);

void write_database(const PatchDatabase& db, std::ostream& out);
PatchDatabase read_database(std::istream& in);
void save_database(const PatchDatabase& db, const std::filesystem::path& path);
PatchDatabase load_database(const std::filesystem::path& path);

}  // namespace pv
