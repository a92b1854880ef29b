#pragma once

#include "pv/config.hpp"
#include "pv/features.hpp"
#include "pv/patches.hpp"
#include "pv/regressor.hpp"
#include "pv/voting.hpp"

#include <Eigen/Core>

#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace pv {

struct FeatureConfig {
  int d_f = 2048;
  int k = 8;
  FusionMode mode = FusionMode::expected;
  std::uint64_t seed = 0;  // resampling and mask seed; the database seed keeps scene and templates aligned
  int n_points = 256;
};

/// Feature settings of a run against a given database.
FeatureConfig feature_config(const RunConfig& cfg, const PatchDatabase& db);

/**
 * @brief Describes patch groups.
 *
 * Every member patch is expressed in the center patch's frame, resampled to
 * n_points, de-meaned and scaled by the patch radius before the descriptor is
 * taken. Members are then fused by weighted max-pooling or, in concat mode,
 * concatenated and projected back to d_f.
 */
class FeatureExtractor {
 public:
  explicit FeatureExtractor(FeatureConfig cfg);

  const FeatureConfig& config() const { return cfg_; }

  Feature describe(std::span<const Point3> points, const RigidTransform& to_lpcf, double radius,
                   std::size_t patch_id) const;

  /// Center first. At most k neighbours are used.
  std::vector<Feature> member_features(std::span<const std::span<const Point3>> members,
                                       std::span<const std::size_t> ids, const RigidTransform& to_lpcf,
                                       double radius) const;

  /// `epoch` >= 0 draws fresh masks for sampled fusion during training.
  Feature fuse(std::span<const Feature> members, std::span<const double> weights, std::size_t center_id,
               int epoch = -1) const;

 private:
  FeatureConfig cfg_;
  std::optional<ConcatProjection> concat_;
};

/// Member features of every database record (center first).
std::vector<std::vector<Feature>> database_member_features(const PatchDatabase& db, const FeatureExtractor& fx);

/// One fused feature row per record.
Eigen::MatrixXd fuse_database(const PatchDatabase& db, const std::vector<std::vector<Feature>>& members,
                              const FeatureExtractor& fx, int epoch = -1);

Eigen::MatrixXd database_features(const PatchDatabase& db, const FeatureExtractor& fx);

/// Feature cache stored next to a database file.
std::filesystem::path feature_cache_path(const std::filesystem::path& db_path);
void save_feature_cache(const Eigen::MatrixXd& features, const FeatureConfig& cfg, const std::filesystem::path& path);
/// Empty optional when the file is missing or was built with other settings.
std::optional<Eigen::MatrixXd> load_feature_cache(const FeatureConfig& cfg, std::size_t rows,
                                                  const std::filesystem::path& path);

std::vector<PoseVector6> database_targets(const PatchDatabase& db);

std::unique_ptr<TemplateRegressor> make_template_regressor(const PatchDatabase& db, Eigen::MatrixXd features);

MlpRegressor train_mlp(const PatchDatabase& db, const FeatureExtractor& fx, const RegressorConfig& rc,
                       TrainingReport* report = nullptr);

RegressorConfig regressor_config(const RunConfig& cfg);

struct StageTimes {
  double sampling = 0.0;
  double features = 0.0;
  double regression = 0.0;
  double aggregation = 0.0;
  double refinement = 0.0;

  double total() const { return sampling + features + regression + aggregation + refinement; }
};

struct Detection {
  RigidTransform pose;    // refined, original model frame -> scene
  RigidTransform coarse;  // cluster mean before ICP
  double score = 0.0;
  double rmse = 0.0;
  std::size_t votes = 0;
};

struct EstimateResult {
  std::vector<Detection> detections;
  std::vector<PoseVote> votes;  // original model frame -> scene
  StageTimes times;
  std::size_t groups = 0;
};

/**
 * @brief Scene segment -> object poses.
 *
 * Samples m centers, describes and regresses every usable patch group, casts
 * one vote per group, clusters the votes and refines each surviving cluster
 * with ICP. Throws Errc::EmptySegment, Errc::SegmentTooSmall or
 * Errc::NoClusterSurvives.
 */
class PoseEstimator {
 public:
  PoseEstimator(const PatchDatabase& db, const RunConfig& cfg, std::shared_ptr<const Regressor> regressor);

  EstimateResult estimate(const PointCloud& segment, bool refine = true) const;

  const FeatureExtractor& extractor() const { return fx_; }

 private:
  const PatchDatabase& db_;
  RunConfig cfg_;
  FeatureExtractor fx_;
  std::shared_ptr<const Regressor> regressor_;
};

/// A scene segment with its ground-truth pose (original model frame -> scene).
struct LabeledScene {
  PointCloud cloud;
  RigidTransform gt;
};

struct ArmResult {
  std::size_t trials = 0;
  std::size_t successes = 0;         // refined pose error < coeff * D
  std::size_t coarse_successes = 0;  // same test on the cluster mean
  std::size_t failures = 0;          // estimation threw
  double accuracy = 0.0;
  double database_seconds = 0.0;  // describing every database record
  double feature_seconds = 0.0;   // describing scene patches, summed over scenes

  double feature_wall() const { return database_seconds + feature_seconds; }
};

/**
 * Runs one configuration over labelled scenes with the template backend and
 * scores the top detection by ADD (ADD-S when `symmetric`). `model` is the
 * object in its original frame.
 */
ArmResult evaluate_arm(const PatchDatabase& db, const PointCloud& model, const RunConfig& cfg,
                       std::span<const LabeledScene> scenes, double coeff, bool symmetric = false);

}  // namespace pv
