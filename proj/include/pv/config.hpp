#pragma once

#include "pv/dataset_io.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

namespace pv {

enum class FusionMode { sampled, expected, concat };
enum class Backend { template_match, mlp };

std::string to_string(FusionMode mode);
std::string to_string(Backend backend);
FusionMode parse_fusion_mode(const std::string& s);
Backend parse_backend(const std::string& s);

/// Every tunable of the pipeline. Defaults follow the documented choices:
/// r = 0.15 D_obj, 256 points per patch, 8 neighbours, 2048-D features.
struct RunConfig {
  // patches
  double radius_factor = 0.15;
  int n_points = 256;
  int k_neighbors = 8;
  int num_patches = 3000;
  int m_centers = 100;
  double neighbor_spacing = 0.05;  // fraction of D_obj
  // features / regression
  int feature_dim = 2048;
  FusionMode fusion_mode = FusionMode::expected;
  Backend backend = Backend::template_match;
  // aggregation
  int kmeans_K = 10;
  double delta = 0.15;
  double min_cluster_frac = 0.05;
  bool confidence_weighting = false;
  // refinement
  int icp_iters = 50;
  double icp_tol = 1e-6;  // fraction of D_obj
  double icp_reject_factor = 2.5;
  double icp_max_distance = 0.15;  // fraction of D_obj
  bool icp_scene_to_model = true;   // match scene points to the model instead
  // training
  int epochs = 600;
  int batch_size = 32;
  double learning_rate = 1e-3;
  // camera
  io::CameraIntrinsics intrinsics{572.4114, 573.57043, 325.2611, 242.04899, 0.001};
  std::uint64_t seed = 0;

  /// Throws Errc::InvalidArgument for out-of-range values.
  void validate() const;
};

/// Applies `key = value` pairs (comments start with '#'). Unknown keys and
/// unparsable values throw Errc::ParseError with the line number.
void apply_config_text(RunConfig& cfg, const std::string& text);
RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});

/// Sets one key; throws Errc::ParseError on unknown keys.
void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value);

}  // namespace pv
