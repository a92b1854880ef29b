#pragma once

#include "pv/geometry.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace pv::io {

struct CameraIntrinsics {
  double fx = 0.0, fy = 0.0;  // pixels
  double cx = 0.0, cy = 0.0;  // pixels
  double depth_scale = 0.001;  // meters per depth unit

  void validate() const;
};

/// Row-major single-channel image.
template <typename T>
struct Image {
  int width = 0;
  int height = 0;
  std::vector<T> pixels;

  Image() = default;
  Image(int w, int h, T fill = T{}) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {}

  T& at(int u, int v) { return pixels[static_cast<std::size_t>(v) * width + u]; }
  const T& at(int u, int v) const { return pixels[static_cast<std::size_t>(v) * width + u]; }
};

using DepthImage = Image<std::uint16_t>;
/// Per-pixel class id, 0 = background.
using SegmentationMask = Image<std::uint8_t>;

DepthImage read_depth_pgm(const std::filesystem::path& path);
SegmentationMask read_mask_pgm(const std::filesystem::path& path);
void write_pgm(const DepthImage& image, const std::filesystem::path& path);
void write_pgm(const SegmentationMask& image, const std::filesystem::path& path);

/// Back-projects every pixel labelled class_id with positive depth.
PointCloud depth_to_cloud(const DepthImage& depth, const CameraIntrinsics& intrinsics, const SegmentationMask& mask,
                          int class_id);

// ---- PLY ------------------------------------------------------------------

enum class PlyFormat { ascii, binary_little_endian };

/// Reads x, y, z and optional nx, ny, nz from the vertex element. Other vertex
/// properties are skipped; other elements are skipped entirely.
PointCloud read_ply(std::istream& in);
PointCloud load_ply(const std::filesystem::path& path);
void write_ply(const PointCloud& cloud, std::ostream& out, PlyFormat format = PlyFormat::binary_little_endian);
void save_ply(const PointCloud& cloud, const std::filesystem::path& path,
              PlyFormat format = PlyFormat::binary_little_endian);

// ---- synthetic scenes -------------------------------------------------------

struct SceneAnnotation {
  std::string object_id;
  RigidTransform gt_pose;
  int instance_count = 1;
};

struct SyntheticScene {
  PointCloud cloud;
  SceneAnnotation annotation;
};

/**
 * @brief Model placed at `pose`, half-space cropped and noised.
 *
 * Removes floor(crop_fraction * N) points with the largest projection on a seeded
 * random direction, keeping the remaining points in model order, then adds
 * isotropic Gaussian noise with sigma = noise_sigma * D_obj.
 */
SyntheticScene synth_scene(const PointCloud& model, const RigidTransform& pose, double noise_sigma,
                           double crop_fraction, std::uint64_t seed, const std::string& object_id = "object");

// ---- pose records -----------------------------------------------------------

/// One line: `obj <id> R <9 floats row-major> t <3 floats> [score <float>] [patch <id>]`.
struct PoseRecord {
  std::string object_id;
  RigidTransform pose;
  std::optional<double> score;
  std::optional<long> patch;
};

std::string format_record(const PoseRecord& record);
/// Throws Errc::ParseError naming the line number on malformed input, including
/// rotations that are not proper (det <= 0 or not orthonormal within 1e-6).
PoseRecord parse_record(const std::string& line, std::size_t line_number = 0);

/// Records plus '#'-prefixed comment lines (ignored on load).
void save_records(std::span<const PoseRecord> records, const std::filesystem::path& path,
                  std::span<const std::string> comments = {});
std::vector<PoseRecord> load_records(const std::filesystem::path& path);

/// Detections and (optionally) the raw votes that produced them. Vote lines are
/// the ones carrying a `patch` field.
struct ResultSet {
  std::vector<PoseRecord> detections;
  std::vector<PoseRecord> votes;
};

void save_results(const ResultSet& results, const std::filesystem::path& path,
                  std::span<const std::string> comments = {});
ResultSet load_results(const std::filesystem::path& path);

/// Ground-truth file in the record format; instance_count is the number of
/// records sharing an object id.
std::vector<SceneAnnotation> load_annotations(const std::filesystem::path& path);
void save_annotations(std::span<const SceneAnnotation> annotations, const std::filesystem::path& path);

}  // namespace pv::io
