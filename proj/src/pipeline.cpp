#include "pv/pipeline.hpp"

#include "pv/error.hpp"
#include "pv/metrics.hpp"
#include "pv/sampling.hpp"

#include <chrono>
#include <cstring>
#include <fstream>
#include <unordered_map>

namespace pv {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

}  // namespace

FeatureConfig feature_config(const RunConfig& cfg, const PatchDatabase& db) {
  if (cfg.k_neighbors > db.params.k_neighbors) {
    throw Error(Errc::InvalidArgument, "k = " + std::to_string(cfg.k_neighbors) + " exceeds the database's " +
                                           std::to_string(db.params.k_neighbors) + " stored neighbours");
  }
  FeatureConfig f;
  f.d_f = cfg.feature_dim;
  f.k = cfg.k_neighbors;
  f.mode = cfg.fusion_mode;
  f.seed = db.params.seed;
  f.n_points = db.params.n_points;
  return f;
}

FeatureExtractor::FeatureExtractor(FeatureConfig cfg) : cfg_(cfg) {
  descriptor_layout(cfg_.d_f);  // validates d_f
  if (cfg_.k < 0) throw Error(Errc::InvalidArgument, "k must be non-negative");
  if (cfg_.mode == FusionMode::concat) concat_.emplace(cfg_.d_f, cfg_.k);
}

Feature FeatureExtractor::describe(std::span<const Point3> points, const RigidTransform& to_lpcf, double radius,
                                   std::size_t patch_id) const {
  const auto local = to_lpcf.apply(points);
  const auto normalized = normalize_points(local, radius, cfg_.n_points, patch_seed(cfg_.seed, patch_id));
  return compute_descriptor(normalized, cfg_.d_f);
}

std::vector<Feature> FeatureExtractor::member_features(std::span<const std::span<const Point3>> members,
                                                       std::span<const std::size_t> ids,
                                                       const RigidTransform& to_lpcf, double radius) const {
  if (members.size() != ids.size() || members.empty()) throw Error(Errc::LengthMismatch, "one id per member required");
  const std::size_t n = std::min(members.size(), static_cast<std::size_t>(cfg_.k) + 1);
  std::vector<Feature> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(describe(members[i], to_lpcf, radius, ids[i]));
  return out;
}

Feature FeatureExtractor::fuse(std::span<const Feature> members, std::span<const double> weights,
                               std::size_t center_id, int epoch) const {
  const std::size_t n = std::min(members.size(), static_cast<std::size_t>(cfg_.k) + 1);
  if (weights.size() < n) throw Error(Errc::LengthMismatch, "one weight per member required");
  if (concat_) {
    std::vector<Feature> padded(members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n));
    padded.resize(static_cast<std::size_t>(cfg_.k) + 1, Feature::Zero(cfg_.d_f));
    Feature f = concat_->apply(padded);
    const double norm = f.norm();
    return norm > 0.0 ? Feature(f / norm) : f;
  }
  std::uint64_t seed = patch_seed(mix_seed(cfg_.seed, 0x6d61736bULL), center_id);
  if (epoch >= 0) seed = mix_seed(seed, static_cast<std::uint64_t>(epoch) + 1);
  return wnff_fuse(members.first(n), weights.first(n), cfg_.mode, seed);
}

std::vector<std::vector<Feature>> database_member_features(const PatchDatabase& db, const FeatureExtractor& fx) {
  std::vector<std::vector<Feature>> out(db.records.size());
  const auto n = static_cast<std::int64_t>(db.records.size());
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 4)
  for (std::int64_t i = 0; i < n; ++i) {
    try {
      const auto& rec = db.records[static_cast<std::size_t>(i)];
      std::vector<std::size_t> ids{rec.patch_id};
      ids.insert(ids.end(), rec.neighbor_ids.begin(), rec.neighbor_ids.end());
      std::vector<std::span<const Point3>> members;
      for (auto id : ids) members.emplace_back(db.patch(id).points.points);
      out[static_cast<std::size_t>(i)] = fx.member_features(members, ids, rec.standardized.to_lpcf, db.radius);
    } catch (...) {
#pragma omp critical
      failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

Eigen::MatrixXd fuse_database(const PatchDatabase& db, const std::vector<std::vector<Feature>>& members,
                              const FeatureExtractor& fx, int epoch) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(db.records.size()), fx.config().d_f);
  for (std::size_t i = 0; i < db.records.size(); ++i) {
    m.row(static_cast<Eigen::Index>(i)) =
        fx.fuse(members[i], db.records[i].neighbor_weights, db.records[i].patch_id, epoch).transpose();
  }
  return m;
}

Eigen::MatrixXd database_features(const PatchDatabase& db, const FeatureExtractor& fx) {
  return fuse_database(db, database_member_features(db, fx), fx);
}

// ---- feature cache ------------------------------------------------------------

namespace {

constexpr char kCacheMagic[8] = {'P', 'V', 'F', 'E', 'A', 'T', 'C', 'H'};
constexpr std::uint32_t kCacheVersion = 1;

struct CacheHeader {
  std::uint32_t version;
  std::int32_t d_f;
  std::int32_t k;
  std::int32_t mode;
  std::int32_t n_points;
  std::uint64_t seed;
  std::uint64_t rows;
};

}  // namespace

std::filesystem::path feature_cache_path(const std::filesystem::path& db_path) {
  auto p = db_path;
  p += ".feat";
  return p;
}

void save_feature_cache(const Eigen::MatrixXd& features, const FeatureConfig& cfg, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot open '" + path.string() + "' for writing");
  const CacheHeader h{kCacheVersion,     cfg.d_f,  cfg.k, static_cast<std::int32_t>(cfg.mode),
                      cfg.n_points,      cfg.seed, static_cast<std::uint64_t>(features.rows())};
  out.write(kCacheMagic, sizeof kCacheMagic);
  out.write(reinterpret_cast<const char*>(&h), sizeof h);
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    for (Eigen::Index j = 0; j < features.cols(); ++j) {
      const double v = features(i, j);
      out.write(reinterpret_cast<const char*>(&v), sizeof v);
    }
  }
  if (!out) throw Error(Errc::IoError, "failed writing '" + path.string() + "'");
}

std::optional<Eigen::MatrixXd> load_feature_cache(const FeatureConfig& cfg, std::size_t rows,
                                                  const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  char magic[sizeof kCacheMagic];
  CacheHeader h{};
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kCacheMagic, sizeof magic) != 0) return std::nullopt;
  if (!in.read(reinterpret_cast<char*>(&h), sizeof h)) return std::nullopt;
  if (h.version != kCacheVersion || h.d_f != cfg.d_f || h.k != cfg.k || h.mode != static_cast<std::int32_t>(cfg.mode) ||
      h.n_points != cfg.n_points || h.seed != cfg.seed || h.rows != rows) {
    return std::nullopt;
  }
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), cfg.d_f);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      double v;
      if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) return std::nullopt;
      m(i, j) = v;
    }
  }
  return m;
}

// ---- regressors ---------------------------------------------------------------

std::vector<PoseVector6> database_targets(const PatchDatabase& db) {
  std::vector<PoseVector6> t;
  t.reserve(db.records.size());
  for (const auto& r : db.records) t.push_back(r.gt_vector);
  return t;
}

std::unique_ptr<TemplateRegressor> make_template_regressor(const PatchDatabase& db, Eigen::MatrixXd features) {
  if (db.records.empty()) throw Error(Errc::EmptyDatabase, "database '" + db.model_id + "' has no records");
  return std::make_unique<TemplateRegressor>(db.model_id, std::move(features), database_targets(db));
}

RegressorConfig regressor_config(const RunConfig& cfg) {
  RegressorConfig rc;
  rc.epochs = cfg.epochs;
  rc.batch_size = cfg.batch_size;
  rc.learning_rate = cfg.learning_rate;
  rc.seed = cfg.seed;
  return rc;
}

MlpRegressor train_mlp(const PatchDatabase& db, const FeatureExtractor& fx, const RegressorConfig& rc,
                       TrainingReport* report) {
  const auto members = database_member_features(db, fx);
  const Eigen::MatrixXd fixed = fuse_database(db, members, fx);
  const bool resample = fx.config().mode == FusionMode::sampled;
  const InputProvider inputs = [&](int epoch) {
    return resample && epoch >= 0 ? fuse_database(db, members, fx, epoch) : fixed;
  };
  std::vector<bool> split;
  for (const auto& r : db.records) split.push_back(r.train);
  return MlpRegressor::train(db.model_id, db.diameter, inputs, database_targets(db), split, rc, report);
}

// ---- estimation ---------------------------------------------------------------

PoseEstimator::PoseEstimator(const PatchDatabase& db, const RunConfig& cfg, std::shared_ptr<const Regressor> regressor)
    : db_(db), cfg_(cfg), fx_(feature_config(cfg, db)), regressor_(std::move(regressor)) {
  if (!regressor_) throw Error(Errc::InvalidArgument, "estimator needs a regressor");
  if (regressor_->input_dim() != cfg.feature_dim) {
    throw Error(Errc::DimensionMismatch, "regressor expects " + std::to_string(regressor_->input_dim()) +
                                             "-D features, config says " + std::to_string(cfg.feature_dim));
  }
}

EstimateResult PoseEstimator::estimate(const PointCloud& segment, bool refine) const {
  if (segment.empty()) throw Error(Errc::EmptySegment, "scene segment has no points");
  EstimateResult res;

  auto t0 = Clock::now();
  const ScenePatches scene =
      sample_scene_patches(segment, cfg_.m_centers, db_.params.radius_factor, cfg_.k_neighbors, db_.diameter,
                           db_.params.neighbor_spacing, cfg_.seed);
  res.times.sampling = seconds_since(t0);
  res.groups = scene.groups.size();
  if (scene.groups.empty()) {
    throw Error(Errc::SegmentTooSmall, "no usable patch among " + std::to_string(scene.requested) + " sampled centers");
  }

  std::unordered_map<std::size_t, const Patch*> by_id;
  for (const auto& p : scene.patches) by_id.emplace(p.id, &p);

  t0 = Clock::now();
  std::vector<Feature> fused(scene.groups.size());
  const auto n = static_cast<std::int64_t>(scene.groups.size());
#pragma omp parallel for schedule(dynamic, 2)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto& g = scene.groups[static_cast<std::size_t>(i)];
    std::vector<std::span<const Point3>> members;
    for (auto id : g.member_ids) members.emplace_back(by_id.at(id)->points.points);
    const auto feats = fx_.member_features(members, g.member_ids, g.to_lpcf, db_.radius);
    fused[static_cast<std::size_t>(i)] = fx_.fuse(feats, g.weights, g.center_id);
  }
  res.times.features = seconds_since(t0);

  t0 = Clock::now();
  std::vector<PoseVote> ocf_votes(scene.groups.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto& g = scene.groups[static_cast<std::size_t>(i)];
    const auto pred = regressor_->predict(fused[static_cast<std::size_t>(i)]);
    ocf_votes[static_cast<std::size_t>(i)] = cast_vote(g.to_lpcf, pred.vector, g.center_id, pred.confidence);
  }
  res.times.regression = seconds_since(t0);
  for (const auto& v : ocf_votes) res.votes.push_back({compose(v.pose, db_.to_ocf), v.source_patch, v.confidence});

  t0 = Clock::now();
  AggregateOptions ao;
  ao.k = cfg_.kmeans_K;
  ao.delta = cfg_.delta;
  ao.min_frac = cfg_.min_cluster_frac;
  ao.confidence_weighting = cfg_.confidence_weighting;
  const auto clusters = aggregate_votes(ocf_votes, ao, db_.diameter, mix_seed(cfg_.seed, 0x6b6d65616e73ULL));
  res.times.aggregation = seconds_since(t0);

  t0 = Clock::now();
  IcpOptions io;
  io.max_iters = cfg_.icp_iters;
  io.tol = cfg_.icp_tol * db_.diameter;
  io.reject_factor = cfg_.icp_reject_factor;
  io.max_distance = cfg_.icp_max_distance * db_.diameter;
  io.direction = cfg_.icp_scene_to_model ? IcpDirection::scene_to_model : IcpDirection::model_to_scene;
  std::vector<PoseCluster> refined;
  std::vector<double> rmse;
  for (const auto& c : clusters) {
    PoseCluster r = c;
    double e = 0.0;
    if (refine && cfg_.icp_iters > 0) {
      try {
        const auto icp = icp_refine(db_.model.points, segment.points, c.pose, io);
        r.pose = icp.pose;
        e = icp.rmse;
      } catch (const Error& err) {
        if (err.code() != Errc::NoCorrespondences) throw;
      }
    }
    refined.push_back(std::move(r));
    rmse.push_back(e);
  }
  res.times.refinement = seconds_since(t0);

  for (std::size_t i = 0; i < refined.size(); ++i) {
    const bool dup = std::any_of(res.detections.begin(), res.detections.end(), [&](const Detection& d) {
      return pose_distance(compose(d.pose, invert(db_.to_ocf)), refined[i].pose, db_.diameter) < cfg_.delta;
    });
    if (dup) continue;
    res.detections.push_back({compose(refined[i].pose, db_.to_ocf), compose(clusters[i].pose, db_.to_ocf),
                              refined[i].score, rmse[i], refined[i].members.size()});
  }
  return res;
}

// ---- ablation arms -------------------------------------------------------------

ArmResult evaluate_arm(const PatchDatabase& db, const PointCloud& model, const RunConfig& cfg,
                       std::span<const LabeledScene> scenes, double coeff, bool symmetric) {
  ArmResult r;
  const FeatureExtractor fx(feature_config(cfg, db));
  auto t0 = Clock::now();
  std::shared_ptr<const Regressor> reg = make_template_regressor(db, database_features(db, fx));
  r.database_seconds = seconds_since(t0);

  const PoseEstimator estimator(db, cfg, reg);
  const double limit = coeff * db.diameter;
  for (const auto& scene : scenes) {
    ++r.trials;
    try {
      const auto res = estimator.estimate(scene.cloud);
      r.feature_seconds += res.times.features;
      const auto& best = res.detections.front();
      const PoseCase fine{model.points, db.diameter, scene.gt, best.pose, symmetric};
      const PoseCase coarse{model.points, db.diameter, scene.gt, best.coarse, symmetric};
      if (pose_error(fine) < limit) ++r.successes;
      if (pose_error(coarse) < limit) ++r.coarse_successes;
    } catch (const Error&) {
      ++r.failures;
    }
  }
  r.accuracy = r.trials ? static_cast<double>(r.successes) / static_cast<double>(r.trials) : 0.0;
  return r;
}

}  // namespace pv
