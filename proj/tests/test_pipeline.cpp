#include "fixtures.hpp"

#include "pv/dataset_io.hpp"
#include "pv/error.hpp"
#include "pv/pipeline.hpp"

#include <doctest.h>

#include <filesystem>
#include <numbers>
#include <random>

using namespace pv;

namespace {

RunConfig small_run(int k = 4) {
  RunConfig cfg;
  cfg.feature_dim = 256;
  cfg.k_neighbors = k;
  cfg.m_centers = 60;
  return cfg;
}

PatchParams params_for(const RunConfig& cfg) {
  PatchParams p;
  p.k_neighbors = cfg.k_neighbors;
  p.n_points = cfg.n_points;
  p.seed = cfg.seed;
  return p;
}

const PatchDatabase& bracket_db() {
  static const PatchDatabase db =
      build_patch_database_from_raw(fixtures::bracket(), 300, params_for(small_run()), "bracket");
  return db;
}

double transform_gap(const RigidTransform& a, const RigidTransform& b) {
  return (a.matrix() - b.matrix()).cwiseAbs().maxCoeff();
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("feature configuration") {
  const auto& db = bracket_db();
  auto cfg = small_run();
  const auto fc = feature_config(cfg, db);
  CHECK(fc.d_f == 256);
  CHECK(fc.k == 4);
  CHECK(fc.seed == db.params.seed);
  cfg.k_neighbors = 5;
  CHECK_THROWS_WITH_AS(feature_config(cfg, db), doctest::Contains("InvalidArgument"), Error);
}

TEST_CASE("unit weights with expected fusion are a plain max-pool") {
  const auto& db = bracket_db();
  auto cfg = small_run();
  const FeatureExtractor fx(feature_config(cfg, db));
  const auto members = database_member_features(db, fx);
  for (std::size_t i = 0; i < 10; ++i) {
    const auto& f = members[i];
    REQUIRE(f.size() == 5);
    Feature mx = f[0];
    for (const auto& x : f) mx = mx.cwiseMax(x);
    const std::vector<double> ones(f.size(), 1.0);
    CHECK(fx.fuse(f, ones, db.records[i].patch_id) == mx);
  }
}

TEST_CASE("fusion modes on database records") {
  const auto& db = bracket_db();
  auto cfg = small_run();
  for (const auto mode : {FusionMode::expected, FusionMode::sampled, FusionMode::concat}) {
    cfg.fusion_mode = mode;
    const FeatureExtractor fx(feature_config(cfg, db));
    const auto feats = database_features(db, fx);
    CHECK(feats.rows() == static_cast<Eigen::Index>(db.records.size()));
    CHECK(feats.cols() == 256);
    CHECK(feats.allFinite());
    CHECK((feats - database_features(db, fx)).cwiseAbs().maxCoeff() == 0.0);
  }

  // Sampled masks are redrawn per training epoch, and only in sampled mode.
  cfg.fusion_mode = FusionMode::sampled;
  const FeatureExtractor fx(feature_config(cfg, db));
  const auto members = database_member_features(db, fx);
  const auto e0 = fuse_database(db, members, fx, 0);
  const auto e1 = fuse_database(db, members, fx, 1);
  CHECK((e0 - e1).cwiseAbs().maxCoeff() > 0.0);
  CHECK((fuse_database(db, members, fx, -1) - database_features(db, fx)).cwiseAbs().maxCoeff() == 0.0);

  // Fewer neighbours than configured: concat pads with zeros.
  cfg.fusion_mode = FusionMode::concat;
  const FeatureExtractor cx(feature_config(cfg, db));
  const std::vector<Feature> lone{members[0][0]};
  const std::vector<double> w{1.0};
  CHECK((cx.fuse(lone, w, 0) - members[0][0].normalized()).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("feature cache") {
  const auto& db = bracket_db();
  const auto cfg = small_run();
  const FeatureExtractor fx(feature_config(cfg, db));
  const auto feats = database_features(db, fx);
  const auto path = std::filesystem::temp_directory_path() / "pv_cache_test.db.feat";
  CHECK(feature_cache_path("/x/y.db") == std::filesystem::path("/x/y.db.feat"));
  save_feature_cache(feats, fx.config(), path);
  const auto back = load_feature_cache(fx.config(), db.records.size(), path);
  REQUIRE(back);
  CHECK(*back == feats);

  auto other = fx.config();
  other.k = 2;
  CHECK_FALSE(load_feature_cache(other, db.records.size(), path));
  CHECK_FALSE(load_feature_cache(fx.config(), db.records.size() + 1, path));
  CHECK_FALSE(load_feature_cache(fx.config(), db.records.size(), path.string() + ".none"));
}

TEST_CASE("noiseless scenes are recovered exactly") {
  const auto raw = fixtures::bracket();
  const auto& db = bracket_db();
  auto cfg = small_run();
  const FeatureExtractor fx(feature_config(cfg, db));
  std::shared_ptr<const Regressor> reg = make_template_regressor(db, database_features(db, fx));
  const PoseEstimator est(db, cfg, reg);

  std::mt19937_64 rng(3);
  for (int t = 0; t < 3; ++t) {
    const auto truth = fixtures::random_pose(rng, 0.3);
    const auto scene = io::synth_scene(raw, truth, 0.0, 0.0, 1);
    const auto res = est.estimate(scene.cloud, false);
    REQUIRE(!res.detections.empty());
    CHECK(res.detections.size() == 1);
    CHECK(res.groups == res.votes.size());
    for (const auto& v : res.votes) CHECK(transform_gap(v.pose, truth) < 1e-5);
    CHECK(transform_gap(res.detections.front().coarse, truth) < 1e-5);
    CHECK(res.detections.front().votes == res.votes.size());

    const auto refined = est.estimate(scene.cloud, true);
    CHECK(transform_gap(refined.detections.front().pose, truth) < 1e-5);
    CHECK(refined.times.total() >= 0.0);
  }
}

TEST_CASE("estimator failures") {
  const auto& db = bracket_db();
  const auto cfg = small_run();
  const FeatureExtractor fx(feature_config(cfg, db));
  std::shared_ptr<const Regressor> reg = make_template_regressor(db, database_features(db, fx));
  const PoseEstimator est(db, cfg, reg);
  CHECK_THROWS_WITH_AS(est.estimate(PointCloud{}), doctest::Contains("EmptySegment"), Error);

  PointCloud sparse;
  for (int i = 0; i < 10; ++i) sparse.points.emplace_back(i, 0.5 * i * i, 0.1 * i);
  CHECK_THROWS_WITH_AS(est.estimate(sparse), doctest::Contains("SegmentTooSmall"), Error);

  auto one = cfg;
  one.m_centers = 1;
  const PoseEstimator single(db, one, reg);
  std::mt19937_64 rng(4);
  const auto scene = io::synth_scene(fixtures::bracket(), fixtures::random_pose(rng, 0.3), 0.0, 0.0, 1);
  const auto r = single.estimate(scene.cloud);
  CHECK(r.votes.size() == 1);
  CHECK(r.detections.size() == 1);

  auto wrong = cfg;
  wrong.feature_dim = 512;
  CHECK_THROWS_WITH_AS(PoseEstimator(db, wrong, reg), doctest::Contains("DimensionMismatch"), Error);
}

TEST_CASE("learned head on a toy database") {
  auto cfg = small_run();
  cfg.epochs = 3;
  cfg.batch_size = 16;
  const auto db = build_patch_database_from_raw(fixtures::toy_box(), 200, params_for(cfg), "toy");
  REQUIRE(db.records.size() >= 160);
  const FeatureExtractor fx(feature_config(cfg, db));
  auto rc = regressor_config(cfg);
  rc.layer_sizes = {64, 32, 6};
  TrainingReport rep;
  const auto net = train_mlp(db, fx, rc, &rep);
  CHECK(rep.train_loss.size() == 4);
  CHECK(net.input_dim() == 256);
  CHECK(net.model_id() == "toy");
  const auto p = net.predict(database_features(db, fx).row(0).transpose(), "toy");
  CHECK(std::isfinite(p.vector.translation.norm()));
  CHECK_THROWS_AS(net.predict(Feature::Zero(256), "duck"), Error);
}

TEST_CASE("evaluation arm") {
  const auto raw = fixtures::bracket();
  const auto& db = bracket_db();
  const auto cfg = small_run();
  std::mt19937_64 rng(5);
  std::vector<LabeledScene> scenes;
  for (int i = 0; i < 3; ++i) {
    const auto truth = fixtures::random_pose(rng, 0.3);
    scenes.push_back({io::synth_scene(raw, truth, 0.0, 0.0, 1).cloud, truth});
  }
  scenes.push_back({PointCloud{}, RigidTransform{}});
  const auto r = evaluate_arm(db, raw, cfg, scenes, 0.05);
  CHECK(r.trials == 4);
  CHECK(r.successes == 3);
  CHECK(r.coarse_successes == 3);
  CHECK(r.failures == 1);
  CHECK(r.accuracy == 0.75);
  CHECK(r.feature_wall() > 0.0);
}

}  // TEST_SUITE
