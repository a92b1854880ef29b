// pvtool: command-line front end for patch voting pose estimation.
//
// Exit codes: 0 success, 1 usage, 2 I/O or parse failure, 3 estimation failure.

#include "svg.hpp"

#include "pv/config.hpp"
#include "pv/dataset_io.hpp"
#include "pv/error.hpp"
#include "pv/metrics.hpp"
#include "pv/pipeline.hpp"
#include "pv/sampling.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

namespace fs = std::filesystem;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitIo = 2;
constexpr int kExitEstimation = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

int exit_code(pv::Errc code) {
  switch (code) {
    case pv::Errc::IoError:
    case pv::Errc::ParseError:
    case pv::Errc::UnsupportedProperty:
      return kExitIo;
    case pv::Errc::InvalidArgument:
    case pv::Errc::CountExceedsCloud:
      return kExitUsage;
    default:
      return kExitEstimation;
  }
}

// Options shared by most commands. Flags left unset keep the config-file value.
struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> k, dim, m, num, n_points, kmeans_k, epochs, batch_size;
  std::optional<double> radius_factor, spacing, delta, min_frac, lr;
  std::optional<std::string> fusion, backend;

  pv::RunConfig resolve() const {
    pv::RunConfig cfg = config.empty() ? pv::RunConfig{} : pv::load_config(config);
    if (seed) cfg.seed = *seed;
    if (k) cfg.k_neighbors = *k;
    if (dim) cfg.feature_dim = *dim;
    if (m) cfg.m_centers = *m;
    if (num) cfg.num_patches = *num;
    if (n_points) cfg.n_points = *n_points;
    if (kmeans_k) cfg.kmeans_K = *kmeans_k;
    if (epochs) cfg.epochs = *epochs;
    if (batch_size) cfg.batch_size = *batch_size;
    if (radius_factor) cfg.radius_factor = *radius_factor;
    if (spacing) cfg.neighbor_spacing = *spacing;
    if (delta) cfg.delta = *delta;
    if (min_frac) cfg.min_cluster_frac = *min_frac;
    if (lr) cfg.learning_rate = *lr;
    if (fusion) cfg.fusion_mode = pv::parse_fusion_mode(*fusion);
    if (backend) cfg.backend = pv::parse_backend(*backend);
    cfg.validate();
    return cfg;
  }
};

void add_common(CLI::App* app, Common& c, bool patches, bool features, bool voting, bool training) {
  app->add_option("--config", c.config, "key = value config file")->check(CLI::ExistingFile);
  app->add_option("--seed", c.seed, "random seed");
  if (patches) {
    app->add_option("--num", c.num, "number of database patches");
    app->add_option("--radius-factor", c.radius_factor, "patch radius as a fraction of the object diameter");
    app->add_option("--n-points", c.n_points, "points per normalized patch");
    app->add_option("--spacing", c.spacing, "neighbour spacing as a fraction of the object diameter");
  }
  if (patches || features) app->add_option("--k", c.k, "neighbours per patch");
  if (features) {
    app->add_option("--dim", c.dim, "feature dimension");
    app->add_option("--fusion", c.fusion, "sampled | expected | concat")
        ->check(CLI::IsMember({"sampled", "expected", "concat"}));
  }
  if (voting) {
    app->add_option("--m", c.m, "scene centers");
    app->add_option("--backend", c.backend, "template | mlp")->check(CLI::IsMember({"template", "mlp"}));
    app->add_option("--kmeans-k", c.kmeans_k, "K-means seeds");
    app->add_option("--delta", c.delta, "cluster merge distance");
    app->add_option("--min-frac", c.min_frac, "minimum cluster share of the votes");
  }
  if (training) {
    app->add_option("--epochs", c.epochs, "training epochs");
    app->add_option("--batch-size", c.batch_size, "mini-batch size");
    app->add_option("--lr", c.lr, "initial learning rate");
  }
}

pv::PatchParams patch_params(const pv::RunConfig& cfg) {
  pv::PatchParams p;
  p.radius_factor = cfg.radius_factor;
  p.n_points = cfg.n_points;
  p.k_neighbors = cfg.k_neighbors;
  p.neighbor_spacing = cfg.neighbor_spacing;
  p.seed = cfg.seed;
  return p;
}

Eigen::MatrixXd template_features(const pv::PatchDatabase& db, const fs::path& db_path,
                                  const pv::FeatureExtractor& fx) {
  const auto cache = pv::feature_cache_path(db_path);
  if (auto hit = pv::load_feature_cache(fx.config(), db.records.size(), cache)) return *hit;
  Eigen::MatrixXd f = pv::database_features(db, fx);
  try {
    pv::save_feature_cache(f, fx.config(), cache);
  } catch (const pv::Error& e) {
    std::cerr << "warning: " << e.what() << "\n";
  }
  return f;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

pv::RigidTransform parse_pose(const std::string& text) {
  std::istringstream in(text);
  std::array<double, 6> v{};
  for (auto& x : v) {
    if (!(in >> x)) throw UsageError("--pose expects six numbers: rx ry rz tx ty tz");
  }
  std::string rest;
  if (in >> rest) throw UsageError("--pose expects six numbers: rx ry rz tx ty tz");
  return pv::from_vector({Eigen::Vector3d(v[3], v[4], v[5]), Eigen::Vector3d(v[0], v[1], v[2])});
}

std::pair<int, int> parse_range(const std::string& text) {
  const auto dots = text.find("..");
  try {
    if (dots == std::string::npos) {
      const int v = std::stoi(text);
      if (std::to_string(v) != text) throw UsageError("");
      return {v, v};
    }
    const std::string a = text.substr(0, dots), b = text.substr(dots + 2);
    const int lo = std::stoi(a), hi = std::stoi(b);
    if (std::to_string(lo) != a || std::to_string(hi) != b) throw UsageError("");
    if (lo < 0 || hi < lo) throw UsageError("");
    return {lo, hi};
  } catch (const std::exception&) {
    throw UsageError("--range expects a..b with 0 <= a <= b, got '" + text + "'");
  }
}

// ---- commands -------------------------------------------------------------------

struct MakePatches {
  Common common;
  std::string model, out, id = "object";

  int run() const {
    const auto cfg = common.resolve();
    const auto cloud = pv::io::load_ply(model);
    const auto db = pv::build_patch_database_from_raw(cloud, cfg.num_patches, patch_params(cfg), id);
    pv::save_database(db, out);
    std::printf("records %zu\ndropped_degenerate %zu\ndropped_sparse %zu\ndiameter %.9g\n", db.records.size(),
                db.dropped_degenerate, db.dropped_sparse, db.diameter);
    return 0;
  }
};

struct Train {
  Common common;
  std::string db_path, out, loss;

  int run() const {
    auto cfg = common.resolve();
    const auto db = pv::load_database(db_path);
    if (!common.k) cfg.k_neighbors = db.params.k_neighbors;
    const pv::FeatureExtractor fx(pv::feature_config(cfg, db));
    pv::TrainingReport report;
    const auto net = pv::train_mlp(db, fx, pv::regressor_config(cfg), &report);
    net.save(out);

    const fs::path loss_path = loss.empty() ? fs::path(out).concat(".loss.tsv") : fs::path(loss);
    std::ofstream table(loss_path);
    if (!table) throw pv::Error(pv::Errc::IoError, "cannot write '" + loss_path.string() + "'");
    table << "epoch\ttrain_loss\n";
    char line[64];
    for (std::size_t e = 0; e < report.train_loss.size(); ++e) {
      std::snprintf(line, sizeof line, "%zu\t%.9g\n", e, report.train_loss[e]);
      table << line;
    }
    std::printf("train_records %zu\nvalidation_records %zu\nexcluded_near_pi %zu\n", report.train_records,
                report.validation_records, report.excluded_near_pi);
    std::printf("loss_initial %.6g\nloss_final %.6g\n", report.train_loss.front(), report.train_loss.back());
    std::printf("validation_error_initial %.6g\nvalidation_error_final %.6g\n", report.initial_validation_error,
                report.final_validation_error);
    return 0;
  }
};

struct Estimate {
  Common common;
  std::string db_path, scene, depth, mask, out, weights;
  int label = 1;
  bool votes = false;

  int run() const {
    auto cfg = common.resolve();
    const auto db = pv::load_database(db_path);
    if (!common.k) cfg.k_neighbors = std::min(cfg.k_neighbors, db.params.k_neighbors);

    pv::PointCloud segment;
    if (!scene.empty()) {
      if (!depth.empty() || !mask.empty()) throw UsageError("give either --scene or --depth/--mask");
      segment = pv::io::load_ply(scene);
    } else {
      if (depth.empty() || mask.empty()) throw UsageError("need --scene or both --depth and --mask");
      segment = pv::io::depth_to_cloud(pv::io::read_depth_pgm(depth), cfg.intrinsics, pv::io::read_mask_pgm(mask), label);
    }

    const pv::FeatureExtractor fx(pv::feature_config(cfg, db));
    std::shared_ptr<const pv::Regressor> reg;
    if (cfg.backend == pv::Backend::mlp) {
      if (weights.empty()) throw UsageError("--backend mlp needs --weights");
      auto net = std::make_shared<pv::MlpRegressor>(pv::MlpRegressor::load(weights));
      if (net->model_id() != db.model_id) {
        throw pv::Error(pv::Errc::UnknownModel, "weights were trained for '" + net->model_id() + "', database is '" +
                                                    db.model_id + "'");
      }
      reg = std::move(net);
    } else {
      reg = pv::make_template_regressor(db, template_features(db, db_path, fx));
    }

    const pv::PoseEstimator estimator(db, cfg, reg);
    pv::io::ResultSet results;
    int code = 0;
    try {
      const auto res = estimator.estimate(segment);
      for (const auto& d : res.detections) results.detections.push_back({db.model_id, d.pose, d.score, std::nullopt});
      if (votes) {
        for (const auto& v : res.votes) {
          results.votes.push_back({db.model_id, v.pose, v.confidence, static_cast<long>(v.source_patch)});
        }
      }
      const auto& t = res.times;
      std::printf("groups %zu\ndetections %zu\n", res.groups, res.detections.size());
      std::printf("timing sampling %.4f features %.4f regression %.4f aggregation %.4f refinement %.4f total %.4f\n",
                  t.sampling, t.features, t.regression, t.aggregation, t.refinement, t.total());
    } catch (const pv::Error& e) {
      if (exit_code(e.code()) != kExitEstimation) throw;
      std::cerr << "estimation failed: " << e.what() << "\n";
      code = kExitEstimation;
    }
    pv::io::save_results(results, out);
    return code;
  }
};

struct Evaluate {
  Common common;
  std::string results, gt, models, symmetric, out;
  double coeff = 0.1;

  int run() const {
    std::vector<std::pair<fs::path, fs::path>> pairs;
    if (fs::is_directory(results) != fs::is_directory(gt)) throw UsageError("--results and --gt must both be files or both directories");
    if (fs::is_directory(results)) {
      for (const auto& e : fs::directory_iterator(results)) {
        if (!e.is_regular_file()) continue;
        const fs::path g = fs::path(gt) / e.path().filename();
        if (!fs::exists(g)) throw pv::Error(pv::Errc::IoError, "no ground truth '" + g.string() + "' for '" + e.path().string() + "'");
        pairs.emplace_back(e.path(), g);
      }
      std::sort(pairs.begin(), pairs.end());
    } else {
      pairs.emplace_back(results, gt);
    }

    const auto sym = split_list(symmetric);
    std::map<std::string, pv::ObjectModel> model_map;
    auto need_model = [&](const std::string& id) {
      if (model_map.count(id)) return;
      const fs::path p = fs::path(models) / (id + ".ply");
      auto cloud = pv::io::load_ply(p);
      pv::ObjectModel m;
      m.diameter = pv::object_diameter(cloud);
      m.points = std::move(cloud.points);
      m.symmetric = std::find(sym.begin(), sym.end(), id) != sym.end();
      model_map.emplace(id, std::move(m));
    };

    // Each results/gt pair is one scene; detections only match ground truth of their own scene.
    pv::EvalReport total;
    std::vector<pv::DetectionResult> all_det;
    std::vector<pv::GroundTruth> all_gt;
    std::size_t scene = 0;
    for (const auto& [rp, gp] : pairs) {
      const auto rs = pv::io::load_results(rp);
      const auto an = pv::io::load_annotations(gp);
      const std::string tag = "#" + std::to_string(scene++);
      for (const auto& d : rs.detections) {
        need_model(d.object_id);
        all_det.push_back({d.object_id + tag, d.pose, d.score.value_or(0.0)});
      }
      for (const auto& a : an) {
        need_model(a.object_id);
        all_gt.push_back({a.object_id + tag, a.gt_pose});
      }
    }
    // Per-scene ids share the object's model.
    std::map<std::string, pv::ObjectModel> tagged;
    for (const auto& d : all_det) tagged.emplace(d.object_id, model_map.at(d.object_id.substr(0, d.object_id.rfind('#'))));
    for (const auto& g : all_gt) tagged.emplace(g.object_id, model_map.at(g.object_id.substr(0, g.object_id.rfind('#'))));
    const auto per_scene = pv::evaluate(all_det, all_gt, tagged, coeff);

    // Fold scenes back into one row per object.
    std::map<std::string, pv::ObjectReport> rows;
    std::map<std::string, std::pair<double, std::size_t>> acc;
    for (const auto& o : per_scene.objects) {
      const std::string id = o.object_id.substr(0, o.object_id.rfind('#'));
      auto& r = rows[id];
      r.object_id = id;
      r.f1.detections += o.f1.detections;
      r.f1.ground_truths += o.f1.ground_truths;
      r.f1.true_positives += o.f1.true_positives;
      acc[id].first += o.add_accuracy * static_cast<double>(o.f1.ground_truths);
      acc[id].second += o.f1.ground_truths;
    }
    total.coeff = coeff;
    for (auto& [id, r] : rows) {
      auto& f = r.f1;
      f.precision = f.detections ? double(f.true_positives) / double(f.detections) : 0.0;
      f.recall = f.ground_truths ? double(f.true_positives) / double(f.ground_truths) : 0.0;
      f.f1 = f.precision + f.recall > 0 ? 2 * f.precision * f.recall / (f.precision + f.recall) : 0.0;
      r.add_accuracy = acc[id].second ? acc[id].first / double(acc[id].second) : 0.0;
      total.objects.push_back(r);
    }
    total.overall = per_scene.overall;
    std::cout << pv::format_report(total);
    if (!out.empty()) {
      std::ofstream f(out);
      if (!f || !(f << pv::format_report_records(total))) throw pv::Error(pv::Errc::IoError, "cannot write '" + out + "'");
    }
    return 0;
  }
};

struct Ablate {
  Common common;
  std::string sweep = "k", range = "0..15", model, scenes, out, plot, id = "object";
  double coeff = 0.1;

  int run() const {
    if (sweep != "k") throw UsageError("only '--sweep k' is supported");
    const auto [lo, hi] = parse_range(range);
    if (hi > 64) throw UsageError("--range upper bound must not exceed 64");
    auto cfg = common.resolve();
    const auto cloud = pv::io::load_ply(model);

    std::vector<pv::LabeledScene> suite;
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(scenes)) {
      if (e.path().extension() == ".ply") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      const auto gt = fs::path(f).replace_extension(".gt");
      const auto an = pv::io::load_annotations(gt);
      if (an.empty()) throw pv::Error(pv::Errc::ParseError, "'" + gt.string() + "' has no pose");
      suite.push_back({pv::io::load_ply(f), an.front().gt_pose});
    }
    if (suite.empty()) throw pv::Error(pv::Errc::IoError, "no .ply scenes in '" + scenes + "'");

    cfg.k_neighbors = hi;
    const auto db = pv::build_patch_database_from_raw(cloud, cfg.num_patches, patch_params(cfg), id);

    std::vector<double> ks, accs, times;
    std::string table = "k\tadd_accuracy\tfeature_seconds\n";
    std::printf("%4s %12s %15s\n", "k", "add_accuracy", "feature_seconds");
    for (int k = lo; k <= hi; ++k) {
      cfg.k_neighbors = k;
      const auto r = pv::evaluate_arm(db, cloud, cfg, suite, coeff);
      ks.push_back(k);
      accs.push_back(r.accuracy);
      times.push_back(r.feature_wall());
      std::printf("%4d %12.4f %15.4f\n", k, r.accuracy, r.feature_wall());
      char line[96];
      std::snprintf(line, sizeof line, "%d\t%.6f\t%.6f\n", k, r.accuracy, r.feature_wall());
      table += line;
    }
    if (!out.empty()) svg::write_or_throw(out, table);
    if (!plot.empty()) {
      svg::dual_axis(plot, ks, {accs, "#1f77b4", "ADD accuracy"}, {times, "#d62728", "feature time (s)"},
                     "number of neighbouring patches k");
    }
    return 0;
  }
};

struct Synth {
  Common common;
  std::string model, out_scene, out_gt, pose, id = "object";
  double noise = 0.0, crop = 0.0;

  int run() const {
    const auto cfg = common.resolve();
    const auto cloud = pv::io::load_ply(model);
    pv::RigidTransform p;
    if (!pose.empty()) {
      p = parse_pose(pose);
    } else {
      std::mt19937_64 rng(pv::mix_seed(cfg.seed, 0x706f7365ULL));
      std::normal_distribution<double> g(0.0, 1.0);
      Eigen::Quaterniond q(g(rng), g(rng), g(rng), g(rng));
      q.normalize();
      const double d = pv::object_diameter(cloud);
      std::uniform_real_distribution<double> u(-1.0, 1.0);
      p = pv::RigidTransform(q.toRotationMatrix(), Eigen::Vector3d(u(rng) * d, u(rng) * d, 3.0 * d + u(rng) * d));
    }
    if (noise < 0.0 || crop < 0.0 || crop >= 1.0) throw UsageError("--noise must be >= 0 and --crop in [0, 1)");
    const auto sc = pv::io::synth_scene(cloud, p, noise, crop, cfg.seed, id);
    pv::io::save_ply(sc.cloud, out_scene);
    const std::vector<pv::io::SceneAnnotation> an{sc.annotation};
    pv::io::save_annotations(an, out_gt);
    std::printf("points %zu\n%s\n", sc.cloud.size(), pv::io::format_record({id, p, std::nullopt, std::nullopt}).c_str());
    return 0;
  }
};

struct PlotOverlay {
  std::string scene, model, results, out;
  std::string view = "xy";

  int run() const {
    if (view != "xy" && view != "xz" && view != "yz") throw UsageError("--view must be xy, xz or yz");
    const int a = view == "yz" ? 1 : 0;
    const int b = view == "xy" ? 1 : 2;
    const auto sc = pv::io::load_ply(scene);
    const auto mdl = pv::io::load_ply(model);
    const auto rs = pv::io::load_results(results);

    std::vector<svg::Layer> layers;
    svg::Layer s{{}, "#7f7f7f", "scene", 1.2};
    for (const auto& p : sc.points) s.points.emplace_back(p(a), p(b));
    layers.push_back(std::move(s));
    const char* colors[] = {"#d62728", "#1f77b4", "#2ca02c", "#9467bd"};
    for (std::size_t i = 0; i < rs.detections.size(); ++i) {
      svg::Layer l{{}, colors[i % 4], "model @ detection " + std::to_string(i), 1.0};
      for (const auto& p : mdl.points) {
        const auto q = rs.detections[i].pose.apply(p);
        l.points.emplace_back(q(a), q(b));
      }
      layers.push_back(std::move(l));
    }
    svg::scatter(out, layers, "overlay (" + view + ")");
    std::printf("detections %zu\n", rs.detections.size());
    return 0;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Patch-voting 6D pose estimation on point clouds"};
  app.require_subcommand(1);

  MakePatches mk;
  auto* c_mk = app.add_subcommand("make-patches", "build a patch database from a model");
  c_mk->add_option("--model", mk.model, "model PLY")->required();
  c_mk->add_option("--out", mk.out, "database file")->required();
  c_mk->add_option("--id", mk.id, "object id");
  add_common(c_mk, mk.common, true, false, false, false);

  Train tr;
  auto* c_tr = app.add_subcommand("train", "train the learned regression head");
  c_tr->add_option("--db", tr.db_path, "database file")->required();
  c_tr->add_option("--out", tr.out, "weights file")->required();
  c_tr->add_option("--loss", tr.loss, "loss curve table (default <out>.loss.tsv)");
  add_common(c_tr, tr.common, false, true, false, true);

  Estimate es;
  auto* c_es = app.add_subcommand("estimate", "estimate object poses in a scene segment");
  c_es->add_option("--db", es.db_path, "database file")->required();
  c_es->add_option("--scene", es.scene, "segment PLY");
  c_es->add_option("--depth", es.depth, "16-bit depth PGM");
  c_es->add_option("--mask", es.mask, "8-bit segmentation PGM");
  c_es->add_option("--label", es.label, "mask label of the object");
  c_es->add_option("--out", es.out, "results file")->required();
  c_es->add_option("--weights", es.weights, "weights for --backend mlp");
  c_es->add_flag("--votes", es.votes, "also write every vote");
  add_common(c_es, es.common, false, true, true, false);

  Evaluate ev;
  auto* c_ev = app.add_subcommand("evaluate", "score results against ground truth");
  c_ev->add_option("--results", ev.results, "results file or directory")->required();
  c_ev->add_option("--gt", ev.gt, "ground-truth file or directory")->required();
  c_ev->add_option("--models", ev.models, "directory of <object_id>.ply models")->required();
  c_ev->add_option("--coeff", ev.coeff, "correctness threshold as a fraction of the diameter");
  c_ev->add_option("--symmetric", ev.symmetric, "comma separated ids scored with ADD-S");
  c_ev->add_option("--out", ev.out, "machine-readable report");
  add_common(c_ev, ev.common, false, false, false, false);

  Ablate ab;
  auto* c_ab = app.add_subcommand("ablate", "sweep the neighbour count");
  c_ab->add_option("--sweep", ab.sweep, "parameter to sweep (k)");
  c_ab->add_option("--range", ab.range, "a..b");
  c_ab->add_option("--model", ab.model, "model PLY")->required();
  c_ab->add_option("--scenes", ab.scenes, "directory of <name>.ply scenes with <name>.gt poses")->required();
  c_ab->add_option("--coeff", ab.coeff, "ADD threshold as a fraction of the diameter");
  c_ab->add_option("--out", ab.out, "table file");
  c_ab->add_option("--plot", ab.plot, "SVG plot");
  add_common(c_ab, ab.common, true, true, true, false);

  Synth sy;
  auto* c_sy = app.add_subcommand("synth", "render a synthetic scene from a model");
  c_sy->add_option("--model", sy.model, "model PLY")->required();
  c_sy->add_option("--out-scene", sy.out_scene, "scene PLY")->required();
  c_sy->add_option("--out-gt", sy.out_gt, "ground-truth pose file")->required();
  c_sy->add_option("--pose", sy.pose, "\"rx ry rz tx ty tz\" (axis-angle, translation)");
  c_sy->add_option("--noise", sy.noise, "noise sigma as a fraction of the diameter");
  c_sy->add_option("--crop", sy.crop, "fraction of points removed by a half-space cut");
  c_sy->add_option("--id", sy.id, "object id");
  add_common(c_sy, sy.common, false, false, false, false);

  PlotOverlay po;
  auto* c_po = app.add_subcommand("plot-overlay", "draw scene points with posed model points");
  c_po->add_option("--scene", po.scene, "scene PLY")->required();
  c_po->add_option("--model", po.model, "model PLY")->required();
  c_po->add_option("--results", po.results, "results file")->required();
  c_po->add_option("--out", po.out, "SVG file")->required();
  c_po->add_option("--view", po.view, "projection plane: xy, xz or yz");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*c_mk) return mk.run();
    if (*c_tr) return tr.run();
    if (*c_es) return es.run();
    if (*c_ev) return ev.run();
    if (*c_ab) return ab.run();
    if (*c_sy) return sy.run();
    if (*c_po) return po.run();
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const pv::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }
  return kExitUsage;
}
