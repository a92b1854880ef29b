#include "fixtures.hpp"

#include "pv/dataset_io.hpp"
#include "pv/patches.hpp"
#include "pv/regressor.hpp"

#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

namespace fs = std::filesystem;
using namespace pv;

namespace {

struct Run {
  int code = -1;
  std::string output;  // stdout and stderr together
};

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("pv_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Run pvtool(const std::string& args, const fs::path& dir) {
  const auto log = dir / "last.log";
  const std::string cmd = std::string(PVTOOL_PATH) + " " + args + " > '" + log.string() + "' 2>&1";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.output = slurp(log);
  return r;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

// A toy box model and a 300-patch database of it, object id "box".
struct Workspace {
  fs::path dir, model, db;
  double diameter = 0.0;

  explicit Workspace(const std::string& name, int num = 300) : dir(scratch(name)) {
    model = dir / "box.ply";
    db = dir / "box.db";
    const auto cloud = fixtures::toy_box();
    io::save_ply(cloud, model);
    diameter = object_diameter(cloud);
    const auto r = pvtool("make-patches --model " + q(model) + " --out " + q(db) + " --id box --num " +
                              std::to_string(num) + " --k 4",
                          dir);
    REQUIRE_MESSAGE(r.code == 0, r.output);
  }
};

double translation_gap(const RigidTransform& a, const RigidTransform& b) {
  return (a.translation() - b.translation()).norm();
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("make-patches") {
  const auto dir = scratch("make");
  const auto model = dir / "box.ply";
  io::save_ply(fixtures::toy_box(), model);

  const auto r = pvtool("make-patches --model " + q(model) + " --out " + q(dir / "a.db") + " --num 50", dir);
  REQUIRE_MESSAGE(r.code == 0, r.output);
  const auto db = load_database(dir / "a.db");
  CHECK(db.records.size() <= 50);
  CHECK(db.records.size() > 0);
  CHECK(r.output.find("records") != std::string::npos);

  const auto solo = pvtool("make-patches --model " + q(model) + " --out " + q(dir / "k0.db") + " --num 50 --k 0", dir);
  REQUIRE_MESSAGE(solo.code == 0, solo.output);
  const auto db0 = load_database(dir / "k0.db");
  CHECK(db0.params.k_neighbors == 0);
  for (const auto& rec : db0.records) CHECK(rec.neighbor_ids.empty());

  const auto missing = dir / "no_such_model.ply";
  const auto m = pvtool("make-patches --model " + q(missing) + " --out " + q(dir / "b.db"), dir);
  CHECK(m.code == 2);
  CHECK(m.output.find(missing.string()) != std::string::npos);

  CHECK(pvtool("make-patches --out " + q(dir / "b.db"), dir).code == 1);
  CHECK(pvtool("make-patches --model " + q(model) + " --out " + q(dir / "b.db") + " --k -1", dir).code == 1);
  CHECK(pvtool("frobnicate", dir).code == 1);
}

TEST_CASE("synth and estimate round trip") {
  Workspace ws("estimate");
  const auto scene = ws.dir / "scene.ply";
  const auto gt = ws.dir / "scene.gt";
  const auto res = ws.dir / "scene.res";
  REQUIRE(pvtool("synth --model " + q(ws.model) + " --id box --pose '0.3 -0.5 1.1 0.02 -0.01 0.4' --out-scene " +
                     q(scene) + " --out-gt " + q(gt),
                 ws.dir)
              .code == 0);
  const auto r = pvtool("estimate --db " + q(ws.db) + " --scene " + q(scene) + " --out " + q(res) + " --k 4 --votes", ws.dir);
  REQUIRE_MESSAGE(r.code == 0, r.output);
  CHECK(r.output.find("timing") != std::string::npos);

  const auto truth = io::load_annotations(gt).front().gt_pose;
  const auto out = io::load_results(res);
  REQUIRE(out.detections.size() == 1);
  CHECK(out.detections.front().object_id == "box");
  CHECK(translation_gap(out.detections.front().pose, truth) < 1e-4 * ws.diameter);
  CHECK(!out.votes.empty());

  // One scene center is allowed to run; it either detects or fails cleanly.
  const auto one = pvtool("estimate --db " + q(ws.db) + " --scene " + q(scene) + " --out " + q(ws.dir / "m1.res") +
                              " --k 4 --m 1",
                          ws.dir);
  CHECK((one.code == 0 || one.code == 3));

  // Empty segment (no pixel carries the label): estimation failure, distinct
  // from I/O, and no detections.
  io::write_pgm(io::DepthImage(64, 48, 800), ws.dir / "depth.pgm");
  io::write_pgm(io::SegmentationMask(64, 48, 1), ws.dir / "mask.pgm");
  const auto e = pvtool("estimate --db " + q(ws.db) + " --depth " + q(ws.dir / "depth.pgm") + " --mask " +
                            q(ws.dir / "mask.pgm") + " --label 2 --out " + q(ws.dir / "e.res") + " --k 4",
                        ws.dir);
  CHECK(e.code == 3);
  CHECK(e.output.find("EmptySegment") != std::string::npos);
  if (fs::exists(ws.dir / "e.res")) CHECK(io::load_results(ws.dir / "e.res").detections.empty());
  // A PLY with no vertices is malformed input rather than an empty segment.
  io::save_ply(PointCloud{}, ws.dir / "empty.ply");
  CHECK(pvtool("estimate --db " + q(ws.db) + " --scene " + q(ws.dir / "empty.ply") + " --out " + q(ws.dir / "e.res"), ws.dir)
            .code == 2);

  CHECK(pvtool("estimate --db " + q(ws.dir / "none.db") + " --scene " + q(scene) + " --out " + q(res), ws.dir).code == 2);
  CHECK(pvtool("estimate --db " + q(ws.db) + " --scene " + q(scene) + " --out " + q(res) + " --fusion bogus", ws.dir)
            .code == 1);
  CHECK(pvtool("estimate --db " + q(ws.db) + " --scene " + q(scene) + " --out " + q(res) + " --k 7", ws.dir).code == 1);
}

TEST_CASE("evaluate") {
  const auto dir = scratch("evaluate");
  const auto cloud = fixtures::toy_box();
  fs::create_directories(dir / "models");
  io::save_ply(cloud, dir / "models" / "box.ply");
  const double d = object_diameter(cloud);

  std::mt19937_64 rng(3);
  std::vector<io::SceneAnnotation> gts;
  std::vector<io::PoseRecord> perfect, shifted;
  for (int i = 0; i < 4; ++i) {
    const auto p = fixtures::random_pose(rng, 1.0);
    gts.push_back({"box", p, 1});
  }
  io::save_annotations(gts, dir / "gt.txt");
  for (const auto& g : gts) {
    perfect.push_back({"box", g.gt_pose, 1.0, std::nullopt});
    shifted.push_back({"box", compose(RigidTransform::from_translation({0.2 * d, 0, 0}), g.gt_pose), 1.0, std::nullopt});
  }
  io::save_results({perfect, {}}, dir / "perfect.res");
  io::save_results({shifted, {}}, dir / "shifted.res");

  const auto base = "--gt " + q(dir / "gt.txt") + " --models " + q(dir / "models") + " --coeff 0.1";
  const auto a = pvtool("evaluate --results " + q(dir / "perfect.res") + " " + base + " --out " + q(dir / "a.txt"), dir);
  REQUIRE_MESSAGE(a.code == 0, a.output);
  CHECK(slurp(dir / "a.txt").find("eval box add_accuracy 1 ") != std::string::npos);

  const auto b = pvtool("evaluate --results " + q(dir / "shifted.res") + " " + base + " --out " + q(dir / "b.txt"), dir);
  CHECK(b.code == 0);  // poor scores are not an error
  CHECK(slurp(dir / "b.txt").find("eval box add_accuracy 0 ") != std::string::npos);

  std::ofstream(dir / "broken.res") << "obj box R 1 0 0\n";
  CHECK(pvtool("evaluate --results " + q(dir / "broken.res") + " " + base, dir).code == 2);
}

TEST_CASE("ablate") {
  const auto dir = scratch("ablate");
  const auto cloud = fixtures::toy_box();
  io::save_ply(cloud, dir / "box.ply");
  fs::create_directories(dir / "scenes");
  std::mt19937_64 rng(5);
  for (int i = 0; i < 3; ++i) {
    const auto s = io::synth_scene(cloud, fixtures::random_pose(rng, 0.3), 0.005, 0.3, 10 + i, "box");
    io::save_ply(s.cloud, dir / "scenes" / ("s" + std::to_string(i) + ".ply"));
    io::save_annotations(std::vector{s.annotation}, dir / "scenes" / ("s" + std::to_string(i) + ".gt"));
  }
  const auto base = "ablate --sweep k --model " + q(dir / "box.ply") + " --scenes " + q(dir / "scenes") + " --num 200";

  const auto r = pvtool(base + " --range 0..2 --out " + q(dir / "t.tsv") + " --plot " + q(dir / "t.svg"), dir);
  REQUIRE_MESSAGE(r.code == 0, r.output);
  std::istringstream table(slurp(dir / "t.tsv"));
  std::string line;
  std::getline(table, line);  // header
  std::vector<double> wall;
  int rows = 0;
  while (std::getline(table, line)) {
    std::istringstream ls(line);
    int k;
    double acc, t;
    ls >> k >> acc >> t;
    CHECK(k == rows);
    CHECK(acc >= 0.0);
    CHECK(acc <= 1.0);
    wall.push_back(t);
    ++rows;
  }
  CHECK(rows == 3);
  MESSAGE("feature wall time per k: " << wall[0] << " " << wall[1] << " " << wall[2]);
  for (std::size_t i = 1; i < wall.size(); ++i) CHECK(wall[i] >= wall[i - 1]);
  CHECK(slurp(dir / "t.svg").find("<svg") != std::string::npos);

  const auto single = pvtool(base + " --range 1..1 --out " + q(dir / "one.tsv"), dir);
  REQUIRE(single.code == 0);
  std::istringstream one(slurp(dir / "one.tsv"));
  int n = 0;
  while (std::getline(one, line)) ++n;
  CHECK(n == 2);

  CHECK(pvtool(base + " --range 3..1", dir).code == 1);
  CHECK(pvtool(base + " --range 0..x", dir).code == 1);
  CHECK(pvtool(base + " --range -1..2", dir).code == 1);
  CHECK(pvtool(base + " --sweep m --range 0..2", dir).code == 1);
}

TEST_CASE("train with zero epochs") {
  Workspace ws("train");
  const auto w = ws.dir / "box.wts";
  const auto r = pvtool("train --db " + q(ws.db) + " --out " + q(w) + " --k 4 --epochs 0 --batch-size 16", ws.dir);
  REQUIRE_MESSAGE(r.code == 0, r.output);
  CHECK(fs::exists(w.string() + ".loss.tsv"));
  std::ifstream in(w, std::ios::binary);
  const auto net = MlpRegressor::read(in);
  CHECK(net.model_id() == "box");

  // The weights drive the learned backend end to end.
  const auto scene = ws.dir / "scene.ply";
  REQUIRE(pvtool("synth --model " + q(ws.model) + " --id box --out-scene " + q(scene) + " --out-gt " + q(ws.dir / "g.gt"),
                 ws.dir)
              .code == 0);
  const auto e = pvtool("estimate --db " + q(ws.db) + " --scene " + q(scene) + " --out " + q(ws.dir / "r.res") +
                            " --k 4 --backend mlp --weights " + q(w),
                        ws.dir);
  CHECK((e.code == 0 || e.code == 3));
}

TEST_CASE("plot-overlay") {
  Workspace ws("overlay", 100);
  const auto scene = ws.dir / "scene.ply";
  const auto gt = ws.dir / "scene.gt";
  REQUIRE(pvtool("synth --model " + q(ws.model) + " --id box --out-scene " + q(scene) + " --out-gt " + q(gt), ws.dir)
              .code == 0);
  const auto svg = ws.dir / "o.svg";
  const auto r = pvtool("plot-overlay --scene " + q(scene) + " --model " + q(ws.model) + " --results " + q(gt) +
                            " --out " + q(svg) + " --view xz",
                        ws.dir);
  REQUIRE_MESSAGE(r.code == 0, r.output);
  const auto text = slurp(svg);
  CHECK(text.find("<svg") != std::string::npos);
  CHECK(text.find("</svg>") != std::string::npos);
  CHECK(pvtool("plot-overlay --scene " + q(scene) + " --model " + q(ws.model) + " --results " + q(gt) + " --out " +
                   q(svg) + " --view ab",
               ws.dir)
            .code == 1);
}

TEST_CASE("outputs are byte-identical across runs") {
  const auto dir = scratch("determinism");
  const auto model = dir / "box.ply";
  io::save_ply(fixtures::toy_box(), model);
  std::string first[4];
  for (int pass = 0; pass < 2; ++pass) {
    const auto sub = dir / std::to_string(pass);
    fs::create_directories(sub);
    REQUIRE(pvtool("make-patches --model " + q(model) + " --out " + q(sub / "a.db") + " --num 200 --k 4 --seed 7 --id box",
                   sub)
                .code == 0);
    REQUIRE(pvtool("synth --model " + q(model) + " --id box --noise 0.01 --crop 0.3 --seed 7 --out-scene " +
                       q(sub / "s.ply") + " --out-gt " + q(sub / "s.gt"),
                   sub)
                .code == 0);
    REQUIRE(pvtool("estimate --db " + q(sub / "a.db") + " --scene " + q(sub / "s.ply") + " --out " + q(sub / "r.res") +
                       " --k 4 --fusion sampled --votes",
                   sub)
                .code == 0);
    const std::string now[4] = {slurp(sub / "a.db"), slurp(sub / "s.ply"), slurp(sub / "s.gt"), slurp(sub / "r.res")};
    for (int i = 0; i < 4; ++i) {
      CHECK(!now[i].empty());
      if (pass == 0) {
        first[i] = now[i];
      } else {
        CHECK(now[i] == first[i]);
      }
    }
  }
}

}  // TEST_SUITE
