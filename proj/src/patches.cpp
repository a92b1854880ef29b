#include "pv/patches.hpp"

#include "pv/error.hpp"
#include "pv/features.hpp"
#include "pv/kdtree.hpp"
#include "pv/sampling.hpp"

#include <algorithm>
#include <array>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>

namespace pv {

namespace {

Patch make_patch(const PointCloud& cloud, std::vector<std::size_t> indices, const Point3& center, double radius) {
  if (indices.size() < kMinPatchPoints) {
    throw Error(Errc::TooFewPoints, std::to_string(indices.size()) + " points within radius");
  }
  Patch p;
  p.indices = std::move(indices);
  p.points.points.reserve(p.indices.size());
  for (auto i : p.indices) p.points.points.push_back(cloud.points[i]);
  if (cloud.has_normals()) {
    for (auto i : p.indices) p.points.normals.push_back(cloud.normals[i]);
  }
  p.center = center;
  p.radius = radius;
  return p;
}

// Usable patches for a list of FPS centers; ids are FPS positions.
std::vector<Patch> extract_all(const PointCloud& cloud, std::span<const std::size_t> centers, double radius,
                               std::size_t& dropped_sparse) {
  const KdTree tree(cloud.points);
  std::vector<std::optional<Patch>> slots(centers.size());
  const auto n = static_cast<std::int64_t>(centers.size());
#pragma omp parallel for schedule(dynamic, 8)
  for (std::int64_t i = 0; i < n; ++i) {
    const Point3& c = cloud.points[centers[i]];
    auto idx = tree.radius_search(c, radius);
    if (idx.size() < kMinPatchPoints) continue;
    Patch p = make_patch(cloud, std::move(idx), c, radius);
    p.id = static_cast<std::size_t>(i);
    slots[i] = std::move(p);
  }
  std::vector<Patch> out;
  dropped_sparse = 0;
  for (auto& s : slots) {
    if (s) {
      out.push_back(std::move(*s));
    } else {
      ++dropped_sparse;
    }
  }
  return out;
}

// k nearest patches (by center distance) among those with id < pool, excluding self.
void assign_neighbors(std::vector<Patch>& patches, int k, std::size_t pool) {
  for (auto& p : patches) {
    std::vector<std::pair<double, std::size_t>> cand;
    for (const auto& q : patches) {
      if (q.id == p.id || q.id >= pool) continue;
      cand.emplace_back((q.center - p.center).squaredNorm(), q.id);
    }
    const auto take = std::min<std::size_t>(static_cast<std::size_t>(std::max(k, 0)), cand.size());
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(take), cand.end());
    p.neighbor_ids.clear();
    for (std::size_t i = 0; i < take; ++i) p.neighbor_ids.push_back(cand[i].second);
  }
}

const Patch& find_patch(const std::vector<Patch>& patches, std::size_t id) {
  const auto it = std::lower_bound(patches.begin(), patches.end(), id,
                                   [](const Patch& p, std::size_t v) { return p.id < v; });
  if (it == patches.end() || it->id != id) throw Error(Errc::InvalidArgument, "unknown patch id " + std::to_string(id));
  return *it;
}

PatchGroup make_group(const std::vector<Patch>& patches, const Patch& center, const RigidTransform& to_lpcf,
                      double diameter) {
  PatchGroup g;
  g.center_id = center.id;
  g.to_lpcf = to_lpcf;
  g.member_ids.push_back(center.id);
  g.weights.push_back(1.0);
  for (auto nid : center.neighbor_ids) {
    g.member_ids.push_back(nid);
    g.weights.push_back(neighbor_weight(find_patch(patches, nid).center, center.center, diameter));
  }
  return g;
}

}  // namespace

const Patch& PatchDatabase::patch(std::size_t id) const { return find_patch(patches, id); }

PatchGroup PatchDatabase::group(const PatchRecord& record) const {
  PatchGroup g;
  g.center_id = record.patch_id;
  g.to_lpcf = record.standardized.to_lpcf;
  g.member_ids.push_back(record.patch_id);
  g.member_ids.insert(g.member_ids.end(), record.neighbor_ids.begin(), record.neighbor_ids.end());
  g.weights = record.neighbor_weights;
  return g;
}

std::size_t PatchDatabase::train_count() const {
  return static_cast<std::size_t>(std::count_if(records.begin(), records.end(), [](const auto& r) { return r.train; }));
}

std::pair<PointCloud, RigidTransform> standardize_model(const PointCloud& model) {
  const RigidTransform t = pca_frame(model);
  return {t.apply(model), t};
}

Patch extract_patch(const PointCloud& cloud, const Point3& center, double radius) {
  if (!(radius > 0.0)) throw Error(Errc::InvalidArgument, "patch radius must be positive");
  std::vector<std::size_t> idx;
  const double r2 = radius * radius;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if ((cloud.points[i] - center).squaredNorm() <= r2) idx.push_back(i);
  }
  return make_patch(cloud, std::move(idx), center, radius);
}

PointCloud normalize_points(std::span<const Point3> points, double radius, int n, std::uint64_t seed) {
  if (points.empty()) throw Error(Errc::TooFewPoints, "cannot normalize an empty patch");
  if (n <= 0 || !(radius > 0.0)) throw Error(Errc::InvalidArgument, "normalize needs n > 0 and radius > 0");
  const auto count = static_cast<std::size_t>(n);
  std::vector<std::size_t> pick;
  pick.reserve(count);
  std::mt19937_64 rng(seed);
  if (points.size() == count) {
    pick.resize(count);
    std::iota(pick.begin(), pick.end(), 0);
  } else if (points.size() > count) {
    // Partial Fisher-Yates: seeded subset without replacement.
    std::vector<std::size_t> all(points.size());
    std::iota(all.begin(), all.end(), 0);
    for (std::size_t i = 0; i < count; ++i) {
      std::uniform_int_distribution<std::size_t> d(i, all.size() - 1);
      std::swap(all[i], all[d(rng)]);
    }
    pick.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(count));
  } else {
    pick.resize(points.size());
    std::iota(pick.begin(), pick.end(), 0);
    std::uniform_int_distribution<std::size_t> d(0, points.size() - 1);
    while (pick.size() < count) pick.push_back(d(rng));
  }

  PointCloud out;
  out.points.reserve(count);
  Point3 mean = Point3::Zero();
  for (auto i : pick) mean += points[i];
  mean /= static_cast<double>(count);
  for (auto i : pick) out.points.push_back((points[i] - mean) / radius);
  return out;
}

PointCloud normalize_patch(const Patch& patch, int n, std::uint64_t seed) {
  return normalize_points(patch.points.points, patch.radius, n, seed);
}

StandardizedPatch standardize_patch(const Patch& patch) {
  StandardizedPatch s;
  s.to_lpcf = pca_frame(patch.points);
  s.points = s.to_lpcf.apply(patch.points);
  return s;
}

std::uint64_t patch_seed(std::uint64_t base, std::size_t id) { return mix_seed(base, 0x70617463ULL + id); }

PatchDatabase build_patch_database(const PointCloud& model, int num_patches, const PatchParams& params,
                                   const std::string& model_id) {
  if (model.size() < kMinPatchPoints) throw Error(Errc::TooFewPoints, "model has too few points");
  if (num_patches < 1) throw Error(Errc::InvalidArgument, "num_patches must be positive");
  if (params.k_neighbors < 0 || params.n_points <= 0 || !(params.radius_factor > 0.0) ||
      !(params.neighbor_spacing > 0.0)) {
    throw Error(Errc::InvalidArgument, "invalid patch parameters");
  }

  PatchDatabase db;
  db.model_id = model_id;
  db.model = model;
  db.params = params;
  db.diameter = object_diameter(model);

  const RigidTransform frame = pca_frame(model);
  if ((frame.rotation() - Eigen::Matrix3d::Identity()).norm() > 1e-6 ||
      frame.translation().norm() > 1e-6 * std::max(db.diameter, 1.0)) {
    throw Error(Errc::ModelNotStandardized, "model is not expressed in its PCA frame");
  }
  db.radius = params.radius_factor * db.diameter;

  const auto count = std::min<std::size_t>(static_cast<std::size_t>(num_patches), model.size());
  std::size_t pool = 0;
  auto centers = farthest_point_sample_spaced(model.points, count, params.neighbor_spacing * db.diameter, params.seed, pool);
  centers.resize(count);
  db.patches = extract_all(model, centers, db.radius, db.dropped_sparse);
  assign_neighbors(db.patches, params.k_neighbors, pool);

  std::vector<std::optional<PatchRecord>> slots(db.patches.size());
  const auto n = static_cast<std::int64_t>(db.patches.size());
#pragma omp parallel for schedule(dynamic, 8)
  for (std::int64_t i = 0; i < n; ++i) {
    const Patch& p = db.patches[i];
    PatchRecord rec;
    try {
      rec.standardized = standardize_patch(p);
      rec.gt_vector = to_vector(invert(rec.standardized.to_lpcf));
    } catch (const Error&) {
      continue;  // DegenerateFrame or AngleNearPi
    }
    rec.patch_id = p.id;
    rec.source = model_id;
    rec.normalized_points =
        normalize_points(rec.standardized.points.points, db.radius, params.n_points, patch_seed(params.seed, p.id));
    const PatchGroup g = make_group(db.patches, p, rec.standardized.to_lpcf, db.diameter);
    rec.neighbor_ids.assign(g.member_ids.begin() + 1, g.member_ids.end());
    rec.neighbor_weights = g.weights;
    slots[i] = std::move(rec);
  }
  for (auto& s : slots) {
    if (s) {
      db.records.push_back(std::move(*s));
    } else {
      ++db.dropped_degenerate;
    }
  }

  // 4:1 train/validation split, per record.
  std::vector<std::size_t> order(db.records.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(mix_seed(params.seed, 0x73706c6974ULL));
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t train = (db.records.size() * 4 + 4) / 5;
  for (std::size_t i = 0; i < order.size(); ++i) db.records[order[i]].train = i < train;
  return db;
}

PatchDatabase build_patch_database_from_raw(const PointCloud& raw_model, int num_patches, const PatchParams& params,
                                            const std::string& model_id) {
  auto [ocf, to_ocf] = standardize_model(raw_model);
  PatchDatabase db = build_patch_database(ocf, num_patches, params, model_id);
  db.to_ocf = to_ocf;
  return db;
}

ScenePatches sample_scene_patches(const PointCloud& segment, int m, double radius_factor, int k, double diameter,
                                  double neighbor_spacing, std::uint64_t seed) {
  if (segment.empty()) throw Error(Errc::EmptySegment, "scene segment has no points");
  if (m < 1 || !(diameter > 0.0) || !(radius_factor > 0.0) || !(neighbor_spacing > 0.0)) {
    throw Error(Errc::InvalidArgument, "invalid sampling parameters");
  }

  ScenePatches out;
  out.requested = static_cast<std::size_t>(m);
  const double radius = radius_factor * diameter;
  const auto count = std::min<std::size_t>(out.requested, segment.size());
  std::size_t pool = 0;
  const auto centers = farthest_point_sample_spaced(segment.points, count, neighbor_spacing * diameter, seed, pool);
  std::size_t sparse_all = 0;
  out.patches = extract_all(segment, centers, radius, sparse_all);
  // Only the first m centers vote; later ones only serve as neighbours.
  out.dropped_sparse = count - static_cast<std::size_t>(std::count_if(
                                   out.patches.begin(), out.patches.end(), [&](const Patch& p) { return p.id < count; }));
  assign_neighbors(out.patches, k, pool);

  std::vector<std::optional<PatchGroup>> slots(out.patches.size());
  const auto n = static_cast<std::int64_t>(out.patches.size());
#pragma omp parallel for schedule(dynamic, 8)
  for (std::int64_t i = 0; i < n; ++i) {
    if (out.patches[i].id >= count) continue;
    try {
      const RigidTransform t = pca_frame(out.patches[i].points);
      slots[i] = make_group(out.patches, out.patches[i], t, diameter);
    } catch (const Error&) {
    }
  }
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (slots[i]) {
      out.groups.push_back(std::move(*slots[i]));
    } else if (out.patches[i].id < count) {
      ++out.dropped_degenerate;
    }
  }
  out.too_small = out.groups.size() < out.requested;
  return out;
}

// ---- persistence --------------------------------------------------------------

namespace {

constexpr char kDbMagic[8] = {'P', 'V', 'P', 'A', 'T', 'C', 'H', 'D'};
constexpr std::uint32_t kDbVersion = 1;

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}
  template <typename T>
  void put(T v) {
    out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void str(const std::string& s) {
    put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  void transform(const RigidTransform& t) {
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) put<double>(t.rotation()(i, j));
    for (int i = 0; i < 3; ++i) put<double>(t.translation()(i));
  }
  void points_f32(const std::vector<Point3>& pts) {
    put<std::uint64_t>(pts.size());
    for (const auto& p : pts)
      for (int i = 0; i < 3; ++i) put<float>(static_cast<float>(p(i)));
  }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}
  template <typename T>
  T get() {
    T v;
    if (!in_.read(reinterpret_cast<char*>(&v), sizeof(T))) {
      throw Error(Errc::ParseError, "patch database truncated at byte " + std::to_string(offset_));
    }
    offset_ += sizeof(T);
    return v;
  }
  std::uint64_t count(std::uint64_t limit = 1ULL << 32) {
    const auto n = get<std::uint64_t>();
    if (n > limit) throw Error(Errc::ParseError, "implausible count at byte " + std::to_string(offset_));
    return n;
  }
  std::string str() {
    const auto n = get<std::uint32_t>();
    if (n > (1u << 20)) throw Error(Errc::ParseError, "implausible string length");
    std::string s(n, '\0');
    for (auto& c : s) c = get<char>();
    return s;
  }
  RigidTransform transform() {
    Eigen::Matrix3d r;
    Eigen::Vector3d t;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) r(i, j) = get<double>();
    for (int i = 0; i < 3; ++i) t(i) = get<double>();
    try {
      return RigidTransform(r, t);
    } catch (const Error& e) {
      throw Error(Errc::ParseError, std::string("stored transform invalid: ") + e.what());
    }
  }
  std::vector<Point3> points_f32() {
    std::vector<Point3> pts(count());
    for (auto& p : pts)
      for (int i = 0; i < 3; ++i) p(i) = get<float>();
    return pts;
  }

 private:
  std::istream& in_;
  std::size_t offset_ = 0;
};

}  // namespace

void write_database(const PatchDatabase& db, std::ostream& out) {
  Writer w(out);
  out.write(kDbMagic, sizeof kDbMagic);
  w.put<std::uint32_t>(kDbVersion);
  w.str(db.model_id);
  w.put<double>(db.params.radius_factor);
  w.put<std::int32_t>(db.params.n_points);
  w.put<std::int32_t>(db.params.k_neighbors);
  w.put<double>(db.params.neighbor_spacing);
  w.put<std::uint64_t>(db.params.seed);
  w.put<double>(db.diameter);
  w.put<double>(db.radius);
  w.transform(db.to_ocf);
  w.put<std::uint64_t>(db.dropped_degenerate);
  w.put<std::uint64_t>(db.dropped_sparse);

  // Model in float64: patch membership is recomputed from it bit-exactly.
  w.put<std::uint64_t>(db.model.size());
  for (const auto& p : db.model.points)
    for (int i = 0; i < 3; ++i) w.put<double>(p(i));

  w.put<std::uint64_t>(db.patches.size());
  for (const auto& p : db.patches) {
    w.put<std::uint64_t>(p.id);
    w.put<std::uint64_t>(p.indices.size());
    for (auto i : p.indices) w.put<std::uint32_t>(static_cast<std::uint32_t>(i));
    w.put<std::uint64_t>(p.neighbor_ids.size());
    for (auto i : p.neighbor_ids) w.put<std::uint64_t>(i);
  }

  w.put<std::uint64_t>(db.records.size());
  for (const auto& r : db.records) {
    w.put<std::uint64_t>(r.patch_id);
    w.str(r.source);
    w.put<std::uint8_t>(r.train ? 1 : 0);
    w.transform(r.standardized.to_lpcf);
    for (double v : r.gt_vector.as_array()) w.put<double>(v);
    w.points_f32(r.standardized.points.points);
    w.points_f32(r.normalized_points.points);
    w.put<std::uint64_t>(r.neighbor_ids.size());
    for (auto i : r.neighbor_ids) w.put<std::uint64_t>(i);
    for (double v : r.neighbor_weights) w.put<double>(v);
  }
  if (!out) throw Error(Errc::IoError, "failed writing patch database");
}

PatchDatabase read_database(std::istream& in) {
  char magic[sizeof kDbMagic];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kDbMagic, sizeof magic) != 0) {
    throw Error(Errc::ParseError, "not a patch database (bad magic)");
  }
  Reader r(in);
  const auto version = r.get<std::uint32_t>();
  if (version != kDbVersion) throw Error(Errc::ParseError, "unsupported patch database version " + std::to_string(version));

  PatchDatabase db;
  db.model_id = r.str();
  db.params.radius_factor = r.get<double>();
  db.params.n_points = r.get<std::int32_t>();
  db.params.k_neighbors = r.get<std::int32_t>();
  db.params.neighbor_spacing = r.get<double>();
  db.params.seed = r.get<std::uint64_t>();
  db.diameter = r.get<double>();
  db.radius = r.get<double>();
  db.to_ocf = r.transform();
  db.dropped_degenerate = r.get<std::uint64_t>();
  db.dropped_sparse = r.get<std::uint64_t>();

  db.model.points.resize(r.count());
  for (auto& p : db.model.points)
    for (int i = 0; i < 3; ++i) p(i) = r.get<double>();

  db.patches.resize(r.count());
  for (auto& p : db.patches) {
    p.id = r.get<std::uint64_t>();
    p.indices.resize(r.count());
    for (auto& i : p.indices) {
      i = r.get<std::uint32_t>();
      if (i >= db.model.size()) throw Error(Errc::ParseError, "patch index out of range");
    }
    p.neighbor_ids.resize(r.count(64));
    for (auto& i : p.neighbor_ids) i = r.get<std::uint64_t>();
    p.radius = db.radius;
    for (auto i : p.indices) p.points.points.push_back(db.model.points[i]);
  }
  for (std::size_t i = 0; i < db.patches.size(); ++i) {
    if (i > 0 && db.patches[i].id <= db.patches[i - 1].id) throw Error(Errc::ParseError, "patch ids not ascending");
  }
  // Centers are not stored; FPS is deterministic, so rerun it.
  const auto centers = farthest_point_sample(db.model.points, db.patches.empty() ? 0 : db.patches.back().id + 1,
                                             db.params.seed);
  for (auto& p : db.patches) p.center = db.model.points[centers[p.id]];

  db.records.resize(r.count());
  for (auto& rec : db.records) {
    rec.patch_id = r.get<std::uint64_t>();
    rec.source = r.str();
    rec.train = r.get<std::uint8_t>() != 0;
    rec.standardized.to_lpcf = r.transform();
    std::array<double, 6> gt;
    for (auto& v : gt) v = r.get<double>();
    rec.gt_vector = PoseVector6::from_array(gt);
    rec.standardized.points.points = r.points_f32();
    rec.normalized_points.points = r.points_f32();
    rec.neighbor_ids.resize(r.count(64));
    for (auto& i : rec.neighbor_ids) i = r.get<std::uint64_t>();
    rec.neighbor_weights.resize(rec.neighbor_ids.size() + 1);
    for (auto& v : rec.neighbor_weights) v = r.get<double>();
    db.patch(rec.patch_id);  // validates the id
  }
  return db;
}

void save_database(const PatchDatabase& db, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot open '" + path.string() + "' for writing");
  write_database(db, out);
}

PatchDatabase load_database(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open '" + path.string() + "'");
  try {
    return read_database(in);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

}  // namespace pv
