#include "pv/dataset_io.hpp"

#include "pv/error.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

namespace pv::io {

namespace {

static_assert(std::endian::native == std::endian::little, "binary PLY I/O assumes a little-endian host");

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open '" + path.string() + "' for reading");
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot open '" + path.string() + "' for writing");
  return out;
}

std::string fmt9(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

// Shortest form that still round-trips a double exactly.
std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.15g", v);
  if (std::strtod(buf, nullptr) != v) std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// ---- PGM --------------------------------------------------------------------

std::string pgm_token(std::istream& in) {
  std::string tok;
  int c = in.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
    } else if (std::isspace(c)) {
      if (!tok.empty()) return tok;
    } else {
      tok.push_back(static_cast<char>(c));
    }
    c = in.get();
  }
  return tok;
}

struct PgmHeader {
  int width = 0, height = 0, maxval = 0;
};

PgmHeader read_pgm_header(std::istream& in, const std::filesystem::path& path) {
  if (pgm_token(in) != "P5") throw Error(Errc::ParseError, path.string() + ": not a binary PGM (P5)");
  PgmHeader h;
  try {
    h.width = std::stoi(pgm_token(in));
    h.height = std::stoi(pgm_token(in));
    h.maxval = std::stoi(pgm_token(in));
  } catch (const std::logic_error&) {
    throw Error(Errc::ParseError, path.string() + ": malformed PGM header");
  }
  if (h.width <= 0 || h.height <= 0 || h.maxval <= 0 || h.maxval > 65535) {
    throw Error(Errc::ParseError, path.string() + ": invalid PGM dimensions or maxval");
  }
  return h;
}

}  // namespace

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw Error(Errc::InvalidArgument, "focal lengths must be positive");
  if (!(depth_scale > 0.0)) throw Error(Errc::InvalidArgument, "depth_scale must be positive");
}

DepthImage read_depth_pgm(const std::filesystem::path& path) {
  auto in = open_in(path);
  const auto h = read_pgm_header(in, path);
  if (h.maxval < 256) throw Error(Errc::ParseError, path.string() + ": depth PGM must be 16-bit (maxval > 255)");
  DepthImage img(h.width, h.height);
  std::vector<unsigned char> raw(img.pixels.size() * 2);
  if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()))) {
    throw Error(Errc::ParseError, path.string() + ": truncated pixel data");
  }
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    img.pixels[i] = static_cast<std::uint16_t>((raw[2 * i] << 8) | raw[2 * i + 1]);  // big-endian per PGM
  }
  return img;
}

SegmentationMask read_mask_pgm(const std::filesystem::path& path) {
  auto in = open_in(path);
  const auto h = read_pgm_header(in, path);
  if (h.maxval > 255) throw Error(Errc::ParseError, path.string() + ": mask PGM must be 8-bit");
  SegmentationMask img(h.width, h.height);
  if (!in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()))) {
    throw Error(Errc::ParseError, path.string() + ": truncated pixel data");
  }
  return img;
}

void write_pgm(const DepthImage& image, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "P5\n" << image.width << ' ' << image.height << "\n65535\n";
  for (auto v : image.pixels) {
    const char b[2] = {static_cast<char>(v >> 8), static_cast<char>(v & 0xff)};
    out.write(b, 2);
  }
}

void write_pgm(const SegmentationMask& image, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "P5\n" << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.pixels.data()), static_cast<std::streamsize>(image.pixels.size()));
}

PointCloud depth_to_cloud(const DepthImage& depth, const CameraIntrinsics& intr, const SegmentationMask& mask,
                          int class_id) {
  intr.validate();
  if (depth.width != mask.width || depth.height != mask.height) {
    throw Error(Errc::DimensionMismatch, "depth " + std::to_string(depth.width) + "x" + std::to_string(depth.height) +
                                             " vs mask " + std::to_string(mask.width) + "x" +
                                             std::to_string(mask.height));
  }
  PointCloud cloud;
  for (int v = 0; v < depth.height; ++v) {
    for (int u = 0; u < depth.width; ++u) {
      const auto raw = depth.at(u, v);
      if (raw == 0 || mask.at(u, v) != class_id) continue;
      const double d = raw * intr.depth_scale;
      cloud.points.emplace_back(d * (u - intr.cx) / intr.fx, d * (v - intr.cy) / intr.fy, d);
    }
  }
  if (cloud.empty()) throw Error(Errc::EmptySegment, "no valid pixels with class id " + std::to_string(class_id));
  return cloud;
}

// ---- PLY ----------------------------------------------------------------------

namespace {

enum class Scalar { i8, u8, i16, u16, i32, u32, f32, f64 };

std::optional<Scalar> parse_scalar(const std::string& name) {
  static const std::map<std::string, Scalar> table = {
      {"char", Scalar::i8},    {"int8", Scalar::i8},     {"uchar", Scalar::u8},   {"uint8", Scalar::u8},
      {"short", Scalar::i16},  {"int16", Scalar::i16},   {"ushort", Scalar::u16}, {"uint16", Scalar::u16},
      {"int", Scalar::i32},    {"int32", Scalar::i32},   {"uint", Scalar::u32},   {"uint32", Scalar::u32},
      {"float", Scalar::f32},  {"float32", Scalar::f32}, {"double", Scalar::f64}, {"float64", Scalar::f64}};
  const auto it = table.find(name);
  if (it == table.end()) return std::nullopt;
  return it->second;
}

std::size_t scalar_size(Scalar s) {
  switch (s) {
    case Scalar::i8:
    case Scalar::u8: return 1;
    case Scalar::i16:
    case Scalar::u16: return 2;
    case Scalar::i32:
    case Scalar::u32:
    case Scalar::f32: return 4;
    case Scalar::f64: return 8;
  }
  return 0;
}

double decode_scalar(Scalar s, const unsigned char* p) {
  auto load = [p]<typename T>(T) {
    T v;
    std::memcpy(&v, p, sizeof(T));
    return static_cast<double>(v);
  };
  switch (s) {
    case Scalar::i8: return load(std::int8_t{});
    case Scalar::u8: return load(std::uint8_t{});
    case Scalar::i16: return load(std::int16_t{});
    case Scalar::u16: return load(std::uint16_t{});
    case Scalar::i32: return load(std::int32_t{});
    case Scalar::u32: return load(std::uint32_t{});
    case Scalar::f32: return load(float{});
    case Scalar::f64: return load(double{});
  }
  return 0.0;
}

struct PlyProperty {
  std::string name;
  Scalar type = Scalar::f32;
  bool is_list = false;
  Scalar count_type = Scalar::u8;
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> properties;
};

class PlyReader {
 public:
  explicit PlyReader(std::istream& in) : in_(in) {}

  PointCloud read() {
    parse_header();
    PointCloud cloud;
    for (const auto& el : elements_) {
      if (el.name == "vertex") {
        read_vertices(el, cloud);
      } else {
        skip_element(el);
      }
    }
    return cloud;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    if (binary_) throw Error(Errc::ParseError, "PLY byte " + std::to_string(offset_) + ": " + what);
    throw Error(Errc::ParseError, "PLY line " + std::to_string(line_) + ": " + what);
  }

  bool next_line(std::string& line) {
    if (!std::getline(in_, line)) return false;
    ++line_;
    offset_ += line.size() + 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  }

  void parse_header() {
    std::string line;
    if (!next_line(line) || line != "ply") fail("missing 'ply' magic");
    bool have_format = false;
    while (true) {
      if (!next_line(line)) fail("unexpected end of header");
      std::istringstream ss(line);
      std::string key;
      ss >> key;
      if (key.empty() || key == "comment" || key == "obj_info") continue;
      if (key == "end_header") break;
      if (key == "format") {
        std::string fmt, version;
        ss >> fmt >> version;
        if (fmt == "ascii") {
          binary_ = false;
        } else if (fmt == "binary_little_endian") {
          binary_ = true;
        } else {
          binary_ = false;
          fail("unsupported format '" + fmt + "'");
        }
        have_format = true;
      } else if (key == "element") {
        PlyElement el;
        long long count = -1;
        ss >> el.name >> count;
        if (el.name.empty() || count < 0) fail("malformed element line");
        el.count = static_cast<std::size_t>(count);
        elements_.push_back(el);
      } else if (key == "property") {
        if (elements_.empty()) fail("property before any element");
        PlyProperty prop;
        std::string type;
        ss >> type;
        if (type == "list") {
          std::string count_type, item_type;
          ss >> count_type >> item_type >> prop.name;
          const auto ct = parse_scalar(count_type);
          const auto it = parse_scalar(item_type);
          if (!ct || !it) {
            throw Error(Errc::UnsupportedProperty, "PLY line " + std::to_string(line_) + ": unknown list type");
          }
          prop.is_list = true;
          prop.count_type = *ct;
          prop.type = *it;
        } else {
          ss >> prop.name;
          const auto t = parse_scalar(type);
          if (!t) {
            throw Error(Errc::UnsupportedProperty,
                        "PLY line " + std::to_string(line_) + ": unknown property type '" + type + "'");
          }
          prop.type = *t;
        }
        if (prop.name.empty()) fail("property without a name");
        elements_.back().properties.push_back(prop);
      } else {
        fail("unknown header keyword '" + key + "'");
      }
    }
    if (!have_format) fail("missing format line");
  }

  void read_bytes(unsigned char* dst, std::size_t n) {
    if (!in_.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n))) fail("truncated binary data");
    offset_ += n;
  }

  void read_vertices(const PlyElement& el, PointCloud& cloud) {
    if (el.count == 0) fail("empty vertex element");
    std::array<int, 6> slot;
    slot.fill(-1);
    static const std::array<const char*, 6> names = {"x", "y", "z", "nx", "ny", "nz"};
    for (std::size_t i = 0; i < el.properties.size(); ++i) {
      for (std::size_t k = 0; k < names.size(); ++k) {
        if (el.properties[i].name == names[k]) {
          if (el.properties[i].is_list) {
            throw Error(Errc::UnsupportedProperty, std::string("list-typed vertex property '") + names[k] + "'");
          }
          slot[k] = static_cast<int>(i);
        }
      }
    }
    if (slot[0] < 0 || slot[1] < 0 || slot[2] < 0) fail("vertex element lacks x/y/z");
    const bool normals = slot[3] >= 0 && slot[4] >= 0 && slot[5] >= 0;

    cloud.points.reserve(el.count);
    if (normals) cloud.normals.reserve(el.count);
    std::vector<double> values(el.properties.size());
    for (std::size_t v = 0; v < el.count; ++v) {
      read_instance(el, values);
      cloud.points.emplace_back(values[slot[0]], values[slot[1]], values[slot[2]]);
      if (!cloud.points.back().allFinite()) fail("non-finite vertex coordinate");
      if (normals) {
        Eigen::Vector3d n(values[slot[3]], values[slot[4]], values[slot[5]]);
        const double len = n.norm();
        cloud.normals.push_back(len > 0.0 ? Eigen::Vector3d(n / len) : n);
      }
    }
  }

  // Scalars of one element instance; list properties are consumed and reported as 0.
  void read_instance(const PlyElement& el, std::vector<double>& values) {
    if (!binary_) {
      std::string line;
      if (!next_line(line)) fail("unexpected end of file in element '" + el.name + "'");
      std::istringstream ss(line);
      for (std::size_t i = 0; i < el.properties.size(); ++i) {
        const auto& p = el.properties[i];
        double v = 0.0;
        if (!(ss >> v)) fail("too few values for element '" + el.name + "'");
        if (p.is_list) {
          const auto n = static_cast<long long>(v);
          if (n < 0) fail("negative list length");
          for (long long k = 0; k < n; ++k) {
            double item;
            if (!(ss >> item)) fail("truncated list");
          }
          v = 0.0;
        } else if (p.type == Scalar::f32) {
          v = static_cast<float>(v);  // same value a binary file would hold
        }
        values[i] = v;
      }
      return;
    }
    unsigned char buf[8];
    for (std::size_t i = 0; i < el.properties.size(); ++i) {
      const auto& p = el.properties[i];
      if (p.is_list) {
        read_bytes(buf, scalar_size(p.count_type));
        const auto n = static_cast<long long>(decode_scalar(p.count_type, buf));
        if (n < 0) fail("negative list length");
        for (long long k = 0; k < n; ++k) read_bytes(buf, scalar_size(p.type));
        values[i] = 0.0;
      } else {
        read_bytes(buf, scalar_size(p.type));
        values[i] = decode_scalar(p.type, buf);
      }
    }
  }

  void skip_element(const PlyElement& el) {
    std::vector<double> values(el.properties.size());
    for (std::size_t i = 0; i < el.count; ++i) read_instance(el, values);
  }

  std::istream& in_;
  std::vector<PlyElement> elements_;
  bool binary_ = false;
  std::size_t line_ = 0;
  std::size_t offset_ = 0;
};

}  // namespace

PointCloud read_ply(std::istream& in) {
  PlyReader reader(in);
  auto cloud = reader.read();
  bool has_vertex = !cloud.points.empty();
  if (!has_vertex) throw Error(Errc::ParseError, "PLY has no vertex element");
  return cloud;
}

PointCloud load_ply(const std::filesystem::path& path) {
  auto in = open_in(path);
  try {
    return read_ply(in);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

void write_ply(const PointCloud& cloud, std::ostream& out, PlyFormat format) {
  const bool normals = cloud.has_normals();
  out << "ply\nformat " << (format == PlyFormat::ascii ? "ascii" : "binary_little_endian") << " 1.0\n";
  out << "element vertex " << cloud.size() << "\n";
  out << "property float x\nproperty float y\nproperty float z\n";
  if (normals) out << "property float nx\nproperty float ny\nproperty float nz\n";
  out << "end_header\n";
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    std::array<float, 6> v{};
    const auto& p = cloud.points[i];
    v[0] = static_cast<float>(p.x());
    v[1] = static_cast<float>(p.y());
    v[2] = static_cast<float>(p.z());
    std::size_t n = 3;
    if (normals) {
      const auto& q = cloud.normals[i];
      v[3] = static_cast<float>(q.x());
      v[4] = static_cast<float>(q.y());
      v[5] = static_cast<float>(q.z());
      n = 6;
    }
    if (format == PlyFormat::ascii) {
      for (std::size_t k = 0; k < n; ++k) out << fmt9(v[k]) << (k + 1 < n ? ' ' : '\n');
    } else {
      out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(n * sizeof(float)));
    }
  }
}

void save_ply(const PointCloud& cloud, const std::filesystem::path& path, PlyFormat format) {
  auto out = open_out(path);
  write_ply(cloud, out, format);
  if (!out) throw Error(Errc::IoError, "failed writing '" + path.string() + "'");
}

// ---- synthetic scenes ---------------------------------------------------------

SyntheticScene synth_scene(const PointCloud& model, const RigidTransform& pose, double noise_sigma,
                           double crop_fraction, std::uint64_t seed, const std::string& object_id) {
  if (!(crop_fraction >= 0.0 && crop_fraction < 1.0)) {
    throw Error(Errc::InvalidArgument, "crop_fraction must lie in [0, 1)");
  }
  if (noise_sigma < 0.0) throw Error(Errc::InvalidArgument, "noise_sigma must be non-negative");

  const PointCloud moved = pose.apply(model);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  Eigen::Vector3d dir;
  do {
    dir = Eigen::Vector3d(gauss(rng), gauss(rng), gauss(rng));
  } while (dir.norm() < 1e-12);
  dir.normalize();

  const std::size_t n = moved.size();
  const auto removed = static_cast<std::size_t>(std::floor(crop_fraction * static_cast<double>(n)));
  std::vector<char> keep(n, 1);
  if (removed > 0) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return moved.points[a].dot(dir) > moved.points[b].dot(dir);
    });
    for (std::size_t i = 0; i < removed; ++i) keep[order[i]] = 0;
  }

  SyntheticScene scene;
  scene.annotation = {object_id, pose, 1};
  const double sigma = noise_sigma > 0.0 ? noise_sigma * object_diameter(model) : 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!keep[i]) continue;
    Point3 p = moved.points[i];
    if (sigma > 0.0) p += sigma * Eigen::Vector3d(gauss(rng), gauss(rng), gauss(rng));
    scene.cloud.points.push_back(p);
    if (moved.has_normals()) scene.cloud.normals.push_back(moved.normals[i]);
  }
  return scene;
}

// ---- pose records -------------------------------------------------------------

std::string format_record(const PoseRecord& r) {
  std::string s = "obj " + r.object_id + " R";
  const auto& R = r.pose.rotation();
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) s += " " + fmt17(R(i, j));
  }
  s += " t";
  for (int i = 0; i < 3; ++i) s += " " + fmt17(r.pose.translation()(i));
  if (r.score) s += " score " + fmt17(*r.score);
  if (r.patch) s += " patch " + std::to_string(*r.patch);
  return s;
}

PoseRecord parse_record(const std::string& line, std::size_t line_number) {
  auto fail = [&](const std::string& what) -> Error {
    return Error(Errc::ParseError, "line " + std::to_string(line_number) + ": " + what);
  };
  std::istringstream ss(line);
  std::vector<std::string> tok;
  for (std::string t; ss >> t;) tok.push_back(t);

  auto number = [&](std::size_t i) {
    if (i >= tok.size()) throw fail("record truncated");
    try {
      std::size_t used = 0;
      const double v = std::stod(tok[i], &used);
      if (used != tok[i].size() || !std::isfinite(v)) throw fail("bad number '" + tok[i] + "'");
      return v;
    } catch (const std::logic_error&) {
      throw fail("bad number '" + tok[i] + "'");
    }
  };

  if (tok.size() < 16 || tok[0] != "obj" || tok[2] != "R" || tok[12] != "t") {
    throw fail("expected 'obj <id> R <9 floats> t <3 floats>'");
  }
  PoseRecord r;
  r.object_id = tok[1];
  Eigen::Matrix3d R;
  for (int i = 0; i < 9; ++i) R(i / 3, i % 3) = number(3 + i);
  const Eigen::Vector3d t(number(13), number(14), number(15));
  if (R.determinant() <= 0.0) throw fail("rotation has non-positive determinant");
  if ((R.transpose() * R - Eigen::Matrix3d::Identity()).norm() > 1e-6) throw fail("rotation is not orthonormal");
  r.pose = RigidTransform(R, t);

  for (std::size_t i = 16; i < tok.size(); i += 2) {
    if (i + 1 >= tok.size()) throw fail("field '" + tok[i] + "' without a value");
    if (tok[i] == "score") {
      r.score = number(i + 1);
    } else if (tok[i] == "patch") {
      try {
        r.patch = std::stol(tok[i + 1]);
      } catch (const std::logic_error&) {
        throw fail("bad patch id");
      }
    } else {
      throw fail("unknown field '" + tok[i] + "'");
    }
  }
  return r;
}

void save_records(std::span<const PoseRecord> records, const std::filesystem::path& path,
                  std::span<const std::string> comments) {
  auto out = open_out(path);
  for (const auto& c : comments) out << "# " << c << "\n";
  for (const auto& r : records) out << format_record(r) << "\n";
  if (!out) throw Error(Errc::IoError, "failed writing '" + path.string() + "'");
}

std::vector<PoseRecord> load_records(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::vector<PoseRecord> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    try {
      out.push_back(parse_record(line, n));
    } catch (const Error& e) {
      throw Error(Errc::ParseError, path.string() + ": " + e.what());
    }
  }
  return out;
}

void save_results(const ResultSet& results, const std::filesystem::path& path, std::span<const std::string> comments) {
  std::vector<PoseRecord> all = results.detections;
  all.insert(all.end(), results.votes.begin(), results.votes.end());
  save_records(all, path, comments);
}

ResultSet load_results(const std::filesystem::path& path) {
  ResultSet rs;
  for (auto& r : load_records(path)) (r.patch ? rs.votes : rs.detections).push_back(std::move(r));
  return rs;
}

std::vector<SceneAnnotation> load_annotations(const std::filesystem::path& path) {
  const auto records = load_records(path);
  std::map<std::string, int> counts;
  for (const auto& r : records) ++counts[r.object_id];
  std::vector<SceneAnnotation> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back({r.object_id, r.pose, counts[r.object_id]});
  return out;
}

void save_annotations(std::span<const SceneAnnotation> annotations, const std::filesystem::path& path) {
  std::vector<PoseRecord> records;
  for (const auto& a : annotations) records.push_back({a.object_id, a.gt_pose, std::nullopt, std::nullopt});
  save_records(records, path);
}

}  // namespace pv::io
