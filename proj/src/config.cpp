#include "pv/config.hpp"

#include "pv/error.hpp"

#include <fstream>
#include <functional>
#include <sstream>

namespace pv {

std::string to_string(FusionMode mode) {
  switch (mode) {
    case FusionMode::sampled: return "sampled";
    case FusionMode::expected: return "expected";
    case FusionMode::concat: return "concat";
  }
  return "?";
}

std::string to_string(Backend backend) { return backend == Backend::mlp ? "mlp" : "template"; }

FusionMode parse_fusion_mode(const std::string& s) {
  if (s == "sampled") return FusionMode::sampled;
  if (s == "expected") return FusionMode::expected;
  if (s == "concat") return FusionMode::concat;
  throw Error(Errc::ParseError, "unknown fusion mode '" + s + "' (sampled|expected|concat)");
}

Backend parse_backend(const std::string& s) {
  if (s == "template") return Backend::template_match;
  if (s == "mlp") return Backend::mlp;
  throw Error(Errc::ParseError, "unknown backend '" + s + "' (template|mlp)");
}

void RunConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw Error(Errc::InvalidArgument, what);
  };
  require(radius_factor > 0.0 && radius_factor <= 1.0, "radius_factor must lie in (0, 1]");
  require(n_points >= 16, "n_points must be at least 16");
  require(k_neighbors >= 0 && k_neighbors <= 64, "k_neighbors must lie in [0, 64]");
  require(num_patches >= 1, "num_patches must be positive");
  require(m_centers >= 1, "m_centers must be positive");
  require(neighbor_spacing > 0.0 && neighbor_spacing <= 1.0, "neighbor_spacing must lie in (0, 1]");
  require(feature_dim >= 8, "feature_dim must be at least 8");
  require(kmeans_K >= 1, "kmeans_K must be positive");
  require(delta > 0.0, "delta must be positive");
  require(min_cluster_frac >= 0.0 && min_cluster_frac <= 1.0, "min_cluster_frac must lie in [0, 1]");
  require(icp_iters >= 0, "icp_iters must be non-negative");
  require(icp_tol >= 0.0, "icp_tol must be non-negative");
  require(icp_reject_factor > 0.0, "icp_reject_factor must be positive");
  require(icp_max_distance > 0.0, "icp_max_distance must be positive");
  require(epochs >= 0, "epochs must be non-negative");
  require(batch_size >= 1, "batch_size must be positive");
  require(learning_rate > 0.0, "learning_rate must be positive");
  intrinsics.validate();
}

namespace {

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  std::istringstream ss(value);
  T v{};
  ss >> v;
  std::string rest;
  if (ss.fail() || (ss >> rest)) throw Error(Errc::ParseError, "bad value '" + value + "' for key '" + key + "'");
  return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "on") return true;
  if (value == "false" || value == "0" || value == "off") return false;
  throw Error(Errc::ParseError, "bad boolean '" + value + "' for key '" + key + "'");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
  using Setter = std::function<void(RunConfig&, const std::string&)>;
  static const std::map<std::string, Setter> setters = {
      {"radius_factor", [](RunConfig& c, const std::string& v) { c.radius_factor = parse_number<double>("radius_factor", v); }},
      {"n_points", [](RunConfig& c, const std::string& v) { c.n_points = parse_number<int>("n_points", v); }},
      {"k_neighbors", [](RunConfig& c, const std::string& v) { c.k_neighbors = parse_number<int>("k_neighbors", v); }},
      {"num_patches", [](RunConfig& c, const std::string& v) { c.num_patches = parse_number<int>("num_patches", v); }},
      {"neighbor_spacing", [](RunConfig& c, const std::string& v) { c.neighbor_spacing = parse_number<double>("neighbor_spacing", v); }},
      {"m_centers", [](RunConfig& c, const std::string& v) { c.m_centers = parse_number<int>("m_centers", v); }},
      {"feature_dim", [](RunConfig& c, const std::string& v) { c.feature_dim = parse_number<int>("feature_dim", v); }},
      {"fusion_mode", [](RunConfig& c, const std::string& v) { c.fusion_mode = parse_fusion_mode(v); }},
      {"backend", [](RunConfig& c, const std::string& v) { c.backend = parse_backend(v); }},
      {"kmeans_K", [](RunConfig& c, const std::string& v) { c.kmeans_K = parse_number<int>("kmeans_K", v); }},
      {"delta", [](RunConfig& c, const std::string& v) { c.delta = parse_number<double>("delta", v); }},
      {"min_cluster_frac", [](RunConfig& c, const std::string& v) { c.min_cluster_frac = parse_number<double>("min_cluster_frac", v); }},
      {"confidence_weighting", [](RunConfig& c, const std::string& v) { c.confidence_weighting = parse_bool("confidence_weighting", v); }},
      {"icp_iters", [](RunConfig& c, const std::string& v) { c.icp_iters = parse_number<int>("icp_iters", v); }},
      {"icp_tol", [](RunConfig& c, const std::string& v) { c.icp_tol = parse_number<double>("icp_tol", v); }},
      {"icp_reject_factor", [](RunConfig& c, const std::string& v) { c.icp_reject_factor = parse_number<double>("icp_reject_factor", v); }},
      {"icp_max_distance", [](RunConfig& c, const std::string& v) { c.icp_max_distance = parse_number<double>("icp_max_distance", v); }},
      {"icp_scene_to_model", [](RunConfig& c, const std::string& v) { c.icp_scene_to_model = parse_bool("icp_scene_to_model", v); }},
      {"epochs", [](RunConfig& c, const std::string& v) { c.epochs = parse_number<int>("epochs", v); }},
      {"batch_size", [](RunConfig& c, const std::string& v) { c.batch_size = parse_number<int>("batch_size", v); }},
      {"learning_rate", [](RunConfig& c, const std::string& v) { c.learning_rate = parse_number<double>("learning_rate", v); }},
      {"fx", [](RunConfig& c, const std::string& v) { c.intrinsics.fx = parse_number<double>("fx", v); }},
      {"fy", [](RunConfig& c, const std::string& v) { c.intrinsics.fy = parse_number<double>("fy", v); }},
      {"cx", [](RunConfig& c, const std::string& v) { c.intrinsics.cx = parse_number<double>("cx", v); }},
      {"cy", [](RunConfig& c, const std::string& v) { c.intrinsics.cy = parse_number<double>("cy", v); }},
      {"depth_scale", [](RunConfig& c, const std::string& v) { c.intrinsics.depth_scale = parse_number<double>("depth_scale", v); }},
      {"seed", [](RunConfig& c, const std::string& v) { c.seed = parse_number<std::uint64_t>("seed", v); }},
  };
  const auto it = setters.find(key);
  if (it == setters.end()) throw Error(Errc::ParseError, "unknown config key '" + key + "'");
  it->second(cfg, value);
}

void apply_config_text(RunConfig& cfg, const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(Errc::ParseError, "config line " + std::to_string(n) + ": expected key = value");
    try {
      set_config_value(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const Error& e) {
      throw Error(Errc::ParseError, "config line " + std::to_string(n) + ": " + e.what());
    }
  }
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open config '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  apply_config_text(base, ss.str());
  base.validate();
  return base;
}

}  // namespace pv
