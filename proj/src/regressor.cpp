#include "pv/regressor.hpp"

#include "pv/error.hpp"
#include "pv/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <numbers>
#include <numeric>
#include <ostream>
#include <random>

namespace pv {

PredictedTransform Regressor::predict(const Feature& fused, const std::string& model_id) const {
  if (model_id != model_id_) throw Error(Errc::UnknownModel, "regressor serves '" + model_id_ + "', not '" + model_id + "'");
  return predict(fused);
}

void Regressor::check_dim(const Feature& fused) const {
  if (fused.size() != input_dim()) {
    throw Error(Errc::DimensionMismatch, "feature has " + std::to_string(fused.size()) + " entries, regressor expects " +
                                             std::to_string(input_dim()));
  }
}

// ---- template matching --------------------------------------------------------

TemplateRegressor::TemplateRegressor(std::string model_id, Eigen::MatrixXd features, std::vector<PoseVector6> targets,
                                     kernels::Exec exec)
    : Regressor(std::move(model_id)), rows_(std::move(features)), targets_(std::move(targets)), exec_(exec) {
  if (targets_.empty() || rows_.rows() == 0) throw Error(Errc::EmptyDatabase, "no templates to match against");
  if (static_cast<std::size_t>(rows_.rows()) != targets_.size()) {
    throw Error(Errc::LengthMismatch, "one target per feature row required");
  }
  for (Eigen::Index i = 0; i < rows_.rows(); ++i) {
    const double n = rows_.row(i).norm();
    if (n > 0.0) rows_.row(i) /= n;
  }
}

kernels::BestMatch TemplateRegressor::match(const Feature& fused) const {
  check_dim(fused);
  const double n = fused.norm();
  const Feature q = n > 0.0 ? Feature(fused / n) : fused;
  return exec_ == kernels::Exec::serial ? kernels::serial::best_dot(rows_, q) : kernels::parallel::best_dot(rows_, q);
}

PredictedTransform TemplateRegressor::predict(const Feature& fused) const {
  const auto m = match(fused);
  return {targets_[m.index], std::clamp(m.score, 0.0, 1.0)};
}

// ---- learned head -------------------------------------------------------------

void RegressorConfig::validate() const {
  if (layer_sizes.empty() || layer_sizes.back() != 6) throw Error(Errc::InvalidArgument, "last layer must have 6 outputs");
  for (int s : layer_sizes) {
    if (s < 1) throw Error(Errc::InvalidArgument, "layer sizes must be positive");
  }
  for (int e : decay_epochs) {
    if (e < 1) throw Error(Errc::InvalidArgument, "decay epochs must be positive");
  }
  if (epochs < 0 || batch_size < 1 || !(learning_rate > 0.0)) throw Error(Errc::InvalidArgument, "invalid training schedule");
}

namespace {

constexpr float kActivationCap = 1e6f;
constexpr char kWeightsMagic[8] = {'P', 'V', 'M', 'L', 'P', 'W', 'T', 'S'};
constexpr std::uint32_t kWeightsVersion = 1;

struct Adam {
  std::vector<Eigen::MatrixXf> mw, vw;
  std::vector<Eigen::VectorXf> mb, vb;
  long step = 0;
};

}  // namespace

MlpRegressor::MlpRegressor(std::string model_id, int input_dim, double diameter, std::vector<int> layer_sizes,
                           std::uint64_t seed)
    : Regressor(std::move(model_id)), input_dim_(input_dim), diameter_(diameter) {
  if (input_dim < 1 || !(diameter > 0.0)) throw Error(Errc::InvalidArgument, "invalid regressor shape");
  if (layer_sizes.empty() || layer_sizes.back() != 6) throw Error(Errc::InvalidArgument, "last layer must have 6 outputs");
  std::mt19937_64 rng(seed);
  int in = input_dim;
  for (int out : layer_sizes) {
    // He-uniform for ReLU layers.
    const float limit = std::sqrt(6.0f / static_cast<float>(in));
    std::uniform_real_distribution<float> u(-limit, limit);
    Eigen::MatrixXf w(out, in);
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = u(rng);
    weights_.push_back(std::move(w));
    biases_.push_back(Eigen::VectorXf::Zero(out));
    in = out;
  }
}

Eigen::VectorXf MlpRegressor::target_of(const PoseVector6& v) const {
  Eigen::VectorXf t(6);
  for (int i = 0; i < 3; ++i) {
    t(i) = static_cast<float>(v.translation(i) / diameter_);
    t(i + 3) = static_cast<float>(v.rotation(i));
  }
  return t;
}

Eigen::MatrixXf MlpRegressor::forward(const Eigen::MatrixXd& inputs) const {
  if (inputs.cols() != input_dim_) throw Error(Errc::DimensionMismatch, "input width does not match the regressor");
  Eigen::MatrixXf h = inputs.transpose().cast<float>();
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    Eigen::MatrixXf z = weights_[l] * h;
    z.colwise() += biases_[l];
    if (l + 1 < weights_.size()) z = z.cwiseMax(0.0f).cwiseMin(kActivationCap);
    h = std::move(z);
  }
  return h.transpose();
}

PredictedTransform MlpRegressor::predict(const Feature& fused) const {
  check_dim(fused);
  const Eigen::MatrixXf out = forward(fused.transpose());
  PoseVector6 v;
  for (int i = 0; i < 3; ++i) {
    const double t = std::isfinite(out(0, i)) ? out(0, i) : 0.0;
    const double r = std::isfinite(out(0, i + 3)) ? out(0, i + 3) : 0.0;
    v.translation(i) = std::clamp(t, -10.0, 10.0) * diameter_;
    v.rotation(i) = r;
  }
  // Keep the axis-angle inside the ball of radius pi so it decodes cleanly.
  const double angle = v.rotation.norm();
  if (angle > std::numbers::pi) v.rotation *= std::numbers::pi / angle;
  return {v, 1.0};
}

double MlpRegressor::mean_error(const Eigen::MatrixXd& inputs, const std::vector<PoseVector6>& targets,
                                const std::vector<bool>& mask) const {
  const Eigen::MatrixXf out = forward(inputs);
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (!mask[i]) continue;
    sum += (out.row(static_cast<Eigen::Index>(i)).transpose() - target_of(targets[i])).cast<double>().norm();
    ++n;
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

MlpRegressor MlpRegressor::train(const std::string& model_id, double diameter, const InputProvider& inputs,
                                 const std::vector<PoseVector6>& targets, const std::vector<bool>& train_mask,
                                 const RegressorConfig& cfg, TrainingReport* report) {
  cfg.validate();
  if (targets.size() != train_mask.size()) throw Error(Errc::LengthMismatch, "one split flag per target required");
  if (targets.size() < 10 * static_cast<std::size_t>(cfg.batch_size)) {
    throw Error(Errc::DatabaseTooSmall, std::to_string(targets.size()) + " records, need at least " +
                                            std::to_string(10 * cfg.batch_size));
  }

  const Eigen::MatrixXd eval_inputs = inputs(-1);
  if (static_cast<std::size_t>(eval_inputs.rows()) != targets.size()) {
    throw Error(Errc::LengthMismatch, "one input row per target required");
  }
  MlpRegressor net(model_id, static_cast<int>(eval_inputs.cols()), diameter, cfg.layer_sizes, cfg.seed);

  TrainingReport rep;
  std::vector<std::size_t> train_rows;
  std::vector<bool> train_used(targets.size(), false), validation(targets.size(), false);
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (!train_mask[i]) {
      validation[i] = true;
      ++rep.validation_records;
    } else if (targets[i].rotation.norm() > std::numbers::pi - cfg.near_pi_margin) {
      ++rep.excluded_near_pi;
    } else {
      train_rows.push_back(i);
      train_used[i] = true;
    }
  }
  rep.train_records = train_rows.size();

  Eigen::MatrixXf y(6, static_cast<Eigen::Index>(targets.size()));
  for (std::size_t i = 0; i < targets.size(); ++i) y.col(static_cast<Eigen::Index>(i)) = net.target_of(targets[i]);

  auto train_loss = [&](const Eigen::MatrixXd& x) {
    const Eigen::MatrixXf out = net.forward(x);
    double sum = 0.0;
    for (auto i : train_rows) {
      sum += (out.row(static_cast<Eigen::Index>(i)).transpose() - y.col(static_cast<Eigen::Index>(i))).squaredNorm();
    }
    return train_rows.empty() ? 0.0 : sum / (6.0 * static_cast<double>(train_rows.size()));
  };
  rep.initial_validation_error = net.mean_error(eval_inputs, targets, validation);
  rep.train_loss.push_back(train_loss(eval_inputs));

  const std::size_t layers = net.weights_.size();
  Adam adam;
  for (std::size_t l = 0; l < layers; ++l) {
    adam.mw.push_back(Eigen::MatrixXf::Zero(net.weights_[l].rows(), net.weights_[l].cols()));
    adam.vw.push_back(adam.mw.back());
    adam.mb.push_back(Eigen::VectorXf::Zero(net.biases_[l].size()));
    adam.vb.push_back(adam.mb.back());
  }
  constexpr float b1 = 0.9f, b2 = 0.999f, eps = 1e-8f;

  std::vector<Eigen::MatrixXf> z(layers), h(layers + 1);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double lr = cfg.learning_rate;
    for (int d : cfg.decay_epochs) {
      if (epoch >= d) lr *= cfg.decay_factor;
    }
    const Eigen::MatrixXd x = inputs(epoch);
    std::vector<std::size_t> order = train_rows;
    std::mt19937_64 rng(mix_seed(cfg.seed, 0x65706f6368ULL + static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), rng);

    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const auto b = static_cast<Eigen::Index>(end - start);
      h[0].resize(x.cols(), b);
      Eigen::MatrixXf yb(6, b);
      for (Eigen::Index j = 0; j < b; ++j) {
        const auto row = static_cast<Eigen::Index>(order[start + static_cast<std::size_t>(j)]);
        h[0].col(j) = x.row(row).transpose().cast<float>();
        yb.col(j) = y.col(row);
      }
      for (std::size_t l = 0; l < layers; ++l) {
        z[l] = net.weights_[l] * h[l];
        z[l].colwise() += net.biases_[l];
        h[l + 1] = l + 1 < layers ? Eigen::MatrixXf(z[l].cwiseMax(0.0f).cwiseMin(kActivationCap)) : z[l];
      }
      Eigen::MatrixXf dz = (h[layers] - yb) * (2.0f / (6.0f * static_cast<float>(b)));

      ++adam.step;
      const float c1 = 1.0f - std::pow(b1, static_cast<float>(adam.step));
      const float c2 = 1.0f - std::pow(b2, static_cast<float>(adam.step));
      for (std::size_t li = layers; li-- > 0;) {
        const Eigen::MatrixXf gw = dz * h[li].transpose();
        const Eigen::VectorXf gb = dz.rowwise().sum();
        if (li > 0) {
          Eigen::MatrixXf dh = net.weights_[li].transpose() * dz;
          dz = dh.cwiseProduct((z[li - 1].array() > 0.0f && z[li - 1].array() < kActivationCap).cast<float>().matrix());
        }
        adam.mw[li] = b1 * adam.mw[li] + (1.0f - b1) * gw;
        adam.vw[li] = b2 * adam.vw[li] + (1.0f - b2) * gw.cwiseAbs2();
        adam.mb[li] = b1 * adam.mb[li] + (1.0f - b1) * gb;
        adam.vb[li] = b2 * adam.vb[li] + (1.0f - b2) * gb.cwiseAbs2();
        const auto step = static_cast<float>(lr);
        net.weights_[li].array() -=
            step * (adam.mw[li].array() / c1) / ((adam.vw[li].array() / c2).sqrt() + eps);
        net.biases_[li].array() -= step * (adam.mb[li].array() / c1) / ((adam.vb[li].array() / c2).sqrt() + eps);
      }
    }
    rep.train_loss.push_back(train_loss(eval_inputs));
  }
  rep.final_validation_error = net.mean_error(eval_inputs, targets, validation);
  if (report) *report = std::move(rep);
  return net;
}

// ---- persistence --------------------------------------------------------------

namespace {

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw Error(Errc::ParseError, "weights file truncated");
  return v;
}

}  // namespace

void MlpRegressor::write(std::ostream& out) const {
  out.write(kWeightsMagic, sizeof kWeightsMagic);
  put<std::uint32_t>(out, kWeightsVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(model_id().size()));
  out.write(model_id().data(), static_cast<std::streamsize>(model_id().size()));
  put<double>(out, diameter_);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(input_dim_));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(weights_.size()));
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(weights_[l].rows()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(weights_[l].cols()));
    // Row-major float32.
    for (Eigen::Index i = 0; i < weights_[l].rows(); ++i)
      for (Eigen::Index j = 0; j < weights_[l].cols(); ++j) put<float>(out, weights_[l](i, j));
    for (Eigen::Index i = 0; i < biases_[l].size(); ++i) put<float>(out, biases_[l](i));
  }
  if (!out) throw Error(Errc::IoError, "failed writing weights");
}

MlpRegressor MlpRegressor::read(std::istream& in) {
  char magic[sizeof kWeightsMagic];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kWeightsMagic, sizeof magic) != 0) {
    throw Error(Errc::ParseError, "not a weights file (bad magic)");
  }
  const auto version = get<std::uint32_t>(in);
  if (version != kWeightsVersion) throw Error(Errc::ParseError, "unsupported weights version " + std::to_string(version));
  const auto id_len = get<std::uint32_t>(in);
  if (id_len > 4096) throw Error(Errc::ParseError, "implausible model id length");
  std::string id(id_len, '\0');
  if (!in.read(id.data(), id_len)) throw Error(Errc::ParseError, "weights file truncated");
  const auto diameter = get<double>(in);
  const auto input_dim = get<std::uint32_t>(in);
  const auto layers = get<std::uint32_t>(in);
  if (layers == 0 || layers > 64 || input_dim == 0) throw Error(Errc::ParseError, "implausible network shape");

  std::vector<Eigen::MatrixXf> w;
  std::vector<Eigen::VectorXf> b;
  std::vector<int> sizes;
  std::uint32_t prev = input_dim;
  for (std::uint32_t l = 0; l < layers; ++l) {
    const auto rows = get<std::uint32_t>(in);
    const auto cols = get<std::uint32_t>(in);
    if (cols != prev || rows == 0 || rows > (1u << 16)) throw Error(Errc::ParseError, "inconsistent layer shapes");
    Eigen::MatrixXf m(rows, cols);
    for (std::uint32_t i = 0; i < rows; ++i)
      for (std::uint32_t j = 0; j < cols; ++j) m(i, j) = get<float>(in);
    Eigen::VectorXf v(rows);
    for (std::uint32_t i = 0; i < rows; ++i) v(i) = get<float>(in);
    w.push_back(std::move(m));
    b.push_back(std::move(v));
    sizes.push_back(static_cast<int>(rows));
    prev = rows;
  }
  MlpRegressor net(id, static_cast<int>(input_dim), diameter, sizes, 0);
  net.weights_ = std::move(w);
  net.biases_ = std::move(b);
  return net;
}

void MlpRegressor::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot open '" + path.string() + "' for writing");
  write(out);
}

MlpRegressor MlpRegressor::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open '" + path.string() + "'");
  return read(in);
}

}  // namespace pv
