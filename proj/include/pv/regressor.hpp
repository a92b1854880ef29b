#pragma once

#include "pv/features.hpp"
#include "pv/geometry.hpp"
#include "pv/kernels.hpp"

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace pv {

struct PredictedTransform {
  PoseVector6 vector;       // LPCF -> OCF
  double confidence = 1.0;  // similarity for templates, 1 for the learned head
};

class Regressor {
 public:
  explicit Regressor(std::string model_id) : model_id_(std::move(model_id)) {}
  virtual ~Regressor() = default;

  virtual PredictedTransform predict(const Feature& fused) const = 0;
  virtual int input_dim() const = 0;

  /// Checks the model id first; throws Errc::UnknownModel on mismatch.
  PredictedTransform predict(const Feature& fused, const std::string& model_id) const;
  const std::string& model_id() const { return model_id_; }

 protected:
  void check_dim(const Feature& fused) const;

 private:
  std::string model_id_;
};

/// Nearest stored feature by cosine similarity; ties go to the lowest record.
class TemplateRegressor final : public Regressor {
 public:
  TemplateRegressor(std::string model_id, Eigen::MatrixXd features, std::vector<PoseVector6> targets,
                    kernels::Exec exec = kernels::Exec::parallel);

  PredictedTransform predict(const Feature& fused) const override;
  using Regressor::predict;
  int input_dim() const override { return static_cast<int>(rows_.cols()); }

  kernels::BestMatch match(const Feature& fused) const;
  std::size_t size() const { return targets_.size(); }

 private:
  kernels::RowMatrix rows_;  // unit-norm rows
  std::vector<PoseVector6> targets_;
  kernels::Exec exec_;
};

struct RegressorConfig {
  int epochs = 600;
  int batch_size = 32;
  double learning_rate = 1e-3;
  std::vector<int> decay_epochs{80, 120};
  double decay_factor = 0.1;
  std::vector<int> layer_sizes{1024, 512, 256, 6};
  std::uint64_t seed = 0;
  /// Records whose target rotation angle exceeds pi - margin are not trained on.
  double near_pi_margin = 0.1;

  /// Layer sizes must end in 6; decay epochs must be positive.
  void validate() const;
};

struct TrainingReport {
  std::vector<double> train_loss;  // [0] before training, then after each epoch
  double initial_validation_error = 0.0;
  double final_validation_error = 0.0;
  std::size_t train_records = 0;
  std::size_t validation_records = 0;
  std::size_t excluded_near_pi = 0;
};

/// Training inputs per epoch; epoch -1 asks for the evaluation inputs.
using InputProvider = std::function<Eigen::MatrixXd(int epoch)>;

/**
 * @brief Fully connected head: ReLU between layers, linear output of 6 values.
 *
 * Targets are (t / D, axis-angle). Float32 weights, Adam, MSE loss.
 */
class MlpRegressor final : public Regressor {
 public:
  MlpRegressor(std::string model_id, int input_dim, double diameter, std::vector<int> layer_sizes, std::uint64_t seed);

  /// Trains on rows flagged in `train_mask` (inputs are one row per record).
  /// Throws Errc::DatabaseTooSmall below 10 * batch_size records.
  static MlpRegressor train(const std::string& model_id, double diameter, const InputProvider& inputs,
                            const std::vector<PoseVector6>& targets, const std::vector<bool>& train_mask,
                            const RegressorConfig& cfg, TrainingReport* report = nullptr);

  PredictedTransform predict(const Feature& fused) const override;
  using Regressor::predict;
  int input_dim() const override { return input_dim_; }

  /// Raw 6 outputs in target units for a batch (one row per sample).
  Eigen::MatrixXf forward(const Eigen::MatrixXd& inputs) const;

  /// Mean Euclidean error in target units over the flagged rows.
  double mean_error(const Eigen::MatrixXd& inputs, const std::vector<PoseVector6>& targets,
                    const std::vector<bool>& mask) const;

  double diameter() const { return diameter_; }
  const std::vector<Eigen::MatrixXf>& weights() const { return weights_; }
  const std::vector<Eigen::VectorXf>& biases() const { return biases_; }

  void write(std::ostream& out) const;
  static MlpRegressor read(std::istream& in);
  void save(const std::filesystem::path& path) const;
  static MlpRegressor load(const std::filesystem::path& path);

 private:
  Eigen::VectorXf target_of(const PoseVector6& v) const;

  int input_dim_;
  double diameter_;
  std::vector<Eigen::MatrixXf> weights_;  // out x in
  std::vector<Eigen::VectorXf> biases_;
};

}  // namespace pv
