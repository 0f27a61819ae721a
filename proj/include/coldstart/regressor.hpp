#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "coldstart/core.hpp"

namespace coldstart {

enum class BatchNormPlacement { after_activation, before_activation };

struct RegressorSpec {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden{400, 300, 200};
  std::size_t output_dim = 0;
  bool batch_norm = true;
  BatchNormPlacement placement = BatchNormPlacement::after_activation;
  double bn_epsilon = 1e-5;

  void validate() const;
  friend bool operator==(const RegressorSpec&, const RegressorSpec&) = default;
};

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;
};

struct BatchNormLayer {
  Eigen::VectorXd gamma;
  Eigen::VectorXd beta;
  Eigen::VectorXd running_mean;
  Eigen::VectorXd running_var;
};

// Feed-forward net: per hidden layer affine -> ReLU -> batch norm (or
// affine -> batch norm -> ReLU), then a linear output layer.
struct RegressorModel {
  RegressorSpec spec;
  std::vector<DenseLayer> layers;     // hidden.size() + 1
  std::vector<BatchNormLayer> norms;  // hidden.size() when batch_norm
  std::uint64_t seed = 0;
  int epochs_trained = 0;
  bool trained = false;
  std::uint32_t channel_spec_version = 0;
  std::map<std::string, double> metrics;

  std::size_t parameter_count() const;
  // Rounds every parameter and statistic to float32 precision, so that the
  // in-memory model equals its serialized form.
  void round_to_float();
};

// Fan-in scaled uniform weights (He bound sqrt(6 / fan_in)), zero biases,
// unit scale and zero shift. Deterministic given the seed.
RegressorModel init_model(const RegressorSpec& spec, std::uint64_t seed);

enum class Mode { train, infer };

// Rows of `x` are samples. Train mode normalizes with batch statistics
// (running statistics for a batch of one) and never mutates the model.
Eigen::MatrixXd forward(const RegressorModel& model, const Eigen::MatrixXd& x, Mode mode);
// Single-sample inference; identical arithmetic for every caller.
Vector predict_one(const RegressorModel& model, std::span<const float> x);

struct Gradients {
  std::vector<DenseLayer> layers;
  std::vector<BatchNormLayer> norms;  // gamma and beta only
};

// Mean squared error over all batch x output entries, in train mode, and
// its gradient with respect to every trainable parameter.
double loss_and_gradients(const RegressorModel& model, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                          Gradients* grads);

double mean_squared_error(const RegressorModel& model, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                          Mode mode);

struct TrainConfig {
  double learning_rate = 1e-4;
  std::size_t batch_size = 512;
  int epochs = 100;
  double momentum = 0.0;
  std::uint64_t seed = 0;
  double bn_momentum = 0.9;  // running = m * running + (1 - m) * batch
};

struct EpochLoss {
  int epoch = 0;
  double train_mse = 0.0;  // mean of mini-batch losses
  std::optional<double> val_mse;
};

struct TrainResult {
  RegressorModel model;
  std::vector<EpochLoss> history;
};

// Mini-batch SGD on the MSE. Samples are reshuffled each epoch from the
// seed; the last short batch is kept. Throws NumericalError on a non-finite
// loss.
TrainResult train(RegressorModel model, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const TrainConfig& cfg,
                  const Eigen::MatrixXd* val_x = nullptr, const Eigen::MatrixXd* val_y = nullptr);

// Infer-mode forward pass per user. Throws UsageError for untrained models.
EmbeddingTable predict_cold_embeddings(const RegressorModel& model, const EmbeddingTable& features);

// Container: text header terminated by "end\n", then little-endian float32
// blocks (per layer W row-major, b; per norm gamma, beta, mean, var).
void save_model(const std::filesystem::path& path, const RegressorModel& model);
RegressorModel load_model(const std::filesystem::path& path);
std::string serialize_model(const RegressorModel& model);
RegressorModel deserialize_model(const std::string& bytes);

// Rows of the table as a dense matrix, in table order.
Eigen::MatrixXd to_matrix(const EmbeddingTable& table);

std::string loss_curve_csv(const std::vector<EpochLoss>& history);

}  // namespace coldstart
