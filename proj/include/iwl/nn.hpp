#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

namespace iwl::nn {

// Rows are samples, columns are features.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Mode { kTrain, kEval };

inline constexpr double kDefaultLeakySlope = 0.01;
inline constexpr double kBatchNormMomentum = 0.9;
inline constexpr double kBatchNormEps = 1e-5;

// y = x W + b, W stored as (in x out).
struct DenseLayer {
  int in = 0;
  int out = 0;
  bool bias = true;
  Matrix weight;
  Vector b;  // empty when bias == false
};

// Affine-free batch norm has no parameters at all (used by bias-free hosts).
struct BatchNormLayer {
  int dim = 0;
  bool affine = true;
  double momentum = kBatchNormMomentum;
  double eps = kBatchNormEps;
  Vector gamma;
  Vector beta;
  Vector running_mean;
  Vector running_var;
};

struct LeakyReluLayer {
  int dim = 0;
  double slope = kDefaultLeakySlope;
};

using Layer = std::variant<DenseLayer, BatchNormLayer, LeakyReluLayer>;

class DenseNetwork {
 public:
  DenseNetwork() = default;
  explicit DenseNetwork(int input_dim) : input_dim_(input_dim) {}

  DenseNetwork& dense(int out, bool bias = true);
  DenseNetwork& batch_norm(bool affine = true);
  DenseNetwork& leaky_relu(double slope = kDefaultLeakySlope);

  // Appends a layer after checking that it chains onto the current output.
  void append(Layer layer);

  // Dense weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases 0,
  // batch norm scale 1 / shift 0 / running stats (0, 1).
  void initialize(std::uint64_t seed);

  int input_dim() const { return input_dim_; }
  int output_dim() const;
  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& mutable_layers() { return layers_; }

  // Trainable arrays in a fixed order: per layer, dense weight then bias,
  // batch norm gamma then beta.
  std::vector<std::span<double>> parameters();
  std::vector<std::span<const double>> parameters() const;
  std::size_t parameter_count() const;
  bool has_bias_parameters() const;

  // Bumped whenever parameters change; tapes record it to detect staleness.
  std::uint64_t revision() const { return revision_; }
  void mark_modified() { ++revision_; }

 private:
  int input_dim_ = 0;
  std::vector<Layer> layers_;
  std::uint64_t revision_ = 0;
};

// Intermediates of one forward pass, consumed by backward.
struct Tape {
  const DenseNetwork* network = nullptr;
  std::uint64_t revision = 0;
  Mode mode = Mode::kEval;
  std::vector<Matrix> inputs;     // input to each layer
  std::vector<Matrix> normalized; // x_hat for batch-norm layers, empty otherwise
  std::vector<Vector> inv_std;    // 1/sqrt(var + eps) for batch-norm layers
};

struct ForwardResult {
  Matrix output;
  Tape tape;
};

// Train mode uses batch statistics and updates the running statistics.
ForwardResult forward(DenseNetwork& net, const Matrix& batch, Mode mode);
// Eval-mode pass without a tape; leaves the network untouched.
Matrix predict(const DenseNetwork& net, const Matrix& batch);

// Gradients aligned with DenseNetwork::parameters().
using Gradients = std::vector<Vector>;

Gradients backward(const DenseNetwork& net, const Tape& tape, const Matrix& output_gradient);
// Also returns the gradient with respect to the network input.
Gradients backward(const DenseNetwork& net, const Tape& tape, const Matrix& output_gradient,
                   Matrix* input_gradient);

struct AdamState {
  double learning_rate = 1e-4;
  double weight_decay = 1e-6;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t step = 0;
  std::vector<Vector> first_moment;
  std::vector<Vector> second_moment;

  static AdamState for_network(const DenseNetwork& net, double learning_rate,
                               double weight_decay);
};

// Weight decay enters as g + wd * theta before the moment updates.
void adam_step(DenseNetwork& net, AdamState& state, const Gradients& gradients);

// Versioned JSON checkpoint: layer descriptors, parameters, running stats.
inline constexpr int kCheckpointVersion = 1;
nlohmann::json to_json(const DenseNetwork& net);
DenseNetwork network_from_json(const nlohmann::json& doc);

}  // namespace iwl::nn
