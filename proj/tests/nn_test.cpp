#include "iwl/nn.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

namespace iwl::nn {
namespace {

Matrix random_matrix(int rows, int cols, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, scale);
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = d(rng);
  return m;
}

DenseNetwork three_layer_net(std::uint64_t seed) {
  DenseNetwork net(5);
  net.dense(7).batch_norm().leaky_relu().dense(6).batch_norm().leaky_relu().dense(3);
  net.initialize(seed);
  // Move batch-norm parameters off their identity initialisation so their
  // gradients are exercised in a non-trivial regime.
  std::mt19937_64 rng(seed + 1);
  std::uniform_real_distribution<double> u(0.5, 1.5);
  for (auto& layer : net.mutable_layers()) {
    if (auto* bn = std::get_if<BatchNormLayer>(&layer)) {
      for (int i = 0; i < bn->dim; ++i) {
        bn->gamma(i) = u(rng);
        bn->beta(i) = u(rng) - 1.0;
      }
    }
  }
  net.mark_modified();
  return net;
}

// Weighted reconstruction-style objective: (1/N) sum_i w_i ||y_i - t_i||^2.
double objective(DenseNetwork& net, const Matrix& x, const Matrix& target, const std::vector<double>& w) {
  const Matrix y = forward(net, x, Mode::kTrain).output;
  double total = 0.0;
  for (int i = 0; i < y.rows(); ++i) total += w[i] * (y.row(i) - target.row(i)).squaredNorm();
  return total / static_cast<double>(y.rows());
}

Matrix objective_gradient(const Matrix& y, const Matrix& target, const std::vector<double>& w) {
  Matrix g = y - target;
  for (int i = 0; i < g.rows(); ++i) g.row(i) *= 2.0 * w[i] / static_cast<double>(g.rows());
  return g;
}

double max_relative_error(DenseNetwork& net, const Matrix& x, const Matrix& target,
                          const std::vector<double>& w) {
  auto fwd = forward(net, x, Mode::kTrain);
  const Gradients analytic = backward(net, fwd.tape, objective_gradient(fwd.output, target, w));
  const double h = 1e-5;
  // Central differences carry roughly eps * |L| / h of cancellation noise, which
  // dominates for gradients that are exactly zero (dense biases feeding batch norm).
  const double floor = 1e-6 * std::max(1.0, std::abs(objective(net, x, target, w)));
  double worst = 0.0;
  auto params = net.parameters();
  EXPECT_EQ(params.size(), analytic.size());
  for (std::size_t p = 0; p < params.size(); ++p) {
    for (std::size_t k = 0; k < params[p].size(); ++k) {
      const double saved = params[p][k];
      params[p][k] = saved + h;
      const double up = objective(net, x, target, w);
      params[p][k] = saved - h;
      const double down = objective(net, x, target, w);
      params[p][k] = saved;
      const double numeric = (up - down) / (2 * h);
      const double a = analytic[p](static_cast<Eigen::Index>(k));
      const double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
      worst = std::max(worst, err);
    }
  }
  return worst;
}

TEST(DenseNetwork, BuilderChainsDimensions) {
  DenseNetwork net(4);
  net.dense(3).batch_norm().leaky_relu().dense(2, false);
  EXPECT_EQ(net.output_dim(), 2);
  EXPECT_EQ(net.layers().size(), 4u);
  EXPECT_EQ(net.parameter_count(), 4u * 3 + 3 + 3 + 3 + 3 * 2);
  EXPECT_TRUE(net.has_bias_parameters());
  EXPECT_THROW(net.append(DenseLayer{.in = 5, .out = 2}), std::invalid_argument);
}

TEST(DenseNetwork, BiasFreeNetworkHasNoBiasParameters) {
  DenseNetwork net(4);
  net.dense(3, false).batch_norm(false).leaky_relu().dense(2, false);
  net.initialize(1);
  EXPECT_FALSE(net.has_bias_parameters());
  EXPECT_EQ(net.parameter_count(), 4u * 3 + 3 * 2);
}

TEST(DenseNetwork, InitializationIsSeededAndBounded) {
  DenseNetwork a(16), b(16), c(16);
  for (auto* n : {&a, &b, &c}) n->dense(8);
  a.initialize(5);
  b.initialize(5);
  c.initialize(6);
  const auto& wa = std::get<DenseLayer>(a.layers()[0]).weight;
  EXPECT_EQ(wa, std::get<DenseLayer>(b.layers()[0]).weight);
  EXPECT_NE(wa, std::get<DenseLayer>(c.layers()[0]).weight);
  EXPECT_LE(wa.cwiseAbs().maxCoeff(), 0.25);
}

TEST(Forward, IdentityDenseLayer) {
  DenseNetwork net(3);
  net.dense(3);
  net.initialize(0);
  auto& layer = std::get<DenseLayer>(net.mutable_layers()[0]);
  layer.weight.setIdentity();
  layer.b.setZero();
  const Matrix x = random_matrix(4, 3, 2);
  EXPECT_EQ(predict(net, x), x);
}

TEST(Forward, LeakyRelu) {
  DenseNetwork net(1);
  net.leaky_relu();
  Matrix x(2, 1);
  x << -2.0, 3.0;
  const Matrix y = predict(net, x);
  EXPECT_DOUBLE_EQ(y(0, 0), -0.02);
  EXPECT_DOUBLE_EQ(y(1, 0), 3.0);
}

TEST(Forward, EvalModeRowsAreIndependent) {
  DenseNetwork net = three_layer_net(3);
  const Matrix x = random_matrix(10, 5, 4);
  forward(net, x, Mode::kTrain);  // populate running statistics
  const Matrix full = predict(net, x);
  for (int i = 0; i < x.rows(); ++i) {
    const Matrix single = predict(net, x.row(i));
    EXPECT_LE((single - full.row(i)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Forward, TrainModeBatchNormMoments) {
  DenseNetwork net(6);
  net.dense(4).batch_norm();
  net.initialize(11);
  const Matrix y = forward(net, random_matrix(200, 6, 12, 3.0), Mode::kTrain).output;
  for (int j = 0; j < y.cols(); ++j) {
    const double mu = y.col(j).mean();
    const double var = (y.col(j).array() - mu).square().mean();
    EXPECT_NEAR(mu, 0.0, 1e-10);
    EXPECT_NEAR(var, 1.0, 1e-3);
  }
}

TEST(Forward, RunningStatisticsFollowMomentum) {
  DenseNetwork net(2);
  net.batch_norm();
  Matrix x(4, 2);
  x << 1, 10, 2, 20, 3, 30, 4, 40;
  forward(net, x, Mode::kTrain);
  const auto& bn = std::get<BatchNormLayer>(net.layers()[0]);
  EXPECT_NEAR(bn.running_mean(0), 0.1 * 2.5, 1e-12);
  EXPECT_NEAR(bn.running_mean(1), 0.1 * 25.0, 1e-12);
  // Unbiased batch variance of {1,2,3,4} is 5/3.
  EXPECT_NEAR(bn.running_var(0), 0.9 + 0.1 * 5.0 / 3.0, 1e-12);
}

TEST(Forward, TrainModeNeedsTwoRows) {
  DenseNetwork net = three_layer_net(1);
  EXPECT_THROW(forward(net, random_matrix(1, 5, 1), Mode::kTrain), std::invalid_argument);
  EXPECT_NO_THROW(predict(net, random_matrix(1, 5, 1)));
}

TEST(Forward, RejectsWrongWidth) {
  DenseNetwork net = three_layer_net(1);
  EXPECT_THROW(predict(net, random_matrix(3, 4, 1)), std::invalid_argument);
}

TEST(Backward, FiniteDifferenceUnitWeights) {
  DenseNetwork net = three_layer_net(21);
  const Matrix x = random_matrix(12, 5, 22);
  const Matrix target = random_matrix(12, 3, 23);
  EXPECT_LT(max_relative_error(net, x, target, std::vector<double>(12, 1.0)), 1e-4);
}

TEST(Backward, FiniteDifferenceRandomWeights) {
  DenseNetwork net = three_layer_net(31);
  const Matrix x = random_matrix(12, 5, 32);
  const Matrix target = random_matrix(12, 3, 33);
  std::mt19937_64 rng(34);
  std::uniform_real_distribution<double> u(0.0, 20.0);
  std::vector<double> w(12);
  for (auto& v : w) v = u(rng);
  EXPECT_LT(max_relative_error(net, x, target, w), 1e-4);
}

TEST(Backward, InputGradientMatchesFiniteDifference) {
  DenseNetwork net = three_layer_net(41);
  Matrix x = random_matrix(8, 5, 42);
  const Matrix target = random_matrix(8, 3, 43);
  const std::vector<double> w(8, 1.0);
  auto fwd = forward(net, x, Mode::kTrain);
  Matrix dx;
  backward(net, fwd.tape, objective_gradient(fwd.output, target, w), &dx);
  ASSERT_EQ(dx.rows(), x.rows());
  const double h = 1e-5;
  for (int i = 0; i < x.rows(); ++i) {
    for (int j = 0; j < x.cols(); ++j) {
      const double saved = x(i, j);
      x(i, j) = saved + h;
      const double up = objective(net, x, target, w);
      x(i, j) = saved - h;
      const double down = objective(net, x, target, w);
      x(i, j) = saved;
      const double numeric = (up - down) / (2 * h);
      EXPECT_LE(std::abs(dx(i, j) - numeric), 1e-4 * std::max(1e-3, std::abs(numeric)));
    }
  }
}

TEST(Backward, ZeroWeightsGiveZeroGradient) {
  DenseNetwork net = three_layer_net(51);
  const Matrix x = random_matrix(9, 5, 52);
  auto fwd = forward(net, x, Mode::kTrain);
  const auto grads = backward(net, fwd.tape, objective_gradient(fwd.output, random_matrix(9, 3, 53), std::vector<double>(9, 0.0)));
  for (const auto& g : grads) EXPECT_EQ(g.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Backward, GradientIsLinearInPerSampleWeights) {
  DenseNetwork net = three_layer_net(61);
  const Matrix x = random_matrix(6, 5, 62);
  const Matrix target = random_matrix(6, 3, 63);
  std::vector<double> w{0.5, 3.0, 1.0, 0.0, 7.0, 2.0};
  auto fwd = forward(net, x, Mode::kTrain);
  const auto total = backward(net, fwd.tape, objective_gradient(fwd.output, target, w));
  Gradients sum;
  for (std::size_t i = 0; i < w.size(); ++i) {
    std::vector<double> one(w.size(), 0.0);
    one[i] = w[i];
    const auto g = backward(net, fwd.tape, objective_gradient(fwd.output, target, one));
    if (sum.empty()) sum = g;
    else for (std::size_t p = 0; p < g.size(); ++p) sum[p] += g[p];
  }
  for (std::size_t p = 0; p < total.size(); ++p) {
    EXPECT_LE((total[p] - sum[p]).cwiseAbs().maxCoeff(), 1e-10 * (1 + total[p].cwiseAbs().maxCoeff()));
  }
}

TEST(Backward, StaleTapeIsRejected) {
  DenseNetwork net = three_layer_net(71);
  const Matrix x = random_matrix(5, 5, 72);
  auto fwd = forward(net, x, Mode::kTrain);
  auto adam = AdamState::for_network(net, 0.1, 0.0);
  adam_step(net, adam, backward(net, fwd.tape, Matrix::Ones(5, 3)));
  EXPECT_THROW(backward(net, fwd.tape, Matrix::Ones(5, 3)), std::logic_error);
}

TEST(Backward, EvalTapeIsRejected) {
  DenseNetwork net = three_layer_net(73);
  auto fwd = forward(net, random_matrix(5, 5, 74), Mode::kEval);
  EXPECT_THROW(backward(net, fwd.tape, Matrix::Ones(5, 3)), std::logic_error);
}

DenseNetwork scalar_net(double theta) {
  DenseNetwork net(1);
  net.dense(1, false);
  std::get<DenseLayer>(net.mutable_layers()[0]).weight(0, 0) = theta;
  return net;
}

TEST(Adam, FirstStepClosedForm) {
  DenseNetwork net = scalar_net(1.0);
  auto state = AdamState::for_network(net, 0.1, 0.0);
  Gradients g{Vector::Ones(1)};
  adam_step(net, state, g);
  // Bias-corrected moments are both exactly g on step one.
  const double expected = 1.0 - 0.1 * 1.0 / (1.0 + 1e-8);
  EXPECT_NEAR(std::get<DenseLayer>(net.layers()[0]).weight(0, 0), expected, 1e-12);
  EXPECT_EQ(state.step, 1);
}

TEST(Adam, ZeroGradientIsFixedPointWithoutDecay) {
  DenseNetwork net = scalar_net(0.7);
  auto state = AdamState::for_network(net, 0.1, 0.0);
  for (int i = 0; i < 10; ++i) adam_step(net, state, Gradients{Vector::Zero(1)});
  EXPECT_EQ(std::get<DenseLayer>(net.layers()[0]).weight(0, 0), 0.7);
}

TEST(Adam, WeightDecayShrinksTowardZero) {
  DenseNetwork net = scalar_net(2.0);
  auto state = AdamState::for_network(net, 0.01, 0.5);
  double previous = 2.0;
  for (int i = 0; i < 20; ++i) {
    adam_step(net, state, Gradients{Vector::Zero(1)});
    const double now = std::get<DenseLayer>(net.layers()[0]).weight(0, 0);
    EXPECT_LT(std::abs(now), std::abs(previous));
    previous = now;
  }
}

TEST(Adam, MismatchedGradientsThrow) {
  DenseNetwork net = scalar_net(1.0);
  auto state = AdamState::for_network(net, 0.1, 0.0);
  EXPECT_THROW(adam_step(net, state, Gradients{}), std::invalid_argument);
  EXPECT_THROW(adam_step(net, state, Gradients{Vector::Zero(2)}), std::invalid_argument);
}

TEST(Checkpoint, RoundTripPreservesOutputs) {
  DenseNetwork net = three_layer_net(81);
  const Matrix x = random_matrix(16, 5, 82);
  forward(net, x, Mode::kTrain);
  const auto doc = to_json(net);
  EXPECT_EQ(doc.at("version").get<int>(), kCheckpointVersion);
  const DenseNetwork copy = network_from_json(nlohmann::json::parse(doc.dump()));
  EXPECT_EQ(predict(copy, x), predict(net, x));
  EXPECT_EQ(copy.parameter_count(), net.parameter_count());
}

TEST(Checkpoint, RejectsForeignDocuments) {
  EXPECT_THROW(network_from_json(nlohmann::json{{"format", "other"}}), std::runtime_error);
  auto doc = to_json(three_layer_net(1));
  doc["version"] = kCheckpointVersion + 1;
  EXPECT_THROW(network_from_json(doc), std::runtime_error);
}

}  // namespace
}  // namespace iwl::nn
