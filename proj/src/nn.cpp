#include "iwl/nn.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace iwl::nn {
namespace {

template <class... Fs>
struct Overloaded : Fs... {
  using Fs::operator()...;
};
template <class... Fs>
Overloaded(Fs...) -> Overloaded<Fs...>;

int layer_output_dim(const Layer& layer) {
  return std::visit(Overloaded{[](const DenseLayer& l) { return l.out; },
                               [](const BatchNormLayer& l) { return l.dim; },
                               [](const LeakyReluLayer& l) { return l.dim; }},
                    layer);
}

int layer_input_dim(const Layer& layer) {
  return std::visit(Overloaded{[](const DenseLayer& l) { return l.in; },
                               [](const BatchNormLayer& l) { return l.dim; },
                               [](const LeakyReluLayer& l) { return l.dim; }},
                    layer);
}

std::span<double> view(Matrix& m) { return {m.data(), static_cast<std::size_t>(m.size())}; }
std::span<double> view(Vector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

Matrix leaky(const Matrix& x, double slope) {
  return x.unaryExpr([slope](double v) { return v > 0.0 ? v : slope * v; });
}

Matrix batch_norm_eval(const BatchNormLayer& l, const Matrix& x) {
  Vector inv_std = (l.running_var.array() + l.eps).rsqrt();
  Matrix y = (x.rowwise() - l.running_mean.transpose()).array().rowwise() *
             inv_std.transpose().array();
  if (l.affine) {
    y = (y.array().rowwise() * l.gamma.transpose().array()).rowwise() +
        l.beta.transpose().array();
  }
  return y;
}

std::vector<double> to_vector(const Eigen::Ref<const Vector>& v) {
  return {v.data(), v.data() + v.size()};
}

Vector from_vector(const nlohmann::json& j, Eigen::Index expected, const char* name) {
  const auto values = j.get<std::vector<double>>();
  if (static_cast<Eigen::Index>(values.size()) != expected) {
    throw std::runtime_error(std::string("checkpoint: wrong length for ") + name);
  }
  return Eigen::Map<const Vector>(values.data(), expected);
}

}  // namespace

DenseNetwork& DenseNetwork::dense(int out, bool bias) {
  DenseLayer l;
  l.in = output_dim();
  l.out = out;
  l.bias = bias;
  l.weight = Matrix::Zero(l.in, out);
  if (bias) l.b = Vector::Zero(out);
  append(std::move(l));
  return *this;
}

DenseNetwork& DenseNetwork::batch_norm(bool affine) {
  BatchNormLayer l;
  l.dim = output_dim();
  l.affine = affine;
  if (affine) {
    l.gamma = Vector::Ones(l.dim);
    l.beta = Vector::Zero(l.dim);
  }
  l.running_mean = Vector::Zero(l.dim);
  l.running_var = Vector::Ones(l.dim);
  append(std::move(l));
  return *this;
}

DenseNetwork& DenseNetwork::leaky_relu(double slope) {
  append(LeakyReluLayer{output_dim(), slope});
  return *this;
}

void DenseNetwork::append(Layer layer) {
  if (layer_input_dim(layer) != output_dim()) {
    throw std::invalid_argument("layer input dimension does not chain onto the network");
  }
  if (layer_output_dim(layer) <= 0) throw std::invalid_argument("layer dimension must be positive");
  layers_.push_back(std::move(layer));
  mark_modified();
}

int DenseNetwork::output_dim() const {
  return layers_.empty() ? input_dim_ : layer_output_dim(layers_.back());
}

void DenseNetwork::initialize(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (auto& layer : layers_) {
    std::visit(Overloaded{
                   [&](DenseLayer& l) {
                     const double bound = 1.0 / std::sqrt(static_cast<double>(l.in));
                     std::uniform_real_distribution<double> dist(-bound, bound);
                     for (Eigen::Index c = 0; c < l.weight.cols(); ++c) {
                       for (Eigen::Index r = 0; r < l.weight.rows(); ++r) l.weight(r, c) = dist(rng);
                     }
                     if (l.bias) l.b.setZero();
                   },
                   [](BatchNormLayer& l) {
                     if (l.affine) {
                       l.gamma.setOnes();
                       l.beta.setZero();
                     }
                     l.running_mean.setZero();
                     l.running_var.setOnes();
                   },
                   [](LeakyReluLayer&) {}},
               layer);
  }
  mark_modified();
}

std::vector<std::span<double>> DenseNetwork::parameters() {
  std::vector<std::span<double>> out;
  for (auto& layer : layers_) {
    std::visit(Overloaded{[&](DenseLayer& l) {
                            out.push_back(view(l.weight));
                            if (l.bias) out.push_back(view(l.b));
                          },
                          [&](BatchNormLayer& l) {
                            if (l.affine) {
                              out.push_back(view(l.gamma));
                              out.push_back(view(l.beta));
                            }
                          },
                          [](LeakyReluLayer&) {}},
               layer);
  }
  return out;
}

std::vector<std::span<const double>> DenseNetwork::parameters() const {
  auto mutable_views = const_cast<DenseNetwork*>(this)->parameters();
  return {mutable_views.begin(), mutable_views.end()};
}

std::size_t DenseNetwork::parameter_count() const {
  std::size_t total = 0;
  for (auto p : parameters()) total += p.size();
  return total;
}

bool DenseNetwork::has_bias_parameters() const {
  for (const auto& layer : layers_) {
    if (const auto* d = std::get_if<DenseLayer>(&layer); d && (d->bias || d->b.size() > 0)) {
      return true;
    }
    if (const auto* bn = std::get_if<BatchNormLayer>(&layer); bn && bn->affine) return true;
  }
  return false;
}

ForwardResult forward(DenseNetwork& net, const Matrix& batch, Mode mode) {
  if (batch.cols() != net.input_dim()) {
    throw std::invalid_argument("batch width " + std::to_string(batch.cols()) +
                                " does not match network input " +
                                std::to_string(net.input_dim()));
  }
  if (batch.rows() < 1) throw std::invalid_argument("empty batch");

  ForwardResult result;
  Tape& tape = result.tape;
  tape.network = &net;
  tape.revision = net.revision();
  tape.mode = mode;
  const std::size_t n_layers = net.layers().size();
  tape.inputs.reserve(n_layers);
  tape.normalized.resize(n_layers);
  tape.inv_std.resize(n_layers);

  Matrix x = batch;
  for (std::size_t i = 0; i < n_layers; ++i) {
    tape.inputs.push_back(x);
    auto& layer = net.mutable_layers()[i];
    std::visit(Overloaded{
                   [&](const DenseLayer& l) {
                     Matrix y = x * l.weight;
                     if (l.bias) y.rowwise() += l.b.transpose();
                     x = std::move(y);
                   },
                   [&](BatchNormLayer& l) {
                     if (mode == Mode::kEval) {
                       x = batch_norm_eval(l, x);
                       return;
                     }
                     const Eigen::Index n = x.rows();
                     if (n < 2) throw std::invalid_argument("batch too small for batch statistics");
                     const Vector mu = x.colwise().mean().transpose();
                     const Matrix centered = x.rowwise() - mu.transpose();
                     const Vector var =
                         centered.array().square().colwise().sum().transpose() / static_cast<double>(n);
                     Vector inv_std = (var.array() + l.eps).rsqrt();
                     Matrix x_hat = centered.array().rowwise() * inv_std.transpose().array();

                     const double unbiased = static_cast<double>(n) / static_cast<double>(n - 1);
                     l.running_mean = l.momentum * l.running_mean + (1.0 - l.momentum) * mu;
                     l.running_var = l.momentum * l.running_var + (1.0 - l.momentum) * unbiased * var;

                     if (l.affine) {
                       x = (x_hat.array().rowwise() * l.gamma.transpose().array()).rowwise() +
                           l.beta.transpose().array();
                     } else {
                       x = x_hat;
                     }
                     tape.normalized[i] = std::move(x_hat);
                     tape.inv_std[i] = std::move(inv_std);
                   },
                   [&](const LeakyReluLayer& l) { x = leaky(x, l.slope); }},
               layer);
  }
  result.output = std::move(x);
  return result;
}

Matrix predict(const DenseNetwork& net, const Matrix& batch) {
  if (batch.cols() != net.input_dim()) {
    throw std::invalid_argument("batch width does not match network input");
  }
  Matrix x = batch;
  for (const auto& layer : net.layers()) {
    std::visit(Overloaded{[&](const DenseLayer& l) {
                            Matrix y = x * l.weight;
                            if (l.bias) y.rowwise() += l.b.transpose();
                            x = std::move(y);
                          },
                          [&](const BatchNormLayer& l) { x = batch_norm_eval(l, x); },
                          [&](const LeakyReluLayer& l) { x = leaky(x, l.slope); }},
               layer);
  }
  return x;
}

Gradients backward(const DenseNetwork& net, const Tape& tape, const Matrix& output_gradient) {
  return backward(net, tape, output_gradient, nullptr);
}

Gradients backward(const DenseNetwork& net, const Tape& tape, const Matrix& output_gradient,
                   Matrix* input_gradient) {
  if (tape.network != &net || tape.revision != net.revision() ||
      tape.inputs.size() != net.layers().size()) {
    throw std::logic_error("stale or mismatched tape");
  }
  if (tape.mode != Mode::kTrain) throw std::logic_error("backward requires a train-mode tape");
  const Eigen::Index n = tape.inputs.empty() ? output_gradient.rows() : tape.inputs.front().rows();
  if (output_gradient.rows() != n || output_gradient.cols() != net.output_dim()) {
    throw std::invalid_argument("output gradient shape mismatch");
  }

  // Collect per-layer gradients back to front, then emit in parameter order.
  std::vector<std::vector<Vector>> per_layer(net.layers().size());
  Matrix grad = output_gradient;
  for (std::size_t idx = net.layers().size(); idx-- > 0;) {
    const Matrix& x = tape.inputs[idx];
    std::visit(Overloaded{
                   [&](const DenseLayer& l) {
                     Matrix dw = x.transpose() * grad;
                     per_layer[idx].push_back(Eigen::Map<const Vector>(dw.data(), dw.size()));
                     if (l.bias) per_layer[idx].push_back(grad.colwise().sum().transpose());
                     grad = grad * l.weight.transpose();
                   },
                   [&](const BatchNormLayer& l) {
                     const Matrix& x_hat = tape.normalized[idx];
                     const Vector& inv_std = tape.inv_std[idx];
                     Matrix dx_hat = grad;
                     if (l.affine) {
                       per_layer[idx].push_back(
                           (grad.array() * x_hat.array()).colwise().sum().transpose());
                       per_layer[idx].push_back(grad.colwise().sum().transpose());
                       dx_hat = grad.array().rowwise() * l.gamma.transpose().array();
                     }
                     const double nn = static_cast<double>(grad.rows());
                     const Eigen::RowVectorXd sum_dx_hat = dx_hat.colwise().sum();
                     const Eigen::RowVectorXd sum_dx_hat_xhat =
                         (dx_hat.array() * x_hat.array()).colwise().sum();
                     Matrix centered = (dx_hat * nn).rowwise() - sum_dx_hat;
                     centered -= (x_hat.array().rowwise() * sum_dx_hat_xhat.array()).matrix();
                     grad = (centered.array().rowwise() * (inv_std.transpose().array() / nn)).matrix();
                   },
                   [&](const LeakyReluLayer& l) {
                     grad = (x.array() > 0.0).select(grad, grad * l.slope);
                   }},
               net.layers()[idx]);
  }
  if (input_gradient) *input_gradient = std::move(grad);

  Gradients out;
  for (auto& layer_grads : per_layer) {
    for (auto& g : layer_grads) out.push_back(std::move(g));
  }
  return out;
}

AdamState AdamState::for_network(const DenseNetwork& net, double learning_rate,
                                 double weight_decay) {
  AdamState state;
  state.learning_rate = learning_rate;
  state.weight_decay = weight_decay;
  for (auto p : net.parameters()) {
    state.first_moment.push_back(Vector::Zero(static_cast<Eigen::Index>(p.size())));
    state.second_moment.push_back(Vector::Zero(static_cast<Eigen::Index>(p.size())));
  }
  return state;
}

void adam_step(DenseNetwork& net, AdamState& state, const Gradients& gradients) {
  auto params = net.parameters();
  if (params.size() != gradients.size() || params.size() != state.first_moment.size()) {
    throw std::invalid_argument("adam: parameter/gradient/state count mismatch");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(state.beta1, t);
  const double bias2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto theta = params[k];
    const Vector& g_raw = gradients[k];
    Vector& m = state.first_moment[k];
    Vector& v = state.second_moment[k];
    if (static_cast<std::size_t>(g_raw.size()) != theta.size() || m.size() != g_raw.size()) {
      throw std::invalid_argument("adam: shape mismatch");
    }
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const auto ei = static_cast<Eigen::Index>(i);
      const double g = g_raw[ei] + state.weight_decay * theta[i];
      m[ei] = state.beta1 * m[ei] + (1.0 - state.beta1) * g;
      v[ei] = state.beta2 * v[ei] + (1.0 - state.beta2) * g * g;
      const double m_hat = m[ei] / bias1;
      const double v_hat = v[ei] / bias2;
      theta[i] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.eps);
    }
  }
  net.mark_modified();
}

nlohmann::json to_json(const DenseNetwork& net) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& layer : net.layers()) {
    std::visit(Overloaded{
                   [&](const DenseLayer& l) {
                     nlohmann::json j{{"type", "dense"}, {"in", l.in}, {"out", l.out}, {"bias", l.bias}};
                     j["weight"] = to_vector(Eigen::Map<const Vector>(l.weight.data(), l.weight.size()));
                     if (l.bias) j["b"] = to_vector(l.b);
                     layers.push_back(std::move(j));
                   },
                   [&](const BatchNormLayer& l) {
                     nlohmann::json j{{"type", "batch_norm"}, {"dim", l.dim},   {"affine", l.affine},
                                      {"momentum", l.momentum}, {"eps", l.eps}};
                     if (l.affine) {
                       j["gamma"] = to_vector(l.gamma);
                       j["beta"] = to_vector(l.beta);
                     }
                     j["running_mean"] = to_vector(l.running_mean);
                     j["running_var"] = to_vector(l.running_var);
                     layers.push_back(std::move(j));
                   },
                   [&](const LeakyReluLayer& l) {
                     layers.push_back({{"type", "leaky_relu"}, {"dim", l.dim}, {"slope", l.slope}});
                   }},
               layer);
  }
  return {{"format", "iwl-network"},
          {"version", kCheckpointVersion},
          {"input_dim", net.input_dim()},
          {"layers", std::move(layers)}};
}

DenseNetwork network_from_json(const nlohmann::json& doc) {
  if (doc.value("format", "") != "iwl-network") throw std::runtime_error("checkpoint: not a network record");
  if (doc.value("version", 0) != kCheckpointVersion) {
    throw std::runtime_error("checkpoint: unsupported version");
  }
  DenseNetwork net(doc.at("input_dim").get<int>());
  for (const auto& j : doc.at("layers")) {
    const auto type = j.at("type").get<std::string>();
    if (type == "dense") {
      DenseLayer l;
      l.in = j.at("in").get<int>();
      l.out = j.at("out").get<int>();
      l.bias = j.at("bias").get<bool>();
      const Vector flat = from_vector(j.at("weight"), Eigen::Index{l.in} * l.out, "weight");
      l.weight = Eigen::Map<const Matrix>(flat.data(), l.in, l.out);
      if (l.bias) l.b = from_vector(j.at("b"), l.out, "b");
      net.append(std::move(l));
    } else if (type == "batch_norm") {
      BatchNormLayer l;
      l.dim = j.at("dim").get<int>();
      l.affine = j.at("affine").get<bool>();
      l.momentum = j.at("momentum").get<double>();
      l.eps = j.at("eps").get<double>();
      if (l.affine) {
        l.gamma = from_vector(j.at("gamma"), l.dim, "gamma");
        l.beta = from_vector(j.at("beta"), l.dim, "beta");
      }
      l.running_mean = from_vector(j.at("running_mean"), l.dim, "running_mean");
      l.running_var = from_vector(j.at("running_var"), l.dim, "running_var");
      net.append(std::move(l));
    } else if (type == "leaky_relu") {
      net.append(LeakyReluLayer{j.at("dim").get<int>(), j.at("slope").get<double>()});
    } else {
      throw std::runtime_error("checkpoint: unknown layer type " + type);
    }
  }
  return net;
}

}  // namespace iwl::nn
