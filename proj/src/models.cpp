#include "iwl/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "iwl/metrics.hpp"

namespace iwl {

const char* to_string(LossMode mode) { return mode == LossMode::kIwl ? "IWL" : "MSE"; }

LossMode loss_mode_from_string(const std::string& name) {
  if (name == "MSE" || name == "mse") return LossMode::kMse;
  if (name == "IWL" || name == "iwl") return LossMode::kIwl;
  throw std::invalid_argument("unknown loss mode '" + name + "'");
}

const char* to_string(ModelKind kind) { return kind == ModelKind::kDsvdd ? "dsvdd" : "ae"; }

ModelKind model_kind_from_string(const std::string& name) {
  if (name == "ae" || name == "AE" || name == "autoencoder") return ModelKind::kAutoencoder;
  if (name == "dsvdd" || name == "DSVDD") return ModelKind::kDsvdd;
  throw std::invalid_argument("unknown model '" + name + "'");
}

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("train.epochs must be >= 1");
  if (pretrain_epochs < 0) throw std::invalid_argument("train.pretrain_epochs must be >= 0");
  if (batch_size < 2) throw std::invalid_argument("train.batch_size must be >= 2");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("train.learning_rate must be > 0");
  if (!(weight_decay >= 0.0)) throw std::invalid_argument("train.weight_decay must be >= 0");
  iwl.validate();
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"pretrain_epochs", c.pretrain_epochs},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"weight_decay", c.weight_decay},
          {"loss_mode", to_string(c.loss_mode)},
          {"iwl",
           {{"epsilon", c.iwl.epsilon},
            {"alpha", c.iwl.alpha},
            {"t0", c.iwl.t0},
            {"normalize", c.iwl.normalize}}},
          {"seed", c.seed}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.epochs = j.value("epochs", c.epochs);
  c.pretrain_epochs = j.value("pretrain_epochs", c.pretrain_epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  if (j.contains("loss_mode")) c.loss_mode = loss_mode_from_string(j.at("loss_mode").get<std::string>());
  if (j.contains("iwl")) {
    const auto& w = j.at("iwl");
    c.iwl.epsilon = w.value("epsilon", c.iwl.epsilon);
    c.iwl.alpha = w.value("alpha", c.iwl.alpha);
    c.iwl.t0 = w.value("t0", c.iwl.t0);
    c.iwl.normalize = w.value("normalize", c.iwl.normalize);
  }
  c.seed = j.value("seed", c.seed);
  return c;
}

namespace {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag, std::uint64_t index = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(tag), static_cast<std::uint32_t>(index)};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

enum SeedTag : std::uint64_t { kEncoderInit = 1, kDecoderInit = 2, kPretrainShuffle = 3, kShuffle = 4 };

std::vector<double> row_squared_norms(const nn::Matrix& m) {
  std::vector<double> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) out[static_cast<std::size_t>(r)] = m.row(r).squaredNorm();
  return out;
}

nn::Matrix gather_rows(const nn::Matrix& data, std::span<const std::size_t> rows) {
  nn::Matrix out(static_cast<Eigen::Index>(rows.size()), data.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = data.row(static_cast<Eigen::Index>(rows[i]));
  }
  return out;
}

// Row-scales the residual by 2 w_i / N, the gradient of (1/N) sum w_i ||r_i||^2.
nn::Matrix weighted_residual_gradient(const nn::Matrix& residual, std::span<const double> weights) {
  const double n = static_cast<double>(residual.rows());
  nn::Matrix grad(residual.rows(), residual.cols());
  for (Eigen::Index r = 0; r < residual.rows(); ++r) {
    grad.row(r) = residual.row(r) * (2.0 * weights[static_cast<std::size_t>(r)] / n);
  }
  return grad;
}

class AeHost {
 public:
  AeHost(Autoencoder& model, const TrainConfig& c)
      : model_(model),
        enc_state_(nn::AdamState::for_network(model.encoder, c.learning_rate, c.weight_decay)),
        dec_state_(nn::AdamState::for_network(model.decoder, c.learning_rate, c.weight_decay)) {}

  std::vector<double> forward(const nn::Matrix& x) {
    enc_ = nn::forward(model_.encoder, x, nn::Mode::kTrain);
    dec_ = nn::forward(model_.decoder, enc_.output, nn::Mode::kTrain);
    residual_ = dec_.output - x;
    return row_squared_norms(residual_);
  }

  void apply(std::span<const double> weights) {
    const nn::Matrix grad_out = weighted_residual_gradient(residual_, weights);
    nn::Matrix grad_latent;
    const auto dec_grads = nn::backward(model_.decoder, dec_.tape, grad_out, &grad_latent);
    const auto enc_grads = nn::backward(model_.encoder, enc_.tape, grad_latent);
    nn::adam_step(model_.decoder, dec_state_, dec_grads);
    nn::adam_step(model_.encoder, enc_state_, enc_grads);
  }

  std::vector<double> eval_scores(const nn::Matrix& x) const { return ae_scores(model_, x).vector(); }

 private:
  Autoencoder& model_;
  nn::AdamState enc_state_;
  nn::AdamState dec_state_;
  nn::ForwardResult enc_;
  nn::ForwardResult dec_;
  nn::Matrix residual_;
};

class DsvddHost {
 public:
  DsvddHost(DsvddModel& model, const TrainConfig& c)
      : model_(model),
        state_(nn::AdamState::for_network(model.encoder, c.learning_rate, c.weight_decay)) {}

  std::vector<double> forward(const nn::Matrix& x) {
    enc_ = nn::forward(model_.encoder, x, nn::Mode::kTrain);
    residual_ = enc_.output.rowwise() - model_.center->transpose();
    return row_squared_norms(residual_);
  }

  void apply(std::span<const double> weights) {
    const auto grads = nn::backward(model_.encoder, enc_.tape, weighted_residual_gradient(residual_, weights));
    nn::adam_step(model_.encoder, state_, grads);
  }

  std::vector<double> eval_scores(const nn::Matrix& x) const { return dsvdd_scores(model_, x).vector(); }

 private:
  DsvddModel& model_;
  nn::AdamState state_;
  nn::ForwardResult enc_;
  nn::Matrix residual_;
};

template <class Host>
void run_phase(Host& host, const nn::Matrix& data, const TrainConfig& config, int epochs,
               LossMode mode, const WeightProvider& provider, const std::string& phase,
               std::uint64_t shuffle_tag, TrainLog& log) {
  const auto n = static_cast<std::size_t>(data.rows());
  const auto batch_size = static_cast<std::size_t>(config.batch_size);
  std::vector<std::size_t> order(n);

  for (int epoch = 1; epoch <= epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(derive_seed(config.seed, shuffle_tag, static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), rng);

    EpochRecord record;
    record.phase = phase;
    record.epoch = epoch;
    double loss_sum = 0.0;
    double weight_sum = 0.0;
    std::size_t weight_count = 0;
    double max_weight = 0.0;

    for (std::size_t start = 0; start < n; start += batch_size) {
      const std::size_t len = std::min(batch_size, n - start);
      if (len < 2) break;
      const nn::Matrix x = gather_rows(data, std::span(order).subspan(start, len));
      const std::vector<double> scores = host.forward(x);

      WeightVector weights;
      if (mode == LossMode::kIwl) {
        const ScoreBatch batch(scores);
        weights = provider ? provider(batch, config.iwl) : compute_weights(batch, config.iwl);
        if (weights.size() != len) throw std::logic_error("weight provider returned wrong length");
      } else {
        weights = WeightVector::uniform(len, 1.0);
      }
      const double loss = weighted_loss(scores, weights);
      host.apply(weights.weights);

      const double batch_max = *std::max_element(weights.weights.begin(), weights.weights.end());
      const double batch_sum = std::accumulate(weights.weights.begin(), weights.weights.end(), 0.0);
      loss_sum += loss;
      weight_sum += batch_sum;
      weight_count += len;
      max_weight = std::max(max_weight, batch_max);
      ++record.batches;
      if (phase == "train") {
        log.batches.push_back({epoch, loss, batch_sum / static_cast<double>(len), batch_max,
                               weights.cap, weights.skewness, weights.degenerate});
      }
    }
    if (record.batches == 0) throw std::invalid_argument("training set too small for one batch");
    record.mean_loss = loss_sum / record.batches;
    record.mean_weight = weight_sum / static_cast<double>(weight_count);
    record.max_weight = max_weight;

    const auto eval = host.eval_scores(data);
    try {
      record.score_skewness = stats::skewness(eval);
      record.log_score_skewness = metrics::guarded_log_skewness(eval, config.iwl.epsilon);
    } catch (const DegenerateSample&) {
      record.score_skewness = 0.0;
      record.log_score_skewness = 0.0;
    }
    log.epochs.push_back(std::move(record));
  }
}

nn::Matrix normal_features(const LabeledDataset& data) {
  data.validate();
  nn::Matrix x = data.normal_rows().features;
  if (x.rows() < 2) throw std::invalid_argument("need at least 2 normal rows to train");
  return x;
}

}  // namespace

nn::DenseNetwork make_encoder(int input_dim, const Architecture& arch, bool with_bias) {
  nn::DenseNetwork net(input_dim);
  for (int width : arch.hidden) net.dense(width, with_bias).batch_norm(with_bias).leaky_relu();
  net.dense(arch.latent_dim, with_bias);
  return net;
}

nn::DenseNetwork make_decoder(int output_dim, const Architecture& arch, bool with_bias) {
  nn::DenseNetwork net(arch.latent_dim);
  for (auto it = arch.hidden.rbegin(); it != arch.hidden.rend(); ++it) {
    net.dense(*it, with_bias).batch_norm(with_bias).leaky_relu();
  }
  net.dense(output_dim, with_bias);
  return net;
}

Autoencoder Autoencoder::build(int input_dim, const Architecture& arch, std::uint64_t seed,
                               bool with_bias) {
  Autoencoder ae{make_encoder(input_dim, arch, with_bias), make_decoder(input_dim, arch, with_bias)};
  ae.encoder.initialize(derive_seed(seed, kEncoderInit));
  ae.decoder.initialize(derive_seed(seed, kDecoderInit));
  return ae;
}

DsvddModel DsvddModel::build(int input_dim, const Architecture& arch, std::uint64_t seed) {
  DsvddModel m{make_encoder(input_dim, arch, false), std::nullopt};
  m.encoder.initialize(derive_seed(seed, kEncoderInit));
  return m;
}

ScoreBatch ae_scores(const Autoencoder& model, const nn::Matrix& batch) {
  const nn::Matrix reconstruction = nn::predict(model.decoder, nn::predict(model.encoder, batch));
  return ScoreBatch(row_squared_norms(reconstruction - batch));
}

nn::Vector dsvdd_init_center(DsvddModel& model, const nn::Matrix& data) {
  if (data.rows() == 0) throw std::invalid_argument("center init needs data");
  const nn::Matrix z = nn::predict(model.encoder, data);
  nn::Vector c = z.colwise().mean().transpose();
  for (Eigen::Index j = 0; j < c.size(); ++j) {
    if (std::abs(c[j]) < kCenterMinMagnitude) c[j] = c[j] < 0.0 ? -kCenterMinMagnitude : kCenterMinMagnitude;
  }
  model.center = c;
  return c;
}

ScoreBatch dsvdd_scores(const DsvddModel& model, const nn::Matrix& batch) {
  if (!model.center) throw std::logic_error("DSVDD center not initialized");
  const nn::Matrix z = nn::predict(model.encoder, batch);
  return ScoreBatch(row_squared_norms(z.rowwise() - model.center->transpose()));
}

nlohmann::json to_json(const EpochRecord& r) {
  return {{"phase", r.phase},
          {"epoch", r.epoch},
          {"mean_loss", r.mean_loss},
          {"score_skewness", r.score_skewness},
          {"log_score_skewness", r.log_score_skewness},
          {"mean_weight", r.mean_weight},
          {"max_weight", r.max_weight},
          {"batches", r.batches}};
}

void TrainLog::write_jsonl(std::ostream& out) const {
  for (const auto& e : epochs) out << to_json(e).dump() << '\n';
}

TrainLog train(Autoencoder& model, const LabeledDataset& data, const TrainConfig& config,
               const WeightProvider& weight_provider) {
  config.validate();
  const nn::Matrix x = normal_features(data);
  if (x.cols() != model.input_dim()) throw std::invalid_argument("data width does not match model input");
  TrainLog log;
  AeHost host(model, config);
  run_phase(host, x, config, config.epochs, config.loss_mode, weight_provider, "train", kShuffle, log);
  return log;
}

TrainLog train(DsvddModel& model, const LabeledDataset& data, const TrainConfig& config,
               const WeightProvider& weight_provider) {
  config.validate();
  const nn::Matrix x = normal_features(data);
  if (x.cols() != model.encoder.input_dim()) {
    throw std::invalid_argument("data width does not match model input");
  }
  TrainLog log;
  if (config.pretrain_epochs > 0) {
    const auto& last = std::get<nn::DenseLayer>(model.encoder.layers().back());
    Architecture arch;
    arch.latent_dim = last.out;
    arch.hidden.clear();
    for (const auto& layer : model.encoder.layers()) {
      if (const auto* d = std::get_if<nn::DenseLayer>(&layer); d && d != &last) arch.hidden.push_back(d->out);
    }
    Autoencoder pretrain{std::move(model.encoder), make_decoder(x.cols(), arch, false)};
    pretrain.decoder.initialize(derive_seed(config.seed, kDecoderInit));
    {
      AeHost host(pretrain, config);
      run_phase(host, x, config, config.pretrain_epochs, LossMode::kMse, {}, "pretrain",
                kPretrainShuffle, log);
    }
    model.encoder = std::move(pretrain.encoder);
  }
  dsvdd_init_center(model, x);
  DsvddHost host(model, config);
  run_phase(host, x, config, config.epochs, config.loss_mode, weight_provider, "train", kShuffle, log);
  return log;
}

nlohmann::json to_json(const Autoencoder& model) {
  return {{"format", "iwl-model"},
          {"version", nn::kCheckpointVersion},
          {"kind", "ae"},
          {"encoder", nn::to_json(model.encoder)},
          {"decoder", nn::to_json(model.decoder)}};
}

nlohmann::json to_json(const DsvddModel& model) {
  nlohmann::json doc{{"format", "iwl-model"},
                     {"version", nn::kCheckpointVersion},
                     {"kind", "dsvdd"},
                     {"encoder", nn::to_json(model.encoder)}};
  if (model.center) doc["center"] = std::vector<double>(model.center->data(), model.center->data() + model.center->size());
  return doc;
}

namespace {
void check_model_doc(const nlohmann::json& doc, const char* kind) {
  if (doc.value("format", "") != "iwl-model" || doc.value("kind", "") != kind) {
    throw std::runtime_error(std::string("checkpoint: not a ") + kind + " model record");
  }
  if (doc.value("version", 0) != nn::kCheckpointVersion) throw std::runtime_error("checkpoint: unsupported version");
}
}  // namespace

Autoencoder autoencoder_from_json(const nlohmann::json& doc) {
  check_model_doc(doc, "ae");
  return {nn::network_from_json(doc.at("encoder")), nn::network_from_json(doc.at("decoder"))};
}

DsvddModel dsvdd_from_json(const nlohmann::json& doc) {
  check_model_doc(doc, "dsvdd");
  DsvddModel m{nn::network_from_json(doc.at("encoder")), std::nullopt};
  if (m.encoder.has_bias_parameters()) throw std::runtime_error("checkpoint: DSVDD encoder carries biases");
  if (doc.contains("center")) {
    const auto c = doc.at("center").get<std::vector<double>>();
    m.center = Eigen::Map<const nn::Vector>(c.data(), static_cast<Eigen::Index>(c.size()));
  }
  return m;
}

}  // namespace iwl
