#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "iwl/data.hpp"
#include "iwl/nn.hpp"
#include "iwl/stats.hpp"
#include "iwl/weights.hpp"
#include "json.hpp"

namespace iwl {

enum class LossMode { kMse, kIwl };
const char* to_string(LossMode mode);
LossMode loss_mode_from_string(const std::string& name);

enum class ModelKind { kAutoencoder, kDsvdd };
const char* to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);

// Encoder: dense -> BN -> LReLU per hidden width, then dense to the latent
// width. The decoder mirrors it back to the input width.
struct Architecture {
  std::vector<int> hidden{64, 32};
  int latent_dim = 4;
};

struct TrainConfig {
  int epochs = 100;
  int pretrain_epochs = 20;
  int batch_size = 64;
  double learning_rate = 1e-4;
  double weight_decay = 1e-6;
  LossMode loss_mode = LossMode::kMse;
  IwlConfig iwl;
  std::uint64_t seed = 0;

  void validate() const;
};

nlohmann::json to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& j);

nn::DenseNetwork make_encoder(int input_dim, const Architecture& arch, bool with_bias);
nn::DenseNetwork make_decoder(int output_dim, const Architecture& arch, bool with_bias);

struct Autoencoder {
  nn::DenseNetwork encoder;
  nn::DenseNetwork decoder;

  static Autoencoder build(int input_dim, const Architecture& arch, std::uint64_t seed,
                           bool with_bias = true);
  int input_dim() const { return encoder.input_dim(); }
};

// Bias-free encoder plus a fixed latent center.
struct DsvddModel {
  nn::DenseNetwork encoder;
  std::optional<nn::Vector> center;

  static DsvddModel build(int input_dim, const Architecture& arch, std::uint64_t seed);
};

inline constexpr double kCenterMinMagnitude = 0.1;

// Per-row squared reconstruction error, eval mode.
ScoreBatch ae_scores(const Autoencoder& model, const nn::Matrix& batch);

// Mean eval-mode embedding of `data`; coordinates closer to zero than 0.1
// are pushed out to +/-0.1 (zero goes to +0.1). Stores and returns it.
nn::Vector dsvdd_init_center(DsvddModel& model, const nn::Matrix& data);
// Per-row squared distance to the center, eval mode.
ScoreBatch dsvdd_scores(const DsvddModel& model, const nn::Matrix& batch);

struct BatchRecord {
  int epoch = 0;
  double loss = 0.0;
  double mean_weight = 1.0;
  double max_weight = 1.0;
  double cap = 0.0;
  double skewness = 0.0;
  bool degenerate = false;
};

struct EpochRecord {
  std::string phase;  // "pretrain" or "train"
  int epoch = 0;
  double mean_loss = 0.0;
  // Over eval-mode scores of the full training set at the end of the epoch.
  double score_skewness = 0.0;
  double log_score_skewness = 0.0;
  double mean_weight = 1.0;
  double max_weight = 1.0;
  int batches = 0;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  std::vector<BatchRecord> batches;  // main phase only

  void write_jsonl(std::ostream& out) const;
};

nlohmann::json to_json(const EpochRecord& record);

// Replaces compute_weights in IWL mode.
using WeightProvider = std::function<WeightVector(const ScoreBatch&, const IwlConfig&)>;

// Only rows labeled normal are used.
TrainLog train(Autoencoder& model, const LabeledDataset& data, const TrainConfig& config,
               const WeightProvider& weight_provider = {});
// AE pretraining (MSE, pretrain_epochs) on the encoder, center init, then the
// main loop on the center distance.
TrainLog train(DsvddModel& model, const LabeledDataset& data, const TrainConfig& config,
               const WeightProvider& weight_provider = {});

nlohmann::json to_json(const Autoencoder& model);
nlohmann::json to_json(const DsvddModel& model);
Autoencoder autoencoder_from_json(const nlohmann::json& doc);
DsvddModel dsvdd_from_json(const nlohmann::json& doc);

}  // namespace iwl
