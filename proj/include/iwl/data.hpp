#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "iwl/nn.hpp"
#include "json.hpp"

namespace iwl {

enum class Label : std::uint8_t { kNormal, kAnomaly };
enum class Provenance : std::uint8_t { kMajority, kMinority, kAnomaly };

const char* to_string(Provenance p);

struct LabeledDataset {
  nn::Matrix features;
  std::vector<Label> labels;
  std::vector<Provenance> provenance;

  std::size_t size() const { return labels.size(); }
  int dim() const { return static_cast<int>(features.cols()); }
  std::size_t count(Provenance p) const;
  std::size_t count(Label l) const;

  LabeledDataset normal_rows() const;
  // Throws when shapes disagree or a label contradicts its provenance.
  void validate() const;
};

// Two Gaussian clusters (majority / minority) plus uniform anomalies drawn
// from a box with exclusion balls around both cluster means.
struct SyntheticSpec {
  int dim = 8;
  int n_majority = 2000;
  double beta = 100.0;
  // Empty means: majority at -3*cluster_std, minority at +3*cluster_std on
  // the first axis.
  std::vector<double> majority_mean;
  std::vector<double> minority_mean;
  double cluster_std = 1.0;
  int n_anomaly_eval = 200;
  // Empty boxes default to [-10, 10] on every axis.
  std::vector<double> anomaly_low;
  std::vector<double> anomaly_high;
  // Test normals per cluster. Balanced by default so the minority cluster
  // carries weight in AUROC; 0 mirrors the train count of that cluster.
  int n_test_majority = 1000;
  int n_test_minority = 1000;
  std::uint64_t seed = 0;

  int n_minority() const;
  double exclusion_radius() const { return 2.0 * cluster_std; }
  // Fills in defaulted means/boxes and checks invariants.
  SyntheticSpec resolved() const;
  void validate() const;
};

nlohmann::json to_json(const SyntheticSpec& spec);
SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j);

struct TrainTestSplit {
  LabeledDataset train;  // normals only
  LabeledDataset test;   // normals + anomalies
};

TrainTestSplit generate(const SyntheticSpec& spec);

// CSV: header line, decimal features, optional label column with {0,1}.
void write_csv(std::ostream& out, const LabeledDataset& data, bool with_label = true);
void write_csv(const std::filesystem::path& path, const LabeledDataset& data,
               bool with_label = true);

LabeledDataset parse_csv(std::istream& in, const std::optional<std::string>& label_column);
LabeledDataset load_csv(const std::filesystem::path& path,
                        const std::optional<std::string>& label_column);

// Plain numeric CSV parsing shared with the score/weight tools.
std::vector<std::string> split_csv_line(const std::string& line);
std::optional<double> parse_number(const std::string& cell);
std::string format_number(double value);

}  // namespace iwl
