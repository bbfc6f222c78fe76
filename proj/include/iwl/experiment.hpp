#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include "iwl/data.hpp"
#include "iwl/metrics.hpp"
#include "iwl/models.hpp"
#include "iwl/weights.hpp"
#include "json.hpp"

namespace iwl::experiment {

inline constexpr int kSchemaVersion = 1;

struct CsvSource {
  std::filesystem::path train;
  std::filesystem::path test;
  std::optional<std::string> label_column = "label";
};

struct ExperimentConfig {
  std::variant<SyntheticSpec, CsvSource> data = SyntheticSpec{};
  ModelKind model = ModelKind::kAutoencoder;
  Architecture architecture;
  TrainConfig train;  // loss_mode and seed are set per cell
  std::vector<std::uint64_t> seeds{1, 2, 3};
  // Synthetic data only; empty runs the spec's own beta.
  std::vector<double> beta_sweep;
  std::filesystem::path output_dir = "out";
  int threads = 1;

  bool synthetic() const { return std::holds_alternative<SyntheticSpec>(data); }
  // Betas the run enumerates; a single nullopt for CSV data.
  std::vector<std::optional<double>> betas() const;
  void validate() const;
};

nlohmann::json to_json(const ExperimentConfig& config);
ExperimentConfig config_from_json(const nlohmann::json& doc);
ExperimentConfig load_config(const std::filesystem::path& path);

// Dataset seed for one (spec, run seed) pair. Both loss modes of a cell see
// the same data.
std::uint64_t data_seed(std::uint64_t spec_seed, std::uint64_t run_seed);

struct CellResult {
  std::uint64_t seed = 0;
  LossMode loss_mode = LossMode::kMse;
  std::optional<double> beta;
  std::optional<metrics::EvalReport> report;  // empty when the cell failed
  std::string error;
  TrainLog log;
};

struct Aggregate {
  std::optional<double> beta;
  LossMode loss_mode = LossMode::kMse;
  std::size_t n = 0;
  double auroc_mean = 0.0;
  double auroc_std = 0.0;
  double aupr_mean = 0.0;
  double aupr_std = 0.0;
  double score_skew_mean = 0.0;
  double log_score_skew_mean = 0.0;
};

struct RunResult {
  nlohmann::json config;
  ModelKind model = ModelKind::kAutoencoder;
  std::vector<CellResult> cells;
  std::vector<Aggregate> aggregates;
};

// Means and sample standard deviations (divisor n-1; 0 for n = 1) over the
// successful cells of each (beta, loss mode) pair, in first-seen order.
std::vector<Aggregate> aggregate(const std::vector<CellResult>& cells);

nlohmann::json to_json(const RunResult& result);
// Checks schema_version and that stored aggregates match a recomputation.
RunResult run_result_from_json(const nlohmann::json& doc);
RunResult load_run_result(const std::filesystem::path& path);

// Flat results table, fixed column order:
// seed,loss_mode,beta,auroc,aupr,score_skew,log_score_skew
void write_results_csv(std::ostream& out, const RunResult& result);

// One seed x loss-mode x beta cell: build, train, evaluate. Exceptions from
// training propagate.
CellResult run_cell(const ExperimentConfig& config, std::uint64_t seed, LossMode mode,
                    std::optional<double> beta, const WeightProvider& provider = {});

struct GeneratedDataset {
  double beta = 0.0;
  std::filesystem::path train_csv;
  std::filesystem::path test_csv;
  std::size_t train_rows = 0;
  std::size_t test_rows = 0;
};

// Writes train/test CSVs per beta and manifest.json into output_dir.
std::vector<GeneratedDataset> cmd_generate(const ExperimentConfig& config);

// Runs every seed x {MSE, IWL} x beta cell. Writes results.json,
// results.csv, logs/*.jsonl and the timing sidecar meta.json.
RunResult cmd_train(const ExperimentConfig& config);

struct WeightsOutput {
  std::vector<double> scores;
  WeightVector weights;
};

// One numeric column, optional header line. Output: comment lines with
// lambda / skewness / cap, a `weight` header, one weight per input row.
WeightsOutput cmd_weights(std::istream& scores_csv, std::ostream& weights_csv, const IwlConfig& config);
WeightsOutput cmd_weights(const std::filesystem::path& scores_csv,
                          const std::filesystem::path& weights_csv, const IwlConfig& config);
std::vector<double> read_score_column(std::istream& in);

struct ReportRow {
  ModelKind model = ModelKind::kAutoencoder;
  std::optional<double> beta;
  LossMode loss_mode = LossMode::kMse;
  std::size_t n = 0;
  double auroc_mean = 0.0;
  double auroc_std = 0.0;
  double aupr_mean = 0.0;
  double aupr_std = 0.0;
  double score_skew_mean = 0.0;
  double log_score_skew_mean = 0.0;
};

struct ReportDelta {
  ModelKind model = ModelKind::kAutoencoder;
  std::optional<double> beta;
  double auroc = 0.0;  // IWL - MSE
  double aupr = 0.0;
  double log_score_skew = 0.0;
};

struct Report {
  std::vector<ReportRow> rows;
  std::vector<ReportDelta> deltas;
};

// A single result reproduces its own aggregates. Several results are
// treated as replicate runs: per (model, beta, mode), the mean of their
// means and the standard deviation across them.
Report build_report(const std::vector<RunResult>& results);
Report cmd_report(const std::vector<std::filesystem::path>& result_files,
                  const std::optional<std::filesystem::path>& out_dir, std::ostream& text_out);
void write_report_text(std::ostream& out, const Report& report);
void write_report_csv(std::ostream& out, const Report& report);

}  // namespace iwl::experiment
