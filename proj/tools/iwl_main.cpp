// Command-line front end: generate | train | weights | report.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "iwl/experiment.hpp"

namespace {

using iwl::experiment::ExperimentConfig;

ExperimentConfig resolve_config(const std::string& config_path, const std::optional<std::uint64_t>& seed,
                                const std::optional<std::string>& out) {
  ExperimentConfig config = config_path.empty() ? ExperimentConfig{}
                                                : iwl::experiment::load_config(config_path);
  if (seed) {
    // --seed pins a single run seed; for generate it is the dataset seed.
    config.seeds = {*seed};
    if (auto* spec = std::get_if<iwl::SyntheticSpec>(&config.data)) spec->seed = *seed;
  }
  if (out) config.output_dir = *out;
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Importance-weighted loss experiments for long-tailed anomaly scores"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;

  auto* generate = app.add_subcommand("generate", "Write synthetic train/test CSVs and a manifest");
  auto* train = app.add_subcommand("train", "Train paired MSE/IWL models over seeds and betas");
  for (auto* sub : {generate, train}) {
    sub->add_option("--config", config_path, "JSON experiment config");
    sub->add_option("--seed", seed, "Override the seed");
    sub->add_option("--out", out, "Output directory");
  }

  std::string scores_path;
  std::string weights_path;
  std::string weights_config;
  auto* weights = app.add_subcommand("weights", "Compute IWL weights for a one-column score CSV");
  weights->add_option("scores", scores_path, "Score CSV (one numeric column)")->required();
  weights->add_option("--out", weights_path, "Weights CSV (default: stdout)");
  weights->add_option("--config", weights_config, "JSON config; reads train.iwl");

  std::vector<std::string> result_files;
  std::optional<std::string> report_out;
  auto* report = app.add_subcommand("report", "Summarize one or more results.json files");
  report->add_option("results", result_files, "results.json files")->required();
  report->add_option("--out", report_out, "Directory for report.txt / report.csv");

  CLI11_PARSE(app, argc, argv);

  try {
    if (generate->parsed()) {
      const auto config = resolve_config(config_path, seed, out);
      for (const auto& g : iwl::experiment::cmd_generate(config)) {
        std::cout << "beta " << g.beta << ": " << g.train_csv.string() << " (" << g.train_rows
                  << " rows), " << g.test_csv.string() << " (" << g.test_rows << " rows)\n";
      }
    } else if (train->parsed()) {
      const auto config = resolve_config(config_path, seed, out);
      const auto result = iwl::experiment::cmd_train(config);
      std::size_t failed = 0;
      for (const auto& c : result.cells) {
        if (!c.error.empty()) {
          ++failed;
          std::cerr << "cell seed=" << c.seed << " mode=" << iwl::to_string(c.loss_mode)
                    << " failed: " << c.error << '\n';
        }
      }
      iwl::experiment::write_report_text(std::cout, iwl::experiment::build_report({result}));
      std::cout << "results written to " << config.output_dir.string() << '\n';
      return failed == 0 ? 0 : 2;
    } else if (weights->parsed()) {
      iwl::IwlConfig iwl_config;
      if (!weights_config.empty()) iwl_config = iwl::experiment::load_config(weights_config).train.iwl;
      if (weights_path.empty()) {
        std::ifstream in(scores_path, std::ios::binary);
        if (!in) throw std::runtime_error("cannot open " + scores_path);
        iwl::experiment::cmd_weights(in, std::cout, iwl_config);
      } else {
        iwl::experiment::cmd_weights(scores_path, weights_path, iwl_config);
      }
    } else if (report->parsed()) {
      std::vector<std::filesystem::path> files(result_files.begin(), result_files.end());
      std::optional<std::filesystem::path> dir;
      if (report_out) dir = *report_out;
      iwl::experiment::cmd_report(files, dir, std::cout);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
