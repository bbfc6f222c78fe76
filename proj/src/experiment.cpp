#include "iwl/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace iwl::experiment {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> optional_number_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

std::string beta_label(const std::optional<double>& beta) {
  return beta ? format_number(*beta) : std::string();
}

void write_text_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());
}

std::pair<double, double> mean_and_std(const std::vector<double>& values) {
  if (values.empty()) return {0.0, 0.0};
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  if (values.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / static_cast<double>(values.size() - 1))};
}

bool same_beta(const std::optional<double>& a, const std::optional<double>& b) {
  return a.has_value() == b.has_value() && (!a || *a == *b);
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

}  // namespace

std::vector<std::optional<double>> ExperimentConfig::betas() const {
  if (!synthetic()) return {std::nullopt};
  if (beta_sweep.empty()) return {std::get<SyntheticSpec>(data).beta};
  return {beta_sweep.begin(), beta_sweep.end()};
}

void ExperimentConfig::validate() const {
  if (seeds.empty()) throw std::invalid_argument("config: seeds must be nonempty");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
    throw std::invalid_argument("config: seeds must be distinct");
  }
  for (double b : beta_sweep) {
    if (!(b >= 1.0) || !std::isfinite(b)) throw std::invalid_argument("config: beta values must be >= 1");
  }
  if (threads < 1) throw std::invalid_argument("config: threads must be >= 1");
  if (architecture.latent_dim < 1) throw std::invalid_argument("config: latent_dim must be >= 1");
  for (int w : architecture.hidden) {
    if (w < 1) throw std::invalid_argument("config: hidden widths must be >= 1");
  }
  train.validate();
  if (synthetic()) {
    for (auto beta : betas()) {
      SyntheticSpec spec = std::get<SyntheticSpec>(data);
      spec.beta = *beta;
      spec.resolved();
    }
  } else if (!beta_sweep.empty()) {
    throw std::invalid_argument("config: beta_sweep needs synthetic data");
  }
}

json to_json(const ExperimentConfig& c) {
  json data;
  if (c.synthetic()) {
    data["synthetic"] = to_json(std::get<SyntheticSpec>(c.data));
  } else {
    const auto& csv = std::get<CsvSource>(c.data);
    data["csv"] = {{"train", csv.train.string()},
                   {"test", csv.test.string()},
                   {"label_column", csv.label_column ? json(*csv.label_column) : json(nullptr)}};
  }
  json train = to_json(c.train);
  train.erase("loss_mode");
  train.erase("seed");
  return {{"schema_version", kSchemaVersion},
          {"data", std::move(data)},
          {"model", to_string(c.model)},
          {"architecture", {{"hidden", c.architecture.hidden}, {"latent_dim", c.architecture.latent_dim}}},
          {"train", std::move(train)},
          {"seeds", c.seeds},
          {"beta_sweep", c.beta_sweep},
          {"output_dir", c.output_dir.string()},
          {"threads", c.threads}};
}

ExperimentConfig config_from_json(const json& doc) {
  const int version = doc.value("schema_version", kSchemaVersion);
  if (version != kSchemaVersion) {
    throw std::invalid_argument("config: unsupported schema_version " + std::to_string(version));
  }
  ExperimentConfig c;
  if (doc.contains("data")) {
    const auto& d = doc.at("data");
    if (d.contains("csv")) {
      const auto& j = d.at("csv");
      CsvSource src;
      src.train = j.at("train").get<std::string>();
      src.test = j.at("test").get<std::string>();
      if (j.contains("label_column")) {
        src.label_column = j.at("label_column").is_null()
                               ? std::nullopt
                               : std::optional<std::string>(j.at("label_column").get<std::string>());
      }
      c.data = src;
    } else {
      c.data = synthetic_spec_from_json(d.value("synthetic", json::object()));
    }
  }
  if (doc.contains("model")) c.model = model_kind_from_string(doc.at("model").get<std::string>());
  if (doc.contains("architecture")) {
    const auto& a = doc.at("architecture");
    c.architecture.hidden = a.value("hidden", c.architecture.hidden);
    c.architecture.latent_dim = a.value("latent_dim", c.architecture.latent_dim);
  }
  if (doc.contains("train")) c.train = train_config_from_json(doc.at("train"));
  c.seeds = doc.value("seeds", c.seeds);
  c.beta_sweep = doc.value("beta_sweep", c.beta_sweep);
  c.output_dir = doc.value("output_dir", c.output_dir.string());
  c.threads = doc.value("threads", c.threads);
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  try {
    return config_from_json(read_json_file(path));
  } catch (const json::exception& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
}

std::uint64_t data_seed(std::uint64_t spec_seed, std::uint64_t run_seed) {
  return spec_seed ^ (run_seed * 0x9E3779B97F4A7C15ULL);
}

std::vector<Aggregate> aggregate(const std::vector<CellResult>& cells) {
  std::vector<Aggregate> out;
  for (const auto& cell : cells) {
    const bool seen = std::any_of(out.begin(), out.end(), [&](const Aggregate& a) {
      return same_beta(a.beta, cell.beta) && a.loss_mode == cell.loss_mode;
    });
    if (seen) continue;
    Aggregate agg;
    agg.beta = cell.beta;
    agg.loss_mode = cell.loss_mode;
    std::vector<double> auroc, aupr, skew, log_skew;
    for (const auto& c : cells) {
      if (!c.report || !same_beta(c.beta, cell.beta) || c.loss_mode != cell.loss_mode) continue;
      auroc.push_back(c.report->auroc);
      aupr.push_back(c.report->aupr);
      skew.push_back(c.report->score_skewness);
      log_skew.push_back(c.report->log_score_skewness);
    }
    agg.n = auroc.size();
    std::tie(agg.auroc_mean, agg.auroc_std) = mean_and_std(auroc);
    std::tie(agg.aupr_mean, agg.aupr_std) = mean_and_std(aupr);
    agg.score_skew_mean = mean_and_std(skew).first;
    agg.log_score_skew_mean = mean_and_std(log_skew).first;
    out.push_back(agg);
  }
  return out;
}

namespace {

json to_json(const Aggregate& a) {
  return {{"beta", optional_number(a.beta)},
          {"loss_mode", to_string(a.loss_mode)},
          {"n", a.n},
          {"auroc_mean", a.auroc_mean},
          {"auroc_std", a.auroc_std},
          {"aupr_mean", a.aupr_mean},
          {"aupr_std", a.aupr_std},
          {"score_skew_mean", a.score_skew_mean},
          {"log_score_skew_mean", a.log_score_skew_mean}};
}

Aggregate aggregate_from_json(const json& j) {
  Aggregate a;
  a.beta = optional_number_from(j.at("beta"));
  a.loss_mode = loss_mode_from_string(j.at("loss_mode").get<std::string>());
  a.n = j.at("n").get<std::size_t>();
  a.auroc_mean = j.at("auroc_mean").get<double>();
  a.auroc_std = j.at("auroc_std").get<double>();
  a.aupr_mean = j.at("aupr_mean").get<double>();
  a.aupr_std = j.at("aupr_std").get<double>();
  a.score_skew_mean = j.at("score_skew_mean").get<double>();
  a.log_score_skew_mean = j.at("log_score_skew_mean").get<double>();
  return a;
}

json epoch_records_json(const TrainLog& log) {
  json arr = json::array();
  for (const auto& e : log.epochs) arr.push_back(iwl::to_json(e));
  return arr;
}

TrainLog epoch_records_from_json(const json& arr) {
  TrainLog log;
  for (const auto& j : arr) {
    EpochRecord r;
    r.phase = j.at("phase").get<std::string>();
    r.epoch = j.at("epoch").get<int>();
    r.mean_loss = j.at("mean_loss").get<double>();
    r.score_skewness = j.at("score_skewness").get<double>();
    r.log_score_skewness = j.at("log_score_skewness").get<double>();
    r.mean_weight = j.at("mean_weight").get<double>();
    r.max_weight = j.at("max_weight").get<double>();
    r.batches = j.at("batches").get<int>();
    log.epochs.push_back(std::move(r));
  }
  return log;
}

bool close(double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(a)); }

}  // namespace

json to_json(const RunResult& r) {
  json cells = json::array();
  for (const auto& c : r.cells) {
    json j{{"seed", c.seed}, {"loss_mode", to_string(c.loss_mode)}, {"beta", optional_number(c.beta)}};
    j["report"] = c.report ? metrics::to_json(*c.report) : json(nullptr);
    if (!c.error.empty()) j["error"] = c.error;
    j["epochs"] = epoch_records_json(c.log);
    cells.push_back(std::move(j));
  }
  json aggs = json::array();
  for (const auto& a : r.aggregates) aggs.push_back(to_json(a));
  return {{"schema_version", kSchemaVersion},
          {"model", to_string(r.model)},
          {"config", r.config},
          {"cells", std::move(cells)},
          {"aggregates", std::move(aggs)}};
}

RunResult run_result_from_json(const json& doc) {
  const int version = doc.value("schema_version", -1);
  if (version != kSchemaVersion) {
    throw std::runtime_error("result: schema_version " + std::to_string(version) + " != " +
                             std::to_string(kSchemaVersion));
  }
  RunResult r;
  r.model = model_kind_from_string(doc.at("model").get<std::string>());
  r.config = doc.at("config");
  for (const auto& j : doc.at("cells")) {
    CellResult c;
    c.seed = j.at("seed").get<std::uint64_t>();
    c.loss_mode = loss_mode_from_string(j.at("loss_mode").get<std::string>());
    c.beta = optional_number_from(j.at("beta"));
    if (!j.at("report").is_null()) c.report = metrics::eval_report_from_json(j.at("report"));
    c.error = j.value("error", "");
    c.log = epoch_records_from_json(j.at("epochs"));
    r.cells.push_back(std::move(c));
  }
  for (const auto& j : doc.at("aggregates")) r.aggregates.push_back(aggregate_from_json(j));

  const auto recomputed = aggregate(r.cells);
  bool consistent = recomputed.size() == r.aggregates.size();
  for (std::size_t i = 0; consistent && i < recomputed.size(); ++i) {
    const auto& a = recomputed[i];
    const auto& b = r.aggregates[i];
    consistent = same_beta(a.beta, b.beta) && a.loss_mode == b.loss_mode && a.n == b.n &&
                 close(a.auroc_mean, b.auroc_mean) && close(a.auroc_std, b.auroc_std) &&
                 close(a.aupr_mean, b.aupr_mean) && close(a.aupr_std, b.aupr_std) &&
                 close(a.score_skew_mean, b.score_skew_mean) &&
                 close(a.log_score_skew_mean, b.log_score_skew_mean);
  }
  if (!consistent) throw std::runtime_error("result: aggregates do not match per-seed entries");
  return r;
}

RunResult load_run_result(const fs::path& path) {
  try {
    return run_result_from_json(read_json_file(path));
  } catch (const std::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

void write_results_csv(std::ostream& out, const RunResult& result) {
  out << "seed,loss_mode,beta,auroc,aupr,score_skew,log_score_skew\n";
  for (const auto& c : result.cells) {
    out << c.seed << ',' << to_string(c.loss_mode) << ',' << beta_label(c.beta);
    if (c.report) {
      out << ',' << format_number(c.report->auroc) << ',' << format_number(c.report->aupr) << ','
          << format_number(c.report->score_skewness) << ','
          << format_number(c.report->log_score_skewness);
    } else {
      out << ",,,,";
    }
    out << '\n';
  }
}

namespace {

TrainTestSplit load_split(const ExperimentConfig& config, std::uint64_t seed,
                          std::optional<double> beta) {
  if (config.synthetic()) {
    SyntheticSpec spec = std::get<SyntheticSpec>(config.data);
    spec.beta = *beta;
    spec.seed = data_seed(spec.seed, seed);
    return generate(spec);
  }
  const auto& src = std::get<CsvSource>(config.data);
  TrainTestSplit split;
  split.train = load_csv(src.train, src.label_column).normal_rows();
  split.test = load_csv(src.test, src.label_column);
  return split;
}

}  // namespace

CellResult run_cell(const ExperimentConfig& config, std::uint64_t seed, LossMode mode,
                    std::optional<double> beta, const WeightProvider& provider) {
  CellResult cell;
  cell.seed = seed;
  cell.loss_mode = mode;
  cell.beta = beta;

  const TrainTestSplit split = load_split(config, seed, beta);
  TrainConfig train_config = config.train;
  train_config.loss_mode = mode;
  train_config.seed = seed;

  std::vector<double> test_scores;
  const int dim = split.train.dim();
  if (config.model == ModelKind::kAutoencoder) {
    Autoencoder model = Autoencoder::build(dim, config.architecture, seed);
    cell.log = iwl::train(model, split.train, train_config, provider);
    test_scores = ae_scores(model, split.test.features).vector();
  } else {
    DsvddModel model = DsvddModel::build(dim, config.architecture, seed);
    cell.log = iwl::train(model, split.train, train_config, provider);
    test_scores = dsvdd_scores(model, split.test.features).vector();
  }

  metrics::EvalReport report = metrics::evaluate(test_scores, split.test.labels, train_config.iwl.epsilon);
  // Skewness columns describe the training-set score distribution of the
  // final model (the last epoch-end pass).
  const EpochRecord& last = cell.log.epochs.back();
  report.score_skewness = last.score_skewness;
  report.log_score_skewness = last.log_score_skewness;
  cell.report = report;
  return cell;
}

std::vector<GeneratedDataset> cmd_generate(const ExperimentConfig& config) {
  config.validate();
  if (!config.synthetic()) throw std::invalid_argument("generate needs a synthetic data spec");
  ensure_dir(config.output_dir);
  const SyntheticSpec base = std::get<SyntheticSpec>(config.data);

  std::vector<GeneratedDataset> out;
  json entries = json::array();
  for (auto beta : config.betas()) {
    SyntheticSpec spec = base;
    spec.beta = *beta;
    const SyntheticSpec resolved = spec.resolved();
    const TrainTestSplit split = generate(resolved);

    GeneratedDataset g;
    g.beta = *beta;
    const std::string tag = "beta" + format_number(*beta);
    g.train_csv = config.output_dir / ("train_" + tag + ".csv");
    g.test_csv = config.output_dir / ("test_" + tag + ".csv");
    write_csv(g.train_csv, split.train);
    write_csv(g.test_csv, split.test);
    g.train_rows = split.train.size();
    g.test_rows = split.test.size();

    entries.push_back({{"beta", *beta},
                       {"spec", to_json(resolved)},
                       {"train_csv", g.train_csv.filename().string()},
                       {"test_csv", g.test_csv.filename().string()},
                       {"counts",
                        {{"train_majority", split.train.count(Provenance::kMajority)},
                         {"train_minority", split.train.count(Provenance::kMinority)},
                         {"train_rows", g.train_rows},
                         {"test_majority", split.test.count(Provenance::kMajority)},
                         {"test_minority", split.test.count(Provenance::kMinority)},
                         {"test_anomaly", split.test.count(Provenance::kAnomaly)},
                         {"test_rows", g.test_rows}}}});
    out.push_back(std::move(g));
  }
  const json manifest{{"schema_version", kSchemaVersion}, {"seed", base.seed}, {"datasets", entries}};
  write_text_file(config.output_dir / "manifest.json", manifest.dump(2) + "\n");
  return out;
}

RunResult cmd_train(const ExperimentConfig& config) {
  config.validate();
  const std::string started = utc_timestamp();
  const auto t0 = std::chrono::steady_clock::now();

  struct Job {
    std::uint64_t seed;
    LossMode mode;
    std::optional<double> beta;
  };
  std::vector<Job> jobs;
  for (auto beta : config.betas()) {
    for (auto seed : config.seeds) {
      for (auto mode : {LossMode::kMse, LossMode::kIwl}) jobs.push_back({seed, mode, beta});
    }
  }

  RunResult result;
  result.model = config.model;
  result.config = to_json(config);
  result.cells.resize(jobs.size());

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      const Job& job = jobs[i];
      CellResult cell;
      try {
        cell = run_cell(config, job.seed, job.mode, job.beta);
      } catch (const std::exception& e) {
        cell = CellResult{};
        cell.seed = job.seed;
        cell.loss_mode = job.mode;
        cell.beta = job.beta;
        cell.error = e.what();
      }
      result.cells[i] = std::move(cell);
    }
  };
  const int n_threads = std::min<int>(config.threads, static_cast<int>(jobs.size()));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }
  result.aggregates = aggregate(result.cells);

  ensure_dir(config.output_dir);
  ensure_dir(config.output_dir / "logs");
  write_text_file(config.output_dir / "results.json", to_json(result).dump(2) + "\n");
  {
    std::ostringstream csv;
    write_results_csv(csv, result);
    write_text_file(config.output_dir / "results.csv", csv.str());
  }
  for (const auto& c : result.cells) {
    std::ostringstream lines;
    c.log.write_jsonl(lines);
    const std::string name = std::string(to_string(config.model)) + "_beta" +
                             (c.beta ? format_number(*c.beta) : std::string("csv")) + "_seed" +
                             std::to_string(c.seed) + "_" + to_string(c.loss_mode) + ".jsonl";
    write_text_file(config.output_dir / "logs" / name, lines.str());
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const json meta{{"started_utc", started},
                  {"finished_utc", utc_timestamp()},
                  {"wall_seconds", seconds},
                  {"cells", jobs.size()}};
  write_text_file(config.output_dir / "meta.json", meta.dump(2) + "\n");
  return result;
}

std::vector<double> read_score_column(std::istream& in) {
  std::vector<double> scores;
  std::string line;
  std::size_t line_no = 0;
  bool first_content = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos || line.front() == '#') continue;
    const auto cells = split_csv_line(line);
    const auto value = cells.size() == 1 ? parse_number(cells[0]) : std::nullopt;
    if (!value) {
      if (first_content && cells.size() == 1) {
        first_content = false;  // header
        continue;
      }
      throw std::runtime_error("line " + std::to_string(line_no) +
                               ": expected one numeric column, got '" + line + "'");
    }
    first_content = false;
    scores.push_back(*value);
  }
  if (scores.empty()) throw std::runtime_error("no scores found");
  return scores;
}

WeightsOutput cmd_weights(std::istream& scores_csv, std::ostream& weights_csv, const IwlConfig& config) {
  WeightsOutput out;
  out.scores = read_score_column(scores_csv);
  out.weights = compute_weights(ScoreBatch(out.scores), config);
  weights_csv << "# lambda=" << format_number(out.weights.lambda) << '\n'
              << "# skewness=" << format_number(out.weights.skewness) << '\n'
              << "# cap=" << format_number(out.weights.cap) << '\n'
              << "# degenerate=" << (out.weights.degenerate ? 1 : 0) << '\n'
              << "weight\n";
  for (double w : out.weights.weights) weights_csv << format_number(w) << '\n';
  return out;
}

WeightsOutput cmd_weights(const fs::path& scores_csv, const fs::path& weights_csv,
                          const IwlConfig& config) {
  std::ifstream in(scores_csv, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + scores_csv.string());
  std::ostringstream buffer;
  WeightsOutput out;
  try {
    out = cmd_weights(in, buffer, config);
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(scores_csv.string() + ": " + e.what());
  }
  write_text_file(weights_csv, buffer.str());
  return out;
}

Report build_report(const std::vector<RunResult>& results) {
  if (results.empty()) throw std::invalid_argument("report needs at least one result");
  Report report;
  using Key = std::tuple<int, int, std::optional<double>>;  // model, mode, beta
  std::vector<Key> order;
  std::map<Key, std::vector<const Aggregate*>> groups;
  for (const auto& r : results) {
    for (const auto& a : r.aggregates) {
      Key key{static_cast<int>(r.model), static_cast<int>(a.loss_mode), a.beta};
      if (!groups.contains(key)) order.push_back(key);
      groups[key].push_back(&a);
    }
  }
  for (const auto& key : order) {
    const auto& members = groups[key];
    ReportRow row;
    row.model = static_cast<ModelKind>(std::get<0>(key));
    row.loss_mode = static_cast<LossMode>(std::get<1>(key));
    row.beta = std::get<2>(key);
    if (members.size() == 1) {
      const Aggregate& a = *members.front();
      row.n = a.n;
      row.auroc_mean = a.auroc_mean;
      row.auroc_std = a.auroc_std;
      row.aupr_mean = a.aupr_mean;
      row.aupr_std = a.aupr_std;
      row.score_skew_mean = a.score_skew_mean;
      row.log_score_skew_mean = a.log_score_skew_mean;
    } else {
      std::vector<double> auroc, aupr, skew, log_skew;
      for (const auto* a : members) {
        row.n += a->n;
        auroc.push_back(a->auroc_mean);
        aupr.push_back(a->aupr_mean);
        skew.push_back(a->score_skew_mean);
        log_skew.push_back(a->log_score_skew_mean);
      }
      std::tie(row.auroc_mean, row.auroc_std) = mean_and_std(auroc);
      std::tie(row.aupr_mean, row.aupr_std) = mean_and_std(aupr);
      row.score_skew_mean = mean_and_std(skew).first;
      row.log_score_skew_mean = mean_and_std(log_skew).first;
    }
    report.rows.push_back(row);
  }
  for (const auto& mse : report.rows) {
    if (mse.loss_mode != LossMode::kMse) continue;
    for (const auto& iwl : report.rows) {
      if (iwl.loss_mode == LossMode::kIwl && iwl.model == mse.model && same_beta(iwl.beta, mse.beta)) {
        report.deltas.push_back({mse.model, mse.beta, iwl.auroc_mean - mse.auroc_mean,
                                 iwl.aupr_mean - mse.aupr_mean,
                                 iwl.log_score_skew_mean - mse.log_score_skew_mean});
      }
    }
  }
  return report;
}

void write_report_text(std::ostream& out, const Report& report) {
  out << std::left << std::setw(7) << "model" << std::setw(9) << "beta" << std::setw(6) << "mode"
      << std::setw(4) << "n" << std::setw(22) << "auroc" << std::setw(22) << "aupr"
      << "log_skew\n";
  out << std::fixed;
  for (const auto& r : report.rows) {
    std::ostringstream auroc, aupr;
    auroc << std::fixed << std::setprecision(4) << r.auroc_mean << " +/- " << r.auroc_std;
    aupr << std::fixed << std::setprecision(4) << r.aupr_mean << " +/- " << r.aupr_std;
    out << std::setw(7) << to_string(r.model) << std::setw(9) << (r.beta ? beta_label(r.beta) : "-")
        << std::setw(6) << to_string(r.loss_mode) << std::setw(4) << r.n << std::setw(22) << auroc.str()
        << std::setw(22) << aupr.str() << std::setprecision(4) << r.log_score_skew_mean << '\n';
  }
  out << "\nIWL - MSE\n";
  for (const auto& d : report.deltas) {
    const char* mark = d.auroc > 0.0 ? "  <== IWL ahead" : (d.auroc < 0.0 ? "  <== MSE ahead" : "");
    out << std::setw(7) << to_string(d.model) << std::setw(9) << (d.beta ? beta_label(d.beta) : "-")
        << std::showpos << std::setprecision(4) << "d_auroc " << d.auroc << "  d_aupr " << d.aupr
        << "  d_log_skew " << d.log_score_skew << std::noshowpos << mark << '\n';
  }
  out.unsetf(std::ios::fixed);
}

void write_report_csv(std::ostream& out, const Report& report) {
  out << "model,beta,loss_mode,n,auroc_mean,auroc_std,aupr_mean,aupr_std,score_skew_mean,"
         "log_score_skew_mean,delta_auroc,delta_aupr\n";
  for (const auto& r : report.rows) {
    out << to_string(r.model) << ',' << beta_label(r.beta) << ',' << to_string(r.loss_mode) << ','
        << r.n << ',' << format_number(r.auroc_mean) << ',' << format_number(r.auroc_std) << ','
        << format_number(r.aupr_mean) << ',' << format_number(r.aupr_std) << ','
        << format_number(r.score_skew_mean) << ',' << format_number(r.log_score_skew_mean) << ',';
    if (r.loss_mode == LossMode::kIwl) {
      for (const auto& d : report.deltas) {
        if (d.model == r.model && same_beta(d.beta, r.beta)) {
          out << format_number(d.auroc) << ',' << format_number(d.aupr);
        }
      }
    } else {
      out << ',';
    }
    out << '\n';
  }
}

Report cmd_report(const std::vector<fs::path>& result_files, const std::optional<fs::path>& out_dir,
                  std::ostream& text_out) {
  if (result_files.empty()) throw std::invalid_argument("report needs at least one result file");
  std::vector<RunResult> results;
  for (const auto& path : result_files) results.push_back(load_run_result(path));
  const Report report = build_report(results);
  write_report_text(text_out, report);
  if (out_dir) {
    ensure_dir(*out_dir);
    std::ostringstream text, csv;
    write_report_text(text, report);
    write_report_csv(csv, report);
    write_text_file(*out_dir / "report.txt", text.str());
    write_text_file(*out_dir / "report.csv", csv.str());
  }
  return report;
}

}  // namespace iwl::experiment
