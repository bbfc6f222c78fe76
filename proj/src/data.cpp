#include "iwl/data.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace iwl {

const char* to_string(Provenance p) {
  switch (p) {
    case Provenance::kMajority: return "majority";
    case Provenance::kMinority: return "minority";
    case Provenance::kAnomaly: return "anomaly";
  }
  return "?";
}

std::size_t LabeledDataset::count(Provenance p) const {
  std::size_t n = 0;
  for (auto v : provenance) n += (v == p);
  return n;
}

std::size_t LabeledDataset::count(Label l) const {
  std::size_t n = 0;
  for (auto v : labels) n += (v == l);
  return n;
}

LabeledDataset LabeledDataset::normal_rows() const {
  LabeledDataset out;
  std::vector<Eigen::Index> keep;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == Label::kNormal) keep.push_back(static_cast<Eigen::Index>(i));
  }
  out.features.resize(static_cast<Eigen::Index>(keep.size()), features.cols());
  for (std::size_t r = 0; r < keep.size(); ++r) {
    out.features.row(static_cast<Eigen::Index>(r)) = features.row(keep[r]);
    out.labels.push_back(Label::kNormal);
    out.provenance.push_back(provenance[static_cast<std::size_t>(keep[r])]);
  }
  return out;
}

void LabeledDataset::validate() const {
  if (static_cast<std::size_t>(features.rows()) != labels.size() ||
      labels.size() != provenance.size()) {
    throw std::invalid_argument("dataset: features/labels/provenance length mismatch");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if ((labels[i] == Label::kAnomaly) != (provenance[i] == Provenance::kAnomaly)) {
      throw std::invalid_argument("dataset: label contradicts provenance at row " + std::to_string(i));
    }
  }
}

int SyntheticSpec::n_minority() const {
  return static_cast<int>(std::floor(static_cast<double>(n_majority) / beta));
}

SyntheticSpec SyntheticSpec::resolved() const {
  SyntheticSpec s = *this;
  if (s.dim < 1) throw std::invalid_argument("spec: dim must be >= 1");
  if (s.majority_mean.empty()) {
    s.majority_mean.assign(static_cast<std::size_t>(s.dim), 0.0);
    s.majority_mean[0] = -3.0 * s.cluster_std;
  }
  if (s.minority_mean.empty()) {
    s.minority_mean.assign(static_cast<std::size_t>(s.dim), 0.0);
    s.minority_mean[0] = 3.0 * s.cluster_std;
  }
  if (s.anomaly_low.empty()) s.anomaly_low.assign(static_cast<std::size_t>(s.dim), -10.0);
  if (s.anomaly_high.empty()) s.anomaly_high.assign(static_cast<std::size_t>(s.dim), 10.0);
  s.validate();
  return s;
}

void SyntheticSpec::validate() const {
  const auto d = static_cast<std::size_t>(dim);
  if (dim < 1) throw std::invalid_argument("spec: dim must be >= 1");
  if (n_majority < 1) throw std::invalid_argument("spec: n_majority must be >= 1");
  if (!(beta >= 1.0) || !std::isfinite(beta)) throw std::invalid_argument("spec: beta must be >= 1");
  if (n_minority() < 1) throw std::invalid_argument("spec: floor(n_majority / beta) must be >= 1");
  if (!(cluster_std > 0.0)) throw std::invalid_argument("spec: cluster_std must be > 0");
  if (n_anomaly_eval < 0 || n_test_majority < 0 || n_test_minority < 0) {
    throw std::invalid_argument("spec: counts must be non-negative");
  }
  if (majority_mean.size() != d || minority_mean.size() != d || anomaly_low.size() != d ||
      anomaly_high.size() != d) {
    throw std::invalid_argument("spec: mean/box vectors must have length dim");
  }
  if (majority_mean == minority_mean) throw std::invalid_argument("spec: cluster means must differ");
  for (std::size_t j = 0; j < d; ++j) {
    if (!(anomaly_low[j] < anomaly_high[j])) throw std::invalid_argument("spec: empty anomaly box");
  }
}

nlohmann::json to_json(const SyntheticSpec& spec) {
  return {{"dim", spec.dim},
          {"n_majority", spec.n_majority},
          {"beta", spec.beta},
          {"majority_mean", spec.majority_mean},
          {"minority_mean", spec.minority_mean},
          {"cluster_std", spec.cluster_std},
          {"n_anomaly_eval", spec.n_anomaly_eval},
          {"anomaly_low", spec.anomaly_low},
          {"anomaly_high", spec.anomaly_high},
          {"n_test_majority", spec.n_test_majority},
          {"n_test_minority", spec.n_test_minority},
          {"seed", spec.seed}};
}

SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j) {
  SyntheticSpec s;
  s.dim = j.value("dim", s.dim);
  s.n_majority = j.value("n_majority", s.n_majority);
  s.beta = j.value("beta", s.beta);
  s.majority_mean = j.value("majority_mean", s.majority_mean);
  s.minority_mean = j.value("minority_mean", s.minority_mean);
  s.cluster_std = j.value("cluster_std", s.cluster_std);
  s.n_anomaly_eval = j.value("n_anomaly_eval", s.n_anomaly_eval);
  s.anomaly_low = j.value("anomaly_low", s.anomaly_low);
  s.anomaly_high = j.value("anomaly_high", s.anomaly_high);
  s.n_test_majority = j.value("n_test_majority", s.n_test_majority);
  s.n_test_minority = j.value("n_test_minority", s.n_test_minority);
  s.seed = j.value("seed", s.seed);
  return s;
}

namespace {

void append_cluster(std::mt19937_64& rng, const std::vector<double>& center, double std_dev,
                    int count, Provenance tag, std::vector<std::vector<double>>& rows,
                    std::vector<Provenance>& tags) {
  std::normal_distribution<double> noise(0.0, std_dev);
  for (int i = 0; i < count; ++i) {
    std::vector<double> row(center.size());
    for (std::size_t j = 0; j < center.size(); ++j) row[j] = center[j] + noise(rng);
    rows.push_back(std::move(row));
    tags.push_back(tag);
  }
}

double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) d += (a[j] - b[j]) * (a[j] - b[j]);
  return d;
}

LabeledDataset assemble(const std::vector<std::vector<double>>& rows,
                        const std::vector<Provenance>& tags, int dim) {
  LabeledDataset data;
  data.features.resize(static_cast<Eigen::Index>(rows.size()), dim);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (int j = 0; j < dim; ++j) {
      data.features(static_cast<Eigen::Index>(r), j) = rows[r][static_cast<std::size_t>(j)];
    }
    data.labels.push_back(tags[r] == Provenance::kAnomaly ? Label::kAnomaly : Label::kNormal);
  }
  data.provenance = tags;
  return data;
}

}  // namespace

TrainTestSplit generate(const SyntheticSpec& raw_spec) {
  const SyntheticSpec spec = raw_spec.resolved();
  std::mt19937_64 rng(spec.seed);

  std::vector<std::vector<double>> rows;
  std::vector<Provenance> tags;
  append_cluster(rng, spec.majority_mean, spec.cluster_std, spec.n_majority, Provenance::kMajority,
                 rows, tags);
  append_cluster(rng, spec.minority_mean, spec.cluster_std, spec.n_minority(), Provenance::kMinority,
                 rows, tags);
  TrainTestSplit split;
  split.train = assemble(rows, tags, spec.dim);

  rows.clear();
  tags.clear();
  const int test_major = spec.n_test_majority > 0 ? spec.n_test_majority : spec.n_majority;
  const int test_minor = spec.n_test_minority > 0 ? spec.n_test_minority : spec.n_minority();
  append_cluster(rng, spec.majority_mean, spec.cluster_std, test_major, Provenance::kMajority, rows,
                 tags);
  append_cluster(rng, spec.minority_mean, spec.cluster_std, test_minor, Provenance::kMinority, rows,
                 tags);

  const double r2 = spec.exclusion_radius() * spec.exclusion_radius();
  std::vector<std::uniform_real_distribution<double>> axes;
  for (int j = 0; j < spec.dim; ++j) {
    axes.emplace_back(spec.anomaly_low[static_cast<std::size_t>(j)],
                      spec.anomaly_high[static_cast<std::size_t>(j)]);
  }
  const long max_attempts = 10000L * std::max(spec.n_anomaly_eval, 1);
  long attempts = 0;
  for (int i = 0; i < spec.n_anomaly_eval;) {
    if (++attempts > max_attempts) {
      throw std::invalid_argument("spec: anomaly box is (almost) covered by the exclusion balls");
    }
    std::vector<double> row(static_cast<std::size_t>(spec.dim));
    for (int j = 0; j < spec.dim; ++j) row[static_cast<std::size_t>(j)] = axes[static_cast<std::size_t>(j)](rng);
    if (squared_distance(row, spec.majority_mean) <= r2 ||
        squared_distance(row, spec.minority_mean) <= r2) {
      continue;
    }
    rows.push_back(std::move(row));
    tags.push_back(Provenance::kAnomaly);
    ++i;
  }
  split.test = assemble(rows, tags, spec.dim);
  return split;
}

std::string format_number(double value) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream stream(line);
  while (std::getline(stream, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::optional<double> parse_number(const std::string& cell) {
  std::size_t begin = cell.find_first_not_of(" \t\r");
  std::size_t end = cell.find_last_not_of(" \t\r");
  if (begin == std::string::npos) return std::nullopt;
  const char* first = cell.data() + begin;
  const char* last = cell.data() + end + 1;
  if (*first == '+') ++first;
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || !std::isfinite(value)) return std::nullopt;
  return value;
}

void write_csv(std::ostream& out, const LabeledDataset& data, bool with_label) {
  for (int j = 0; j < data.dim(); ++j) out << (j ? "," : "") << 'f' << j;
  if (with_label) out << (data.dim() ? "," : "") << "label";
  out << '\n';
  for (Eigen::Index r = 0; r < data.features.rows(); ++r) {
    for (int j = 0; j < data.dim(); ++j) out << (j ? "," : "") << format_number(data.features(r, j));
    if (with_label) {
      out << ',' << (data.labels[static_cast<std::size_t>(r)] == Label::kAnomaly ? 1 : 0);
    }
    out << '\n';
  }
}

void write_csv(const std::filesystem::path& path, const LabeledDataset& data, bool with_label) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_csv(out, data, with_label);
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

LabeledDataset parse_csv(std::istream& in, const std::optional<std::string>& label_column) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw std::runtime_error("csv: missing header");
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_csv_line(line);

  std::optional<std::size_t> label_idx;
  if (label_column) {
    for (std::size_t j = 0; j < header.size(); ++j) {
      if (header[j] == *label_column) label_idx = j;
    }
    if (!label_idx) throw std::runtime_error("csv: label column '" + *label_column + "' not in header");
  }
  const std::size_t width = header.size();
  const std::size_t n_features = width - (label_idx ? 1 : 0);
  if (n_features == 0) throw std::runtime_error("csv: no feature columns");

  std::vector<double> flat;
  LabeledDataset data;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    ++row;
    const auto cells = split_csv_line(line);
    const std::string where = "csv row " + std::to_string(row) + " (line " + std::to_string(line_no) + ")";
    if (cells.size() != width) {
      throw std::runtime_error(where + ": expected " + std::to_string(width) + " cells, got " +
                               std::to_string(cells.size()));
    }
    Label label = Label::kNormal;
    for (std::size_t j = 0; j < width; ++j) {
      if (label_idx && j == *label_idx) {
        const auto v = parse_number(cells[j]);
        if (!v || (*v != 0.0 && *v != 1.0)) {
          throw std::runtime_error(where + ": label must be 0 or 1, got '" + cells[j] + "'");
        }
        label = *v == 1.0 ? Label::kAnomaly : Label::kNormal;
        continue;
      }
      const auto v = parse_number(cells[j]);
      if (!v) {
        throw std::runtime_error(where + ": non-numeric cell '" + cells[j] + "' in column " +
                                 header[j]);
      }
      flat.push_back(*v);
    }
    data.labels.push_back(label);
    data.provenance.push_back(label == Label::kAnomaly ? Provenance::kAnomaly : Provenance::kMajority);
  }
  if (row == 0) throw std::runtime_error("csv: no data rows");
  data.features = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      flat.data(), static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(n_features));
  return data;
}

LabeledDataset load_csv(const std::filesystem::path& path,
                        const std::optional<std::string>& label_column) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return parse_csv(in, label_column);
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

}  // namespace iwl
