#include "iwl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "iwl/stats.hpp"

namespace iwl::metrics {
namespace {

struct ClassCounts {
  std::size_t positives = 0;
  std::size_t negatives = 0;
};

ClassCounts check_inputs(std::span<const double> scores, std::span<const Label> labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("scores/labels length mismatch");
  ClassCounts c;
  for (auto l : labels) (l == Label::kAnomaly ? c.positives : c.negatives)++;
  if (c.positives == 0 || c.negatives == 0) {
    throw std::invalid_argument("metric needs both normal and anomaly samples");
  }
  for (double s : scores) {
    if (std::isnan(s)) throw std::invalid_argument("NaN score");
  }
  return c;
}

std::vector<std::size_t> descending_order(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

}  // namespace

double auroc(std::span<const double> scores, std::span<const Label> labels) {
  const auto counts = check_inputs(scores, labels);
  auto order = descending_order(scores);
  std::reverse(order.begin(), order.end());  // ascending

  // Sum of midranks of the positives.
  double positive_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) {
      if (labels[order[k]] == Label::kAnomaly) positive_rank_sum += midrank;
    }
    i = j + 1;
  }
  const double p = static_cast<double>(counts.positives);
  const double n = static_cast<double>(counts.negatives);
  return (positive_rank_sum - p * (p + 1.0) / 2.0) / (p * n);
}

double aupr(std::span<const double> scores, std::span<const Label> labels) {
  const auto counts = check_inputs(scores, labels);
  const auto order = descending_order(scores);
  const double total_pos = static_cast<double>(counts.positives);

  double ap = 0.0;
  std::size_t tp = 0;
  std::size_t seen = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t group_tp = 0;
    std::size_t j = i;
    for (; j < order.size() && scores[order[j]] == scores[order[i]]; ++j) {
      group_tp += (labels[order[j]] == Label::kAnomaly);
    }
    tp += group_tp;
    seen = j;
    if (group_tp > 0) {
      const double precision = static_cast<double>(tp) / static_cast<double>(seen);
      ap += precision * static_cast<double>(group_tp) / total_pos;
    }
    i = j;
  }
  return ap;
}

double log_score_skewness(std::span<const double> scores) {
  std::vector<double> logs;
  logs.reserve(scores.size());
  for (double s : scores) {
    if (!(s > 0.0)) throw std::domain_error("log skewness needs strictly positive scores");
    logs.push_back(std::log(s));
  }
  return stats::skewness(logs);
}

double guarded_log_skewness(std::span<const double> scores, double epsilon) {
  const bool positive = std::all_of(scores.begin(), scores.end(), [](double s) { return s > 0.0; });
  if (positive) return log_score_skewness(scores);
  const auto shifted =
      stats::shift_positive(ScoreBatch(std::vector<double>(scores.begin(), scores.end())), epsilon);
  return log_score_skewness(shifted.values());
}

EvalReport evaluate(std::span<const double> scores, std::span<const Label> labels, double epsilon) {
  EvalReport report;
  report.auroc = auroc(scores, labels);
  report.aupr = aupr(scores, labels);
  std::vector<double> normal_scores;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] == Label::kNormal) normal_scores.push_back(scores[i]);
  }
  report.n_normal = normal_scores.size();
  report.n_anomaly = scores.size() - normal_scores.size();
  if (normal_scores.size() >= 2) {
    try {
      report.score_skewness = stats::skewness(normal_scores);
      report.log_score_skewness = guarded_log_skewness(normal_scores, epsilon);
    } catch (const DegenerateSample&) {
      report.score_skewness = 0.0;
      report.log_score_skewness = 0.0;
    }
  }
  return report;
}

nlohmann::json to_json(const EvalReport& r) {
  return {{"auroc", r.auroc},
          {"aupr", r.aupr},
          {"score_skewness", r.score_skewness},
          {"log_score_skewness", r.log_score_skewness},
          {"n_normal", r.n_normal},
          {"n_anomaly", r.n_anomaly}};
}

EvalReport eval_report_from_json(const nlohmann::json& j) {
  EvalReport r;
  r.auroc = j.at("auroc").get<double>();
  r.aupr = j.at("aupr").get<double>();
  r.score_skewness = j.at("score_skewness").get<double>();
  r.log_score_skewness = j.at("log_score_skewness").get<double>();
  r.n_normal = j.at("n_normal").get<std::size_t>();
  r.n_anomaly = j.at("n_anomaly").get<std::size_t>();
  return r;
}

}  // namespace iwl::metrics
