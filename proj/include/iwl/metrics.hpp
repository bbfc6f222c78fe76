#pragma once

#include <span>
#include <vector>

#include "iwl/data.hpp"
#include "json.hpp"

namespace iwl::metrics {

// Probability that a random anomaly outscores a random normal, ties
// counted as 1/2 (midrank Mann-Whitney statistic).
double auroc(std::span<const double> scores, std::span<const Label> labels);

// Average precision with anomalies as the positive class. Scores are swept
// in descending order and tied scores enter as one threshold.
double aupr(std::span<const double> scores, std::span<const Label> labels);

// Skewness of ln(scores). Scores must be strictly positive.
double log_score_skewness(std::span<const double> scores);

struct EvalReport {
  double auroc = 0.0;
  double aupr = 0.0;
  double score_skewness = 0.0;
  double log_score_skewness = 0.0;
  std::size_t n_normal = 0;
  std::size_t n_anomaly = 0;
};

// Skewness fields are taken over the normal rows. When some score is not
// strictly positive, the log skewness is taken after s - min(s) + epsilon.
EvalReport evaluate(std::span<const double> scores, std::span<const Label> labels,
                    double epsilon = 1e-4);

// Skewness of ln(s) with the same non-positive guard as evaluate().
double guarded_log_skewness(std::span<const double> scores, double epsilon = 1e-4);

nlohmann::json to_json(const EvalReport& report);
EvalReport eval_report_from_json(const nlohmann::json& j);

}  // namespace iwl::metrics
