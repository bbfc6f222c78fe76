#include "iwl/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace iwl {

ScoreBatch::ScoreBatch(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) throw std::invalid_argument("empty sample");
  for (double v : values_) {
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite score");
  }
}

namespace stats {
namespace {

void require_nonempty(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("empty sample");
}

double sum_of_logs(std::span<const double> scores) {
  double total = 0.0;
  for (double s : scores) total += std::log(s);
  return total;
}

}  // namespace

double mean(std::span<const double> values) {
  require_nonempty(values);
  return std::accumulate(values.begin(), values.end(), 0.0) /
         static_cast<double>(values.size());
}

double variance(std::span<const double> values) {
  const double mu = mean(values);
  double acc = 0.0;
  for (double v : values) acc += (v - mu) * (v - mu);
  return acc / static_cast<double>(values.size());
}

double median(std::span<const double> values) {
  require_nonempty(values);
  std::vector<double> work(values.begin(), values.end());
  const std::size_t n = work.size();
  const std::size_t mid = n / 2;
  std::nth_element(work.begin(), work.begin() + mid, work.end());
  const double upper = work[mid];
  if (n % 2 == 1) return upper;
  const double lower = *std::max_element(work.begin(), work.begin() + mid);
  return 0.5 * (lower + upper);
}

double mad(std::span<const double> values) {
  const double center = median(values);
  std::vector<double> deviations;
  deviations.reserve(values.size());
  for (double v : values) deviations.push_back(std::abs(v - center));
  return median(deviations);
}

double skewness(std::span<const double> values) {
  if (values.size() < 2) throw std::invalid_argument("skewness needs at least 2 values");
  const double mu = mean(values);
  const double var = variance(values);
  if (!(var > 0.0)) throw DegenerateSample();
  const double sigma = std::sqrt(var);
  double acc = 0.0;
  for (double v : values) {
    const double z = (v - mu) / sigma;
    acc += z * z * z;
  }
  return acc / static_cast<double>(values.size());
}

double outlier_threshold(std::span<const double> values) {
  return kModifiedZCutoff * mad(values) / kMadToSigma + median(values);
}

TrimmedGaussian trimmed_gaussian_fit(std::span<const double> values,
                                     double variance_floor_epsilon) {
  if (values.size() < 2) throw std::invalid_argument("trimmed fit needs at least 2 values");
  TrimmedGaussian fit;
  fit.threshold = outlier_threshold(values);

  std::vector<double> retained;
  retained.reserve(values.size());
  for (double v : values) {
    if (v <= fit.threshold) retained.push_back(v);
  }
  if (retained.size() >= 2) {
    fit.mu = mean(retained);
    fit.sigma2 = variance(retained);
    fit.retained_count = retained.size();
  }
  if (retained.size() < 2 || !(fit.sigma2 > 0.0)) {
    fit.fell_back = true;
    fit.mu = mean(values);
    fit.sigma2 = variance(values);
    fit.retained_count = values.size();
    if (!(fit.sigma2 > 0.0)) fit.sigma2 = variance_floor_epsilon * variance_floor_epsilon;
  }
  return fit;
}

double gaussian_pdf(double value, double mu, double sigma2) {
  constexpr double kTwoPi = 6.283185307179586476925286766559;
  const double d = value - mu;
  const double p = std::exp(-d * d / (2.0 * sigma2)) / std::sqrt(kTwoPi * sigma2);
  return std::max(p, std::numeric_limits<double>::min());
}

std::vector<double> gaussian_pdf(std::span<const double> values,
                                 const TrimmedGaussian& fit) {
  std::vector<double> out;
  out.reserve(values.size());
  for (double v : values) out.push_back(gaussian_pdf(v, fit.mu, fit.sigma2));
  return out;
}

ScoreBatch shift_positive(const ScoreBatch& scores, double epsilon) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  const auto values = scores.values();
  const double lowest = *std::min_element(values.begin(), values.end());
  std::vector<double> shifted;
  shifted.reserve(values.size());
  for (double s : values) shifted.push_back(s - lowest + epsilon);
  return ScoreBatch(std::move(shifted));
}

double box_cox_transform(double score, double lambda) {
  if (!(score > 0.0)) throw std::domain_error("Box-Cox domain violation");
  const double log_s = std::log(score);
  if (lambda == 0.0) return log_s;
  // expm1 keeps the small-lambda limit continuous with the log branch.
  return std::expm1(lambda * log_s) / lambda;
}

std::vector<double> box_cox_transform(std::span<const double> scores, double lambda) {
  std::vector<double> out;
  out.reserve(scores.size());
  for (double s : scores) out.push_back(box_cox_transform(s, lambda));
  return out;
}

double box_cox_log_likelihood(std::span<const double> scores, double lambda) {
  if (scores.size() < 2) throw std::invalid_argument("log-likelihood needs at least 2 scores");
  const auto transformed = box_cox_transform(scores, lambda);
  for (double b : transformed) {
    if (!std::isfinite(b)) return -std::numeric_limits<double>::infinity();
  }
  const auto [lo, hi] = std::minmax_element(transformed.begin(), transformed.end());
  if (*lo == *hi) return -std::numeric_limits<double>::infinity();
  const double var = variance(transformed);
  if (!(var > 0.0) || !std::isfinite(var)) return -std::numeric_limits<double>::infinity();
  const double n = static_cast<double>(scores.size());
  return -0.5 * n * std::log(var) + (lambda - 1.0) * sum_of_logs(scores);
}

BoxCoxFit fit_box_cox_lambda(std::span<const double> scores) {
  if (scores.size() < 2) throw std::invalid_argument("Box-Cox fit needs at least 2 scores");
  for (double s : scores) {
    if (!(s > 0.0)) throw std::domain_error("Box-Cox domain violation");
  }
  const auto [lo, hi] = std::minmax_element(scores.begin(), scores.end());
  if (*lo == *hi) throw DegenerateSample();

  constexpr double step = (kLambdaMax - kLambdaMin) / (kLambdaGridPoints - 1);
  auto grid_point = [&](int k) { return kLambdaMin + step * k; };

  int best_k = 0;
  double best_ll = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < kLambdaGridPoints; ++k) {
    const double ll = box_cox_log_likelihood(scores, grid_point(k));
    if (ll > best_ll) {
      best_ll = ll;
      best_k = k;
    }
  }
  if (!std::isfinite(best_ll)) throw DegenerateSample();

  BoxCoxFit fit{grid_point(best_k), best_ll};

  // Golden-section search on the bracket around the best grid point.
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = grid_point(std::max(best_k - 1, 0));
  double b = grid_point(std::min(best_k + 1, kLambdaGridPoints - 1));
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = box_cox_log_likelihood(scores, c);
  double fd = box_cox_log_likelihood(scores, d);
  while (b - a >= kLambdaTolerance) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = box_cox_log_likelihood(scores, c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = box_cox_log_likelihood(scores, d);
    }
  }
  const double refined = 0.5 * (a + b);
  const double refined_ll = box_cox_log_likelihood(scores, refined);
  if (refined_ll > fit.log_likelihood) fit = {refined, refined_ll};
  return fit;
}

}  // namespace stats
}  // namespace iwl
