#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace iwl {

// Raised when a sample has no spread (constant values) and a statistic that
// divides by the spread is requested. Callers are expected to catch it and
// take their fallback path.
class DegenerateSample : public std::domain_error {
 public:
  explicit DegenerateSample(const std::string& what = "degenerate sample")
      : std::domain_error(what) {}
};

// Per-sample anomaly scores for one mini-batch. Non-empty, every value finite.
class ScoreBatch {
 public:
  ScoreBatch() = default;
  explicit ScoreBatch(std::vector<double> values);

  std::span<const double> values() const { return values_; }
  const std::vector<double>& vector() const { return values_; }
  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }

 private:
  std::vector<double> values_;
};

struct BoxCoxFit {
  double lambda = 1.0;
  double log_likelihood = 0.0;
};

// Moment fit of the values at or below the modified z-score threshold.
struct TrimmedGaussian {
  double mu = 0.0;
  double sigma2 = 1.0;
  double threshold = 0.0;
  std::size_t retained_count = 0;
  // True when the trimmed set was unusable and the untrimmed sample (or the
  // epsilon^2 variance floor) was used instead.
  bool fell_back = false;
};

namespace stats {

inline constexpr double kModifiedZCutoff = 3.5;
inline constexpr double kMadToSigma = 0.6745;

inline constexpr double kLambdaMin = -5.0;
inline constexpr double kLambdaMax = 5.0;
inline constexpr int kLambdaGridPoints = 101;
inline constexpr double kLambdaTolerance = 1e-4;

double mean(std::span<const double> values);
// Divisor N.
double variance(std::span<const double> values);

// Even length: mean of the two central order statistics.
double median(std::span<const double> values);
double mad(std::span<const double> values);

// (1/N) sum(((x - mu) / sigma)^3) with the divisor-N standard deviation.
// Throws DegenerateSample on zero variance.
double skewness(std::span<const double> values);

// Modified z-score cut: median + 3.5 * MAD / 0.6745.
double outlier_threshold(std::span<const double> values);

// `variance_floor_epsilon` is squared and used as sigma2 when even the
// untrimmed sample is constant.
TrimmedGaussian trimmed_gaussian_fit(std::span<const double> values,
                                     double variance_floor_epsilon = 1e-4);

// Normal density under `fit`, floored at the smallest positive normal double.
std::vector<double> gaussian_pdf(std::span<const double> values,
                                 const TrimmedGaussian& fit);
double gaussian_pdf(double value, double mu, double sigma2);

// s - min(s) + epsilon. Applied unconditionally.
ScoreBatch shift_positive(const ScoreBatch& scores, double epsilon);

std::vector<double> box_cox_transform(std::span<const double> scores,
                                      double lambda);
double box_cox_transform(double score, double lambda);

// Profile Gaussian log-likelihood of the transformed sample:
//   -(N/2) ln(var_lambda) + (lambda - 1) sum(ln s_i)
// Returns -infinity when the transformed sample has zero (or non-finite)
// variance.
double box_cox_log_likelihood(std::span<const double> scores, double lambda);

// Maximizes box_cox_log_likelihood over [-5, 5]: 101-point grid, then golden
// section around the best grid point. The result never scores below the
// best grid point. Throws DegenerateSample for constant input.
BoxCoxFit fit_box_cox_lambda(std::span<const double> scores);

}  // namespace stats
}  // namespace iwl
