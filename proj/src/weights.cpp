#include "iwl/weights.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace iwl {

void IwlConfig::validate() const {
  if (!(epsilon > 0.0)) throw std::invalid_argument("iwl.epsilon must be > 0");
  if (!(alpha > 0.0)) throw std::invalid_argument("iwl.alpha must be > 0");
  if (!(t0 > 0.0)) throw std::invalid_argument("iwl.t0 must be > 0");
}

WeightVector WeightVector::uniform(std::size_t n, double cap) {
  WeightVector w;
  w.weights.assign(n, 1.0);
  w.cap = cap;
  return w;
}

WeightVector compute_weights(const ScoreBatch& scores, const IwlConfig& config) {
  config.validate();
  if (scores.size() < 2) throw std::invalid_argument("weights need a batch of at least 2 scores");

  WeightVector out;
  double cap = 0.0;
  try {
    out.skewness = stats::skewness(scores.values());
    cap = std::max(std::abs(out.skewness), config.epsilon);

    const ScoreBatch shifted = stats::shift_positive(scores, config.epsilon);
    out.lambda = stats::fit_box_cox_lambda(shifted.values()).lambda;
    const auto transformed = stats::box_cox_transform(shifted.values(), out.lambda);

    const auto fit_s = stats::trimmed_gaussian_fit(shifted.values(), config.epsilon);
    const auto fit_b = stats::trimmed_gaussian_fit(transformed, config.epsilon);
    const auto p_s = stats::gaussian_pdf(shifted.values(), fit_s);
    const auto p_b = stats::gaussian_pdf(transformed, fit_b);

    out.weights.resize(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
      const double denom = std::max(p_s[i], std::numeric_limits<double>::min());
      out.weights[i] = p_b[i] / denom;
    }
  } catch (const DegenerateSample&) {
    WeightVector fallback = WeightVector::uniform(scores.size(), config.t0);
    fallback.degenerate = true;
    return fallback;
  }

  if (config.normalize) {
    const double total = std::accumulate(out.weights.begin(), out.weights.end(), 0.0);
    if (total > 0.0 && std::isfinite(total)) {
      const double scale = static_cast<double>(out.weights.size()) / total;
      for (double& w : out.weights) w *= scale;
    }
  }

  out.cap = std::min(config.alpha * cap, config.t0);
  for (double& w : out.weights) {
    w = std::isfinite(w) ? std::clamp(w, 0.0, out.cap) : out.cap;
  }
  return out;
}

WeightVector compute_weights(std::span<const double> scores, const IwlConfig& config) {
  return compute_weights(ScoreBatch(std::vector<double>(scores.begin(), scores.end())), config);
}

double weighted_loss(std::span<const double> per_sample_losses, const WeightVector& weights) {
  if (per_sample_losses.size() != weights.size()) {
    throw std::invalid_argument("loss/weight length mismatch");
  }
  if (per_sample_losses.empty()) throw std::invalid_argument("empty batch");
  double total = 0.0;
  for (std::size_t i = 0; i < per_sample_losses.size(); ++i) {
    total += weights.weights[i] * per_sample_losses[i];
  }
  return total / static_cast<double>(per_sample_losses.size());
}

}  // namespace iwl
