#pragma once

#include <span>
#include <vector>

#include "iwl/stats.hpp"

namespace iwl {

struct IwlConfig {
  double epsilon = 1e-4;
  double alpha = 4.0;
  double t0 = 20.0;
  // Rescale raw density ratios to mean 1 before clipping. Off by default;
  // kept for ablations.
  bool normalize = false;

  void validate() const;
};

// Importance weights aligned with the batch they were computed from.
// Weights are data: nothing downstream differentiates through them.
struct WeightVector {
  std::vector<double> weights;
  double cap = 0.0;

  // Diagnostics of the run that produced the weights.
  double skewness = 0.0;
  double lambda = 1.0;
  bool degenerate = false;

  std::size_t size() const { return weights.size(); }
  static WeightVector uniform(std::size_t n, double cap);
};

// Per-batch importance weights:
//   cap  = max(|skew(s)|, eps)
//   s    = s - min(s) + eps
//   b    = BoxCox(s, lambda*)
//   w    = N(b; trimmed fit of b) / N(s; trimmed fit of s)
//   cap  = min(alpha * cap, t0)
//   w    = clip(w, 0, cap)
// A constant batch yields unit weights with cap t0.
WeightVector compute_weights(const ScoreBatch& scores, const IwlConfig& config);
WeightVector compute_weights(std::span<const double> scores, const IwlConfig& config);

// (1/N) sum(w_i * loss_i)
double weighted_loss(std::span<const double> per_sample_losses, const WeightVector& weights);

}  // namespace iwl
