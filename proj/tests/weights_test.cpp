#include "iwl/weights.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "oracles.hpp"

namespace iwl {
namespace {

// Right-skewed mixture: a bulk plus a sparse far cluster.
std::vector<double> mixture_batch(std::size_t n, std::uint64_t seed, double tail_fraction = 0.05) {
  std::mt19937_64 rng(seed);
  std::gamma_distribution<double> bulk(4.0, 0.5);
  std::normal_distribution<double> tail(8.0, 1.0);
  std::bernoulli_distribution pick(tail_fraction);
  std::vector<double> v(n);
  for (auto& x : v) x = pick(rng) ? std::abs(tail(rng)) : bulk(rng);
  return v;
}

std::vector<std::vector<double>> assorted_batches() {
  std::vector<std::vector<double>> out;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    out.push_back(oracle::exponential_sample(64, seed));
    out.push_back(oracle::lognormal_sample(64, seed + 100));
    out.push_back(oracle::normal_sample(64, seed + 200, 5.0, 1.0));
    out.push_back(mixture_batch(128, seed + 300));
    auto heavy = oracle::lognormal_sample(32, seed + 400);
    for (auto& x : heavy) x = std::pow(x, 4);
    out.push_back(heavy);
    auto negative = oracle::normal_sample(16, seed + 500, -3.0, 2.0);
    out.push_back(negative);
  }
  out.push_back({0.0, 1.0});
  out.push_back({5.0, 5.0, 5.0, 1e6});
  return out;
}

TEST(IwlConfig, DefaultsAndValidation) {
  const IwlConfig c;
  EXPECT_EQ(c.epsilon, 1e-4);
  EXPECT_EQ(c.alpha, 4.0);
  EXPECT_EQ(c.t0, 20.0);
  EXPECT_FALSE(c.normalize);
  EXPECT_NO_THROW(c.validate());
  EXPECT_THROW((IwlConfig{.epsilon = 0}.validate()), std::invalid_argument);
  EXPECT_THROW((IwlConfig{.alpha = -1}.validate()), std::invalid_argument);
  EXPECT_THROW((IwlConfig{.t0 = 0}.validate()), std::invalid_argument);
}

TEST(ComputeWeights, ConstantBatchFallsBackToUnitWeights) {
  const auto w = compute_weights(ScoreBatch({2, 2, 2, 2}), IwlConfig{});
  EXPECT_EQ(w.weights, std::vector<double>(4, 1.0));
  EXPECT_EQ(w.cap, 20.0);
  EXPECT_TRUE(w.degenerate);
}

TEST(ComputeWeights, RejectsSingletonBatch) {
  EXPECT_THROW(compute_weights(ScoreBatch({1.0}), IwlConfig{}), std::invalid_argument);
}

TEST(ComputeWeights, MatchesLineByLineReference) {
  const auto scores = oracle::exponential_sample(256, 3);
  const auto w = compute_weights(ScoreBatch(scores), IwlConfig{});
  double ref_cap = 0;
  const auto ref = oracle::reference_weights(scores, 4.0, 20.0, 1e-4, &ref_cap);
  EXPECT_NEAR(w.cap, ref_cap, 1e-10 * ref_cap);
  ASSERT_EQ(w.size(), ref.size());
  for (std::size_t i = 0; i < ref.size(); ++i) {
    EXPECT_LE(std::abs(w.weights[i] - ref[i]), 1e-10 * std::max(std::abs(ref[i]), 1e-300)) << i;
  }
}

TEST(ComputeWeights, CapLawAndNonnegativity) {
  const IwlConfig config;
  for (const auto& batch : assorted_batches()) {
    const auto w = compute_weights(ScoreBatch(batch), config);
    ASSERT_EQ(w.size(), batch.size());
    const double skew = oracle::plain_skewness(batch);
    const double expected_cap =
        w.degenerate ? config.t0 : std::min(config.alpha * std::max(std::abs(w.skewness), config.epsilon), config.t0);
    EXPECT_EQ(w.cap, expected_cap);
    if (!w.degenerate) EXPECT_NEAR(w.skewness, skew, 1e-9 * std::max(1.0, std::abs(skew)));
    EXPECT_LE(*std::max_element(w.weights.begin(), w.weights.end()), w.cap);
    EXPECT_LE(*std::max_element(w.weights.begin(), w.weights.end()), 20.0);
    EXPECT_GE(*std::min_element(w.weights.begin(), w.weights.end()), 0.0);
    for (double x : w.weights) EXPECT_TRUE(std::isfinite(x));
  }
}

TEST(ComputeWeights, TinyAlphaAnnihilatesWeights) {
  const auto w = compute_weights(ScoreBatch(oracle::exponential_sample(64, 9)), IwlConfig{.alpha = 1e-9});
  EXPECT_LE(w.cap, 1e-8);
  for (double x : w.weights) EXPECT_LE(x, 1e-8);
}

TEST(ComputeWeights, Deterministic) {
  const auto batch = mixture_batch(200, 77);
  const auto a = compute_weights(ScoreBatch(batch), IwlConfig{});
  const auto b = compute_weights(ScoreBatch(batch), IwlConfig{});
  EXPECT_EQ(a.weights, b.weights);
  EXPECT_EQ(a.cap, b.cap);
  EXPECT_EQ(a.lambda, b.lambda);
}

TEST(ComputeWeights, ShiftInvariantInputs) {
  // The shift re-anchors the batch at epsilon, so adding a constant changes nothing
  // beyond floating-point rounding of the shift.
  const auto batch = oracle::exponential_sample(64, 31);
  auto moved = batch;
  for (auto& x : moved) x += 0.5;
  const auto a = compute_weights(ScoreBatch(batch), IwlConfig{});
  const auto b = compute_weights(ScoreBatch(moved), IwlConfig{});
  for (std::size_t i = 0; i < batch.size(); ++i) EXPECT_NEAR(a.weights[i], b.weights[i], 1e-6 * (1 + a.weights[i]));
}

TEST(ComputeWeights, NormalizationFlagRescalesBeforeClipping) {
  const auto batch = oracle::lognormal_sample(128, 5);
  const auto plain = compute_weights(ScoreBatch(batch), IwlConfig{.alpha = 1e300, .t0 = 1e300});
  const auto normalized =
      compute_weights(ScoreBatch(batch), IwlConfig{.alpha = 1e300, .t0 = 1e300, .normalize = true});
  const double mean = std::accumulate(normalized.weights.begin(), normalized.weights.end(), 0.0) / batch.size();
  EXPECT_NEAR(mean, 1.0, 1e-12);
  const double ratio = normalized.weights[0] / plain.weights[0];
  for (std::size_t i = 1; i < batch.size(); ++i) EXPECT_NEAR(normalized.weights[i] / plain.weights[i], ratio, 1e-9 * ratio);
}

TEST(ComputeWeights, ReweightingReducesSkewnessOnAverage) {
  double raw_total = 0.0;
  double reweighted_total = 0.0;
  int used = 0;
  for (std::uint64_t trial = 0; trial < 100; ++trial) {
    const auto batch = mixture_batch(256, 1000 + trial, 0.06);
    const double raw = oracle::plain_skewness(batch);
    if (raw <= 0.5) continue;
    const auto w = compute_weights(ScoreBatch(batch), IwlConfig{});
    std::mt19937_64 rng(trial);
    std::discrete_distribution<std::size_t> pick(w.weights.begin(), w.weights.end());
    std::vector<double> resampled(4000);
    for (auto& x : resampled) x = batch[pick(rng)];
    raw_total += raw;
    reweighted_total += oracle::plain_skewness(resampled);
    ++used;
  }
  ASSERT_GT(used, 50);
  EXPECT_LT(reweighted_total / used, raw_total / used);
}

TEST(WeightedLoss, Examples) {
  const std::vector<double> losses{1.0, 2.0, 4.5};
  EXPECT_DOUBLE_EQ(weighted_loss(losses, WeightVector::uniform(3, 20)), 7.5 / 3);
  WeightVector w;
  w.weights = {0.0, 2.0};
  EXPECT_EQ(weighted_loss(std::vector<double>{1, 2}, w), 2.0);
  w.weights = {0.0, 0.0, 0.0};
  EXPECT_EQ(weighted_loss(losses, w), 0.0);
}

TEST(WeightedLoss, LengthMismatchThrows) {
  EXPECT_THROW(weighted_loss(std::vector<double>{1, 2}, WeightVector::uniform(3, 1)), std::invalid_argument);
}

}  // namespace
}  // namespace iwl
