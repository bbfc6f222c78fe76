#include "iwl/data.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

namespace iwl {
namespace {

nn::Vector cluster_mean(const LabeledDataset& d, Provenance p) {
  nn::Vector acc = nn::Vector::Zero(d.dim());
  int n = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d.provenance[i] != p) continue;
    acc += d.features.row(static_cast<Eigen::Index>(i)).transpose();
    ++n;
  }
  return acc / n;
}

TEST(SyntheticSpec, MinorityCountFloorsTheRatio) {
  SyntheticSpec spec;
  spec.n_majority = 2000;
  spec.beta = 1;
  EXPECT_EQ(spec.n_minority(), 2000);
  spec.beta = 200;
  EXPECT_EQ(spec.n_minority(), 10);
  spec.beta = 300;
  EXPECT_EQ(spec.n_minority(), 6);
  spec.beta = 3000;
  EXPECT_THROW(spec.validate(), std::invalid_argument);
}

TEST(SyntheticSpec, ResolvedDefaults) {
  const auto s = SyntheticSpec{}.resolved();
  ASSERT_EQ(s.majority_mean.size(), 8u);
  EXPECT_EQ(s.majority_mean[0], -3.0);
  EXPECT_EQ(s.minority_mean[0], 3.0);
  for (std::size_t j = 1; j < 8; ++j) EXPECT_EQ(s.majority_mean[j], 0.0);
  EXPECT_EQ(s.anomaly_low, std::vector<double>(8, -10.0));
  EXPECT_EQ(s.anomaly_high, std::vector<double>(8, 10.0));
}

TEST(SyntheticSpec, ValidationErrors) {
  SyntheticSpec s;
  s.beta = 0.5;
  EXPECT_THROW(s.validate(), std::invalid_argument);
  s = SyntheticSpec{};
  s.cluster_std = 0;
  EXPECT_THROW(s.validate(), std::invalid_argument);
  s = SyntheticSpec{};
  s.majority_mean = {1.0};
  EXPECT_THROW(s.resolved(), std::invalid_argument);
}

TEST(SyntheticSpec, JsonRoundTrip) {
  SyntheticSpec s;
  s.beta = 42;
  s.seed = 17;
  s.dim = 3;
  s.anomaly_low = {-5, -5, -5};
  s.anomaly_high = {5, 5, 5};
  const auto back = synthetic_spec_from_json(nlohmann::json::parse(to_json(s).dump()));
  EXPECT_EQ(back.beta, 42);
  EXPECT_EQ(back.seed, 17u);
  EXPECT_EQ(back.dim, 3);
  EXPECT_EQ(back.anomaly_low, s.anomaly_low);
}

TEST(Generate, CountsAtBetaOne) {
  SyntheticSpec spec;
  spec.n_majority = 500;
  spec.beta = 1;
  spec.seed = 1;
  const auto split = generate(spec);
  EXPECT_EQ(split.train.count(Provenance::kMajority), 500u);
  EXPECT_EQ(split.train.count(Provenance::kMinority), 500u);
  EXPECT_EQ(split.train.count(Label::kAnomaly), 0u);
  EXPECT_EQ(split.test.count(Provenance::kAnomaly), 200u);
  EXPECT_EQ(split.test.count(Provenance::kMajority), 1000u);
  EXPECT_EQ(split.test.count(Provenance::kMinority), 1000u);
}

TEST(Generate, CountsAtBetaTwoHundred) {
  SyntheticSpec spec;
  spec.beta = 200;
  spec.seed = 2;
  const auto split = generate(spec);
  EXPECT_EQ(split.train.count(Provenance::kMajority), 2000u);
  EXPECT_EQ(split.train.count(Provenance::kMinority), 10u);
  EXPECT_EQ(split.train.size(), 2010u);
  EXPECT_NO_THROW(split.train.validate());
  EXPECT_NO_THROW(split.test.validate());
}

TEST(Generate, ZeroTestCountsMirrorTraining) {
  SyntheticSpec spec;
  spec.n_majority = 400;
  spec.beta = 40;
  spec.n_test_majority = 0;
  spec.n_test_minority = 0;
  const auto split = generate(spec);
  EXPECT_EQ(split.test.count(Provenance::kMajority), 400u);
  EXPECT_EQ(split.test.count(Provenance::kMinority), 10u);
}

TEST(Generate, ClusterMeansAreNearTheirCenters) {
  SyntheticSpec spec;
  spec.beta = 2;
  spec.seed = 3;
  const auto train = generate(spec).train;
  const auto resolved = spec.resolved();
  const auto major = cluster_mean(train, Provenance::kMajority);
  const auto minor = cluster_mean(train, Provenance::kMinority);
  // Standard error of a mean over >= 1000 unit-variance draws is <= 0.032; 5 SE margin.
  for (int j = 0; j < spec.dim; ++j) {
    EXPECT_NEAR(major(j), resolved.majority_mean[j], 0.16);
    EXPECT_NEAR(minor(j), resolved.minority_mean[j], 0.16);
  }
}

TEST(Generate, AnomaliesAvoidClusterBalls) {
  SyntheticSpec spec;
  spec.seed = 4;
  const auto test = generate(spec).test;
  const auto r = spec.resolved();
  for (std::size_t i = 0; i < test.size(); ++i) {
    if (test.provenance[i] != Provenance::kAnomaly) continue;
    const auto row = test.features.row(static_cast<Eigen::Index>(i));
    double dmaj = 0, dmin = 0;
    for (int j = 0; j < spec.dim; ++j) {
      dmaj += std::pow(row(j) - r.majority_mean[j], 2);
      dmin += std::pow(row(j) - r.minority_mean[j], 2);
      EXPECT_GE(row(j), -10.0);
      EXPECT_LE(row(j), 10.0);
    }
    EXPECT_GT(dmaj, 4.0);
    EXPECT_GT(dmin, 4.0);
  }
}

TEST(Generate, DeterministicPerSeed) {
  SyntheticSpec spec;
  spec.n_majority = 300;
  spec.seed = 9;
  const auto a = generate(spec);
  const auto b = generate(spec);
  EXPECT_EQ(a.train.features, b.train.features);
  EXPECT_EQ(a.test.features, b.test.features);
  spec.seed = 10;
  EXPECT_NE(generate(spec).train.features, a.train.features);
}

TEST(Generate, CoveredBoxIsReported) {
  SyntheticSpec spec;
  spec.dim = 1;
  spec.anomaly_low = {-4};
  spec.anomaly_high = {4};
  spec.majority_mean = {-2};
  spec.minority_mean = {2};
  EXPECT_THROW(generate(spec), std::invalid_argument);
}

TEST(Csv, ParsesHeaderAndLabels) {
  std::istringstream in("f0,f1,label\n1.5,2,0\n-3,4e-1,1\n");
  const auto d = parse_csv(in, "label");
  ASSERT_EQ(d.size(), 2u);
  EXPECT_EQ(d.dim(), 2);
  EXPECT_EQ(d.features(0, 0), 1.5);
  EXPECT_EQ(d.features(1, 1), 0.4);
  EXPECT_EQ(d.labels[0], Label::kNormal);
  EXPECT_EQ(d.labels[1], Label::kAnomaly);
  EXPECT_EQ(d.provenance[1], Provenance::kAnomaly);
}

TEST(Csv, UnlabeledInputIsAllNormal) {
  std::istringstream in("a,b\n1,2\n3,4\n");
  const auto d = parse_csv(in, std::nullopt);
  EXPECT_EQ(d.count(Label::kNormal), 2u);
}

TEST(Csv, ErrorsNameTheRow) {
  auto message = [](const std::string& text) {
    std::istringstream in(text);
    try {
      parse_csv(in, "label");
    } catch (const std::runtime_error& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  EXPECT_NE(message("x,label\n1,0\nabc,1\n").find("row 2"), std::string::npos);
  EXPECT_NE(message("x,label\n1,0\nabc,1\n").find("abc"), std::string::npos);
  EXPECT_NE(message("x,label\n1,2\n").find("label must be 0 or 1"), std::string::npos);
  EXPECT_NE(message("x,label\n1,0,3\n").find("expected 2 cells"), std::string::npos);
  EXPECT_NE(message("x,label\n").find("no data rows"), std::string::npos);
  EXPECT_NE(message("x,y\n1,0\n").find("not in header"), std::string::npos);
  EXPECT_NE(message("").find("missing header"), std::string::npos);
}

TEST(Csv, RoundTripIsExact) {
  SyntheticSpec spec;
  spec.n_majority = 100;
  spec.seed = 12;
  const auto test = generate(spec).test;
  std::ostringstream out;
  write_csv(out, test);
  std::istringstream in(out.str());
  const auto back = parse_csv(in, "label");
  EXPECT_EQ(back.features, test.features);
  EXPECT_EQ(back.labels, test.labels);
}

TEST(Csv, HeaderNamesFeatures) {
  LabeledDataset d;
  d.features = nn::Matrix::Zero(1, 3);
  d.labels = {Label::kNormal};
  d.provenance = {Provenance::kMajority};
  std::ostringstream out;
  write_csv(out, d);
  EXPECT_EQ(out.str(), "f0,f1,f2,label\n0,0,0,0\n");
}

TEST(Csv, NumberHelpers) {
  EXPECT_EQ(format_number(0.1), "0.1");
  EXPECT_EQ(parse_number(" 2.5 "), 2.5);
  EXPECT_FALSE(parse_number("").has_value());
  EXPECT_FALSE(parse_number("1x").has_value());
  EXPECT_EQ(split_csv_line("a,,b"), (std::vector<std::string>{"a", "", "b"}));
}

TEST(LabeledDataset, NormalRowsAndValidation) {
  SyntheticSpec spec;
  spec.n_majority = 100;
  const auto test = generate(spec).test;
  const auto normals = test.normal_rows();
  EXPECT_EQ(normals.size(), test.count(Label::kNormal));
  EXPECT_EQ(normals.count(Label::kAnomaly), 0u);
  LabeledDataset broken = test;
  broken.labels[0] = Label::kAnomaly;
  EXPECT_THROW(broken.validate(), std::invalid_argument);
}

}  // namespace
}  // namespace iwl
