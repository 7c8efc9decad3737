#include <gtest/gtest.h>

#include "oracle/scalar_oracle_values.hpp"
#include "support/gradcheck.hpp"
#include "wend/error.hpp"
#include "wend/losses.hpp"

using namespace wend;

namespace {

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

}  // namespace

TEST(Bce, Examples) {
  EXPECT_LT(rel(bce(0.5, 1).value, oracle::kLog2), 1e-12);
  EXPECT_LT(bce(1 - kProbEpsilon, 1).value, 1e-6);
  EXPECT_LT(rel(bce(0.8, 0).value, oracle::kBceP08Y0), 1e-12);
  // Clamped logs keep extreme inputs finite.
  EXPECT_TRUE(std::isfinite(bce(0.0, 1).value));
  EXPECT_TRUE(std::isfinite(bce(1.0, 0).grad_p[0]));
}

TEST(SmoothL1, Examples) {
  EXPECT_EQ(smooth_l1({1, 2, 3, 4}, {1, 2, 3, 4}, 1.0).value, 0.0);
  EXPECT_DOUBLE_EQ(smooth_l1({0.5, 0, 0, 0}, {0, 0, 0, 0}, 1.0).value, oracle::kSmoothL1Half);
  EXPECT_DOUBLE_EQ(smooth_l1({0, 0, 2, 0}, {0, 0, 0, 0}, 1.0).value, oracle::kSmoothL1Two);
}

TEST(GiouLoss, Examples) {
  EXPECT_NEAR(giou_loss({1, 2, 5, 7}, {1, 2, 5, 7}).value, 0.0, 1e-15);
  EXPECT_LT(rel(giou_loss({0, 0, 2, 2}, {1, 1, 3, 3}).value, oracle::kGiouLossOverlap), 1e-12);
  EXPECT_GT(giou_loss({0, 0, 1, 1}, {1000, 1000, 1001, 1001}).value, 1.99);
}

TEST(SupervisedLoss, TwoSampleExample) {
  const double p[] = {0.8, 0.2};
  const int labels[] = {1, 0};
  const DeltaVec t[] = {{0.1, 0.2, 0.3, 0.4}, {1, 1, 1, 1}};
  const DeltaVec ts[] = {{0.1, 0.2, 0.3, 0.4}, {0, 0, 0, 0}};
  const auto v = supervised_loss(p, labels, t, ts, LossConfig{});
  EXPECT_LT(rel(v.value, oracle::kSupTwoSample), 1e-9);
  // The negative's deltas get no gradient.
  for (double g : v.grad_t[1]) EXPECT_EQ(g, 0.0);
}

TEST(SupervisedLoss, PerfectAndWeightZeroing) {
  const double p[] = {1.0 - kProbEpsilon, kProbEpsilon};
  const int labels[] = {1, 0};
  const DeltaVec t[] = {{0.5, 0, 0, 0}, {0, 0, 0, 0}};
  const DeltaVec ts[] = {{0.5, 0, 0, 0}, {0, 0, 0, 0}};
  EXPECT_LT(supervised_loss(p, labels, t, ts, LossConfig{}).value, 1e-6);

  const DeltaVec off[] = {{0.5, 0, 0, 0}, {0, 0, 0, 0}};
  const DeltaVec target[] = {{0, 0, 0, 0}, {0, 0, 0, 0}};
  LossConfig cfg;
  cfg.lambda1 = 0.0;
  cfg.smooth_l1_beta = 1.0;
  // One positive: regression normalized by N_reg = 1.
  EXPECT_DOUBLE_EQ(supervised_loss(p, labels, off, target, cfg).value, 0.125);
}

TEST(SupervisedLoss, AllNegativeHasNoRegression) {
  const double p[] = {0.3, 0.6};
  const int labels[] = {0, 0};
  const DeltaVec t[] = {{3, 3, 3, 3}, {1, 1, 1, 1}};
  const DeltaVec ts[] = {{0, 0, 0, 0}, {0, 0, 0, 0}};
  const auto v = supervised_loss(p, labels, t, ts, LossConfig{});
  const double cls = (bce(0.3, 0).value + bce(0.6, 0).value) / 2;
  EXPECT_DOUBLE_EQ(v.value, cls);
  for (const auto& g : v.grad_t) {
    for (double e : g) EXPECT_EQ(e, 0.0);
  }
}

TEST(SupervisedLoss, RejectsEmptyBatch) {
  EXPECT_THROW(supervised_loss({}, {}, {}, {}, LossConfig{}), ValidationError);
}

TEST(WeWeight, Examples) {
  LossConfig cfg;
  EXPECT_EQ(we_weight(0.3, cfg), 0.0);
  EXPECT_LT(rel(we_weight(0.9, cfg), oracle::kWeWeightHigh), 1e-9);
  EXPECT_LT(rel(we_weight(0.1, cfg), oracle::kWeWeightLow), 1e-9);
}

TEST(WeWeight, MonotoneOnEachBranch) {
  LossConfig cfg;
  cfg.tau1 = 0.25;
  cfg.tau2 = 0.55;
  double prev = -1.0;
  for (double p = 0.0; p < 0.25; p += 0.005) {
    EXPECT_GE(we_weight(p, cfg), prev);
    prev = we_weight(p, cfg);
  }
  prev = 2.0;
  for (double p = 0.56; p <= 1.0; p += 0.005) {
    EXPECT_LE(we_weight(p, cfg), prev);
    prev = we_weight(p, cfg);
  }
  EXPECT_EQ(we_weight(0.4, cfg), 0.0);
}

TEST(WeightedEntropy, Examples) {
  LossConfig cfg;
  const double high[] = {0.9};
  const double low[] = {0.1};
  EXPECT_LT(rel(weighted_entropy_loss(high, cfg).value, oracle::kWeLossHigh), 1e-9);
  EXPECT_LT(rel(weighted_entropy_loss(low, cfg).value, oracle::kWeLossLow), 1e-9);
  const double band[] = {0.3, 0.3};
  EXPECT_EQ(weighted_entropy_loss(band, cfg).value, 0.0);
  const auto empty = weighted_entropy_loss({}, cfg);
  EXPECT_EQ(empty.value, 0.0);
  EXPECT_TRUE(empty.grad_p.empty());
}

TEST(WeightedEntropy, AnnihilatedBandIsZero) {
  LossConfig cfg;
  cfg.tau1 = 0.0;
  cfg.tau2 = 1.0;
  std::vector<double> p;
  for (double v = 0.001; v < 1.0; v += 0.01) p.push_back(v);
  const auto l = weighted_entropy_loss(p, cfg);
  EXPECT_EQ(l.value, 0.0);
  for (double g : l.grad_p) EXPECT_EQ(g, 0.0);
}

TEST(QualityLoss, Examples) {
  EXPECT_LT(quality_loss(1 - kProbEpsilon, 1 - kProbEpsilon).value, 1e-5);
  EXPECT_LT(rel(quality_loss(0.5, 1).value, oracle::kLog2), 1e-12);
  EXPECT_LT(rel(quality_loss(0.7, 0.4).value, oracle::kQualitySoft), 1e-9);
}

TEST(TotalLoss, Examples) {
  LossValue sup{oracle::kSupTwoSample, {0.1, 0.2}, {}};
  LossValue unsup{0.1, {0.01, 0.02}, {}};
  LossConfig cfg;
  EXPECT_LT(rel(total_loss(sup, unsup, cfg).value, oracle::kTotalEta0125), 1e-9);
  cfg.eta = 0.0;
  EXPECT_DOUBLE_EQ(total_loss(sup, unsup, cfg).value, 0.1);
  cfg.eta = 1.0;
  const auto one = total_loss(sup, unsup, cfg);
  EXPECT_DOUBLE_EQ(one.value, oracle::kSupTwoSample + 0.1);
  EXPECT_DOUBLE_EQ(one.grad_p[1], 0.22);
}

TEST(TotalLoss, LinearInEta) {
  LossValue sup{0.7, {0.3}, {}};
  LossValue unsup{0.2, {0.05}, {}};
  LossConfig cfg;
  std::vector<double> vals;
  for (double eta : {0.0, 0.5, 1.0, 1.5}) {
    cfg.eta = eta;
    vals.push_back(total_loss(sup, unsup, cfg).value);
  }
  EXPECT_NEAR(vals[1] - vals[0], vals[2] - vals[1], 1e-15);
  EXPECT_NEAR(vals[3] - vals[2], vals[2] - vals[1], 1e-15);
}

TEST(LossConfig, Validation) {
  LossConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.tau1 = 0.5;
  cfg.tau2 = 0.4;
  EXPECT_THROW(cfg.validate(), ValidationError);
  cfg = LossConfig{};
  cfg.eta = -1;
  EXPECT_THROW(cfg.validate(), ValidationError);
  const auto preset = LossConfig::large_scale_preset();
  EXPECT_EQ(preset.gamma, 4.0);
  EXPECT_EQ(preset.alpha, 0.25);
  EXPECT_EQ(preset.tau1, 0.1);
  EXPECT_EQ(preset.eta, 0.03125);
}

TEST(LossGradients, MatchFiniteDifferences) {
  gradcheck::Checker c(2024);
  for (const auto& r : gradcheck::loss_suite(c, 25)) {
    EXPECT_LT(r.max_rel_err, 1e-4) << r.name;
  }
}
