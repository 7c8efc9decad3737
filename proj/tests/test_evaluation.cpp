#include <gtest/gtest.h>

#include <random>

#include "support/oracles.hpp"
#include "wend/error.hpp"
#include "wend/evaluation.hpp"

using namespace wend;

namespace {

PredictionRecord record(std::vector<Box> boxes, std::vector<double> scores) {
  PredictionRecord r;
  r.image_id = "x";
  double s = 1.0;
  for (const auto& b : boxes) r.boxes.push_back({b, s -= 0.1});
  r.class_scores = std::move(scores);
  return r;
}

const Box kGt{0, 0, 10, 10};
const Box kMiss{50, 50, 60, 60};

}  // namespace

TEST(BoxCorrect, Examples) {
  const std::vector<Box> gts{kGt};
  EXPECT_TRUE(box_correct(kGt, gts));
  EXPECT_FALSE(box_correct({0, 0, 10, 5}, gts));  // IoU exactly 0.5
  const std::vector<Box> two{{1, 1, 3, 3}, {0, 0, 2, 3}};
  EXPECT_TRUE(box_correct({0, 0, 2, 2}, two));
}

TEST(GtKnown, Examples) {
  const std::vector<Box> gts{kGt};
  EXPECT_TRUE(gt_known_loc(record({kGt}, {1}), gts, 1));
  const auto fourth = record({kMiss, kMiss, kMiss, kGt}, {1});
  EXPECT_TRUE(gt_known_loc(fourth, gts, 5));
  EXPECT_FALSE(gt_known_loc(fourth, gts, 1));
  EXPECT_FALSE(gt_known_loc(record({}, {1}), gts, 5));
  EXPECT_THROW(gt_known_loc(fourth, gts, 0), ValidationError);
}

TEST(Top1, Examples) {
  const std::vector<Box> gts{kGt};
  EXPECT_TRUE(top1_loc(record({kGt}, {0.1, 0.9, 0.0}), gts, 1));
  EXPECT_FALSE(top1_loc(record({kGt}, {0.9, 0.1, 0.0}), gts, 1));
  // Top box IoU 0.4, second box IoU 0.9.
  const Box weak{0, 0, 10, 4};
  const Box strong{0, 0, 10, 9};
  EXPECT_FALSE(top1_loc(record({weak, strong}, {0.1, 0.9}), gts, 1));
  // Ties go to the lower class index.
  EXPECT_TRUE(top1_loc(record({kGt}, {0.5, 0.5}), gts, 0));
  EXPECT_FALSE(top1_loc(record({kGt}, {0.5, 0.5}), gts, 1));
}

TEST(Top5, Examples) {
  const std::vector<Box> gts{kGt};
  // Class 3 ranked third, box ranked second.
  const std::vector<double> rank3{0.9, 0.8, 0.1, 0.7, 0.0, 0.0, 0.0};
  EXPECT_TRUE(top5_loc(record({kMiss, kGt}, rank3), gts, 3, 5));
  // Class 6 ranked sixth.
  const std::vector<double> rank6{0.9, 0.8, 0.7, 0.6, 0.5, 0.05, 0.4};
  EXPECT_FALSE(top5_loc(record({kGt}, rank6), gts, 5, 5));
  // Class ranked second, only the fourth box correct.
  const std::vector<double> rank2{0.9, 0.8, 0.1};
  const auto fourth = record({kMiss, kMiss, kMiss, kGt}, rank2);
  EXPECT_FALSE(top5_loc(fourth, gts, 1, 1));
  EXPECT_TRUE(top5_loc(fourth, gts, 1, 5));
}

TEST(Dataset, OracleEmptyAndMissing) {
  std::vector<GroundTruth> truth{{"a", {kGt}, 0}, {"b", {kMiss}, 1}};
  std::vector<PredictionRecord> perfect{{"b", {{kMiss, 1.0}}, {0.0, 1.0}}, {"a", {{kGt, 1.0}}, {1.0, 0.0}}};
  const auto r = evaluate_dataset(truth, perfect);
  EXPECT_EQ(r.top1_loc, 100.0);
  EXPECT_EQ(r.top5_loc_single, 100.0);
  EXPECT_EQ(r.gtknown_multi, 100.0);
  EXPECT_EQ(r.count, 2u);

  std::vector<PredictionRecord> empty{{"a", {}, {1.0, 0.0}}, {"b", {}, {0.0, 1.0}}};
  const auto z = evaluate_dataset(truth, empty);
  EXPECT_EQ(z.top1_loc, 0.0);
  EXPECT_EQ(z.gtknown_multi, 0.0);

  std::vector<PredictionRecord> missing{{"a", {}, {1.0, 0.0}}};
  try {
    evaluate_dataset(truth, missing);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("'b'"), std::string::npos);
  }
}

TEST(Dataset, MatchesBruteForceAndInvariants) {
  std::mt19937_64 gen(31);
  for (int inst = 0; inst < 40; ++inst) {
    const auto data = ref::random_eval_instance(gen, 25);
    const auto r = evaluate_dataset(data.truth, data.predictions, 1, 5);
    const auto b = ref::brute_force_report(data, 1, 5);
    EXPECT_EQ(r.top1_loc, b.top1);
    EXPECT_EQ(r.top5_loc_single, b.top5_single);
    EXPECT_EQ(r.top5_loc_multi, b.top5_multi);
    EXPECT_EQ(r.gtknown_single, b.gk_single);
    EXPECT_EQ(r.gtknown_multi, b.gk_multi);
    EXPECT_GE(r.gtknown_multi, r.gtknown_single);
    EXPECT_GE(r.top5_loc_single, r.top1_loc);
    EXPECT_GE(r.top5_loc_multi, r.top5_loc_single);
    EXPECT_GE(r.gtknown_single, r.top5_loc_single);

    auto shuffled = data.predictions;
    std::shuffle(shuffled.begin(), shuffled.end(), gen);
    const auto s = evaluate_dataset(data.truth, shuffled, 1, 5);
    EXPECT_EQ(s.top1_loc, r.top1_loc);
    EXPECT_EQ(s.gtknown_multi, r.gtknown_multi);
  }
}

TEST(Dataset, PointwiseImplications) {
  std::mt19937_64 gen(8);
  const auto data = ref::random_eval_instance(gen, 300);
  for (std::size_t i = 0; i < data.truth.size(); ++i) {
    const auto& p = data.predictions[i];
    const auto& g = data.truth[i];
    for (int k = 1; k < 8; ++k) EXPECT_LE(gt_known_loc(p, g.boxes, k), gt_known_loc(p, g.boxes, k + 1));
    if (top1_loc(p, g.boxes, g.gt_class)) EXPECT_TRUE(top5_loc(p, g.boxes, g.gt_class, 1));
    if (top5_loc(p, g.boxes, g.gt_class, 1)) EXPECT_TRUE(top5_loc(p, g.boxes, g.gt_class, 5));
    EXPECT_GE(gt_known_loc(p, g.boxes, 5), top5_loc(p, g.boxes, g.gt_class, 5));
  }
}

TEST(MetricsCsv, Format) {
  MetricsReport r;
  r.top1_loc = 12.5;
  r.gtknown_multi = 100;
  r.count = 8;
  const std::string csv = metrics_csv(r);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "metric,value,count");
  EXPECT_NE(csv.find("top1_loc,12.5000,8\n"), std::string::npos);
  EXPECT_NE(csv.find("gtknown_loc_k1,"), std::string::npos);
  EXPECT_NE(csv.find("gtknown_loc_k5,100.0000,8\n"), std::string::npos);
  EXPECT_EQ(csv.find('\r'), std::string::npos);
}
