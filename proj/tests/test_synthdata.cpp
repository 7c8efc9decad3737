#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "support/oracles.hpp"
#include "wend/error.hpp"
#include "wend/synthdata.hpp"

using namespace wend;

namespace {

// Mean IoU of a jittered, centered 20x20 box at sigma 0.1 (tests/oracle/jitter_iou_mc.py).
constexpr double kJitterMeanIou = 0.71477;

SceneSpec one_object(ShapeClass shape, double cx, double cy, double size) {
  SceneSpec s;
  s.objects = {{shape, cx, cy, size, 1.0}};
  return s;
}

}  // namespace

TEST(Render, CenteredSquareBox) {
  const auto r = render_scene(one_object(ShapeClass::kSquare, 32, 32, 20), 4);
  ASSERT_EQ(r.gt_boxes.size(), 1u);
  EXPECT_EQ(r.gt_boxes[0], (Box{22, 22, 42, 42}));
  EXPECT_EQ(r.gt_classes[0], static_cast<int>(ShapeClass::kSquare));
}

TEST(Render, DeterministicAndCounted) {
  SceneSpec s;
  s.objects = {{ShapeClass::kCircle, 14, 14, 16, 0.9},
               {ShapeClass::kTriangle, 48, 16, 18, 0.8},
               {ShapeClass::kDiamond, 30, 46, 20, 1.0}};
  s.background.noise_level = 0.05;
  s.background.distractor_count = 2;
  const auto a = render_scene(s, 77);
  const auto b = render_scene(s, 77);
  EXPECT_EQ(a.image, b.image);
  EXPECT_EQ(a.gt_boxes.size(), 3u);
  EXPECT_NE(render_scene(s, 78).image, a.image);
}

TEST(Render, EveryShapeRasterizesInsideItsNominalBox) {
  for (int c = 0; c < kMaxShapeClasses; ++c) {
    const auto r = render_scene(one_object(static_cast<ShapeClass>(c), 31.5, 30, 22), 1);
    const Box nominal{20.5, 19, 42.5, 41};
    const Box& g = r.gt_boxes[0];
    EXPECT_TRUE(g.valid());
    EXPECT_GE(g.x1, std::floor(nominal.x1));
    EXPECT_LE(g.x2, std::ceil(nominal.x2));
    EXPECT_GE(g.y1, std::floor(nominal.y1));
    EXPECT_LE(g.y2, std::ceil(nominal.y2));
  }
}

TEST(Render, RejectsInvalidSpecs) {
  SceneSpec none;
  EXPECT_THROW(render_scene(none, 1), ValidationError);
  SceneSpec overlap;
  overlap.objects = {{ShapeClass::kSquare, 30, 30, 20, 1}, {ShapeClass::kSquare, 32, 32, 20, 1}};
  EXPECT_THROW(render_scene(overlap, 1), ValidationError);
  EXPECT_THROW(render_scene(one_object(ShapeClass::kSquare, 60, 30, 20), 1), ValidationError);
  SceneSpec four;
  for (int i = 0; i < 4; ++i) four.objects.push_back({ShapeClass::kSquare, 8.0 + 15 * i, 8, 6, 1});
  EXPECT_THROW(render_scene(four, 1), ValidationError);
}

TEST(Corrupt, ZeroNoiseIsIdentity) {
  const std::vector<Box> gts{{3, 4, 20, 25}, {30, 30, 50, 60}};
  const auto c = corrupt_boxes(gts, NoiseModel{}, {64, 64}, 5);
  EXPECT_EQ(c.boxes, gts);
  for (auto p : c.provenance) EXPECT_EQ(p, Provenance::kClean);
}

TEST(Corrupt, WrongBoxesAvoidEveryGt) {
  NoiseModel n;
  n.wrong_box_prob = 1.0;
  Rng rng(3);
  SceneParams params;
  for (int i = 0; i < 300; ++i) {
    const auto r = render_scene(sample_scene(params, rng), i);
    const auto c = corrupt_boxes(r.gt_boxes, n, {64, 64}, 1000 + i);
    for (std::size_t k = 0; k < c.boxes.size(); ++k) {
      EXPECT_EQ(c.provenance[k], Provenance::kWrong);
      EXPECT_TRUE(c.boxes[k].valid());
      for (const auto& g : r.gt_boxes) EXPECT_LE(iou(c.boxes[k], g), 0.1);
    }
  }
}

TEST(Corrupt, JitterMeanIouMatchesMonteCarloReference) {
  NoiseModel n;
  n.jitter_sigma = 0.1;
  const Box g{22, 22, 42, 42};
  double sum = 0.0;
  const int trials = 10000;
  for (int i = 0; i < trials; ++i) {
    const auto c = corrupt_boxes(std::span<const Box>(&g, 1), n, {64, 64}, static_cast<std::uint64_t>(i));
    ASSERT_EQ(c.boxes.size(), 1u);
    EXPECT_TRUE(c.boxes[0].valid());
    sum += iou(c.boxes[0], g);
  }
  const double mean = sum / trials;
  EXPECT_GE(mean, 0.55);
  EXPECT_LE(mean, 0.9);
  EXPECT_NEAR(mean, kJitterMeanIou, 0.01);
}

TEST(Corrupt, DropRemovesBoxes) {
  NoiseModel n;
  n.drop_prob = 1.0;
  const std::vector<Box> gts{{3, 4, 20, 25}};
  EXPECT_TRUE(corrupt_boxes(gts, n, {64, 64}, 5).boxes.empty());
  n.drop_prob = 1.5;
  EXPECT_THROW(corrupt_boxes(gts, n, {64, 64}, 5), ValidationError);
}

TEST(ClassScores, OracleAndAdversarialClassifiers) {
  for (int i = 0; i < 500; ++i) {
    const auto s = simulate_class_scores(i % 10, {1.0, 1.0}, 10, i);
    EXPECT_EQ(std::max_element(s.begin(), s.end()) - s.begin(), i % 10);
    const auto bad = simulate_class_scores(i % 10, {0.0, 0.0}, 10, i);
    const double mine = bad[static_cast<std::size_t>(i % 10)];
    EXPECT_GE(std::count_if(bad.begin(), bad.end(), [&](double v) { return v > mine; }), 5);
    EXPECT_EQ(std::set<double>(bad.begin(), bad.end()).size(), bad.size());
  }
}

TEST(ClassScores, EmpiricalAccuracies) {
  int top1 = 0, top5 = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const int gt = i % 10;
    const auto s = simulate_class_scores(gt, {0.8, 0.95}, 10, 50000 + i);
    const double mine = s[static_cast<std::size_t>(gt)];
    const auto ahead = std::count_if(s.begin(), s.end(), [&](double v) { return v > mine; });
    top1 += ahead == 0;
    top5 += ahead < 5;
  }
  EXPECT_NEAR(top1 / double(n), 0.8, 0.01);
  EXPECT_NEAR(top5 / double(n), 0.95, 0.01);
}

TEST(SceneSampling, ObjectCountsFollowConfiguredRange) {
  SceneParams params;
  Rng rng(12);
  std::array<int, 4> counts{};
  const int n = 2000;
  for (int i = 0; i < n; ++i) {
    const auto spec = sample_scene(params, rng);
    ASSERT_NO_THROW(spec.validate());
    ++counts[spec.objects.size()];
  }
  EXPECT_EQ(counts[0], 0);
  // Uniform over {1,2,3}: 4-sigma binomial band.
  const double sd = std::sqrt(n * (1.0 / 3) * (2.0 / 3));
  for (int k = 1; k <= 3; ++k) EXPECT_NEAR(counts[k], n / 3.0, 4 * sd);
}
