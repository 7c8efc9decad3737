#pragma once

#include <string>
#include <vector>

#include "wend/geometry.hpp"

namespace wend {

struct PredictionRecord {
  std::string image_id;
  std::vector<ScoredBox> boxes;  // descending score
  std::vector<double> class_scores;
};

// What the evaluator needs to know about one image.
struct GroundTruth {
  std::string image_id;
  std::vector<Box> boxes;
  int gt_class = 0;  // class of the first object; the image-level label
};

// IoU strictly above 0.5 with any ground-truth box.
bool box_correct(const Box& pred, std::span<const Box> gt_boxes);

bool gt_known_loc(const PredictionRecord& pred, std::span<const Box> gt_boxes, int k);

// Index of the highest score; ties go to the lowest index.
int top_class(std::span<const double> class_scores);
// Whether `cls` is among the `n` highest scores, ties ranked by lower index first.
bool class_in_top(std::span<const double> class_scores, int cls, int n);

bool top1_loc(const PredictionRecord& pred, std::span<const Box> gt_boxes, int gt_class);
bool top5_loc(const PredictionRecord& pred, std::span<const Box> gt_boxes, int gt_class, int k);

// Percentages in [0,100]. The "single" variants look at the first box, the "multi" variants
// at the first k_multi boxes.
struct MetricsReport {
  double top1_loc = 0.0;
  double top5_loc_single = 0.0;
  double top5_loc_multi = 0.0;
  double gtknown_single = 0.0;
  double gtknown_multi = 0.0;
  int k_single = 1;
  int k_multi = 5;
  std::size_t count = 0;
};

// Every ground-truth id must have a prediction record; records for unknown ids are ignored.
MetricsReport evaluate_dataset(std::span<const GroundTruth> truth,
                               std::span<const PredictionRecord> predictions, int k_single = 1,
                               int k_multi = 5);

// "metric,value,count" rows, LF line endings.
std::string metrics_csv(const MetricsReport& report);

}  // namespace wend
