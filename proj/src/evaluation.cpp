#include "wend/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <unordered_map>

#include "wend/error.hpp"

namespace wend {

bool box_correct(const Box& pred, std::span<const Box> gt_boxes) {
  return std::any_of(gt_boxes.begin(), gt_boxes.end(),
                     [&](const Box& g) { return iou(pred, g) > 0.5; });
}

bool gt_known_loc(const PredictionRecord& pred, std::span<const Box> gt_boxes, int k) {
  require(k >= 1, "k must be >= 1");
  const std::size_t n = std::min(pred.boxes.size(), static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < n; ++i) {
    if (box_correct(pred.boxes[i].box, gt_boxes)) return true;
  }
  return false;
}

int top_class(std::span<const double> class_scores) {
  require(!class_scores.empty(), "class scores are empty");
  return static_cast<int>(std::max_element(class_scores.begin(), class_scores.end()) -
                          class_scores.begin());
}

bool class_in_top(std::span<const double> class_scores, int cls, int n) {
  require(cls >= 0 && static_cast<std::size_t>(cls) < class_scores.size(),
          "class index outside the score vector");
  // Number of classes ranked strictly ahead of `cls`.
  int ahead = 0;
  const double s = class_scores[static_cast<std::size_t>(cls)];
  for (std::size_t c = 0; c < class_scores.size(); ++c) {
    const double v = class_scores[c];
    if (v > s || (v == s && static_cast<int>(c) < cls)) ++ahead;
  }
  return ahead < n;
}

bool top1_loc(const PredictionRecord& pred, std::span<const Box> gt_boxes, int gt_class) {
  return top_class(pred.class_scores) == gt_class && gt_known_loc(pred, gt_boxes, 1);
}

bool top5_loc(const PredictionRecord& pred, std::span<const Box> gt_boxes, int gt_class, int k) {
  return class_in_top(pred.class_scores, gt_class, 5) && gt_known_loc(pred, gt_boxes, k);
}

MetricsReport evaluate_dataset(std::span<const GroundTruth> truth,
                               std::span<const PredictionRecord> predictions, int k_single,
                               int k_multi) {
  require(k_single >= 1 && k_multi >= 1, "k values must be >= 1");
  std::unordered_map<std::string, const PredictionRecord*> by_id;
  for (const auto& p : predictions) by_id[p.image_id] = &p;

  std::size_t top1 = 0, top5_s = 0, top5_m = 0, gk_s = 0, gk_m = 0;
  for (const auto& gt : truth) {
    auto it = by_id.find(gt.image_id);
    if (it == by_id.end()) throw ValidationError("no prediction record for image '" + gt.image_id + "'");
    const PredictionRecord& p = *it->second;
    top1 += top1_loc(p, gt.boxes, gt.gt_class);
    top5_s += top5_loc(p, gt.boxes, gt.gt_class, k_single);
    top5_m += top5_loc(p, gt.boxes, gt.gt_class, k_multi);
    gk_s += gt_known_loc(p, gt.boxes, k_single);
    gk_m += gt_known_loc(p, gt.boxes, k_multi);
  }
  MetricsReport r;
  r.k_single = k_single;
  r.k_multi = k_multi;
  r.count = truth.size();
  if (truth.empty()) return r;
  const double scale = 100.0 / static_cast<double>(truth.size());
  r.top1_loc = top1 * scale;
  r.top5_loc_single = top5_s * scale;
  r.top5_loc_multi = top5_m * scale;
  r.gtknown_single = gk_s * scale;
  r.gtknown_multi = gk_m * scale;
  return r;
}

std::string metrics_csv(const MetricsReport& r) {
  std::string out = "metric,value,count\n";
  char line[128];
  auto row = [&](const std::string& name, double v) {
    std::snprintf(line, sizeof(line), "%s,%.4f,%zu\n", name.c_str(), v, r.count);
    out += line;
  };
  const std::string ks = "_k" + std::to_string(r.k_single);
  const std::string km = "_k" + std::to_string(r.k_multi);
  row("top1_loc", r.top1_loc);
  row("top5_loc" + ks, r.top5_loc_single);
  row("top5_loc" + km, r.top5_loc_multi);
  row("gtknown_loc" + ks, r.gtknown_single);
  row("gtknown_loc" + km, r.gtknown_multi);
  return out;
}

}  // namespace wend
