#include "wend/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "wend/error.hpp"
#include "wend/rng.hpp"

namespace wend {

AnchorSet generate_anchors(ImageSize image_size, int stride, std::span<const double> scales,
                           std::span<const double> aspect_ratios) {
  require(stride > 0, "anchor stride must be positive");
  require(image_size.width > 0 && image_size.height > 0, "image size must be positive");
  require(image_size.width % stride == 0 && image_size.height % stride == 0,
          "anchor stride " + std::to_string(stride) + " does not divide image size " +
              std::to_string(image_size.width) + "x" + std::to_string(image_size.height));
  require(!scales.empty() && !aspect_ratios.empty(), "anchor scales and ratios must be non-empty");
  for (double s : scales) require(s > 0.0, "anchor scales must be positive");
  for (double r : aspect_ratios) require(r > 0.0, "anchor aspect ratios must be positive");

  AnchorSet set;
  set.stride = stride;
  set.scales.assign(scales.begin(), scales.end());
  set.aspect_ratios.assign(aspect_ratios.begin(), aspect_ratios.end());
  set.image_size = image_size;

  const int gw = image_size.width / stride;
  const int gh = image_size.height / stride;
  set.anchors.reserve(static_cast<std::size_t>(gw * gh) * set.per_location());
  for (int gy = 0; gy < gh; ++gy) {
    for (int gx = 0; gx < gw; ++gx) {
      const double cx = (gx + 0.5) * stride;
      const double cy = (gy + 0.5) * stride;
      for (double s : scales) {
        for (double r : aspect_ratios) {
          const double w = s * std::sqrt(r);
          const double h = s / std::sqrt(r);
          set.anchors.push_back({cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h});
        }
      }
    }
  }
  return set;
}

std::size_t AssignmentResult::count(AnchorLabel label) const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), label));
}

AssignmentResult assign_labels(const AnchorSet& anchors, std::span<const Box> pseudo_boxes,
                               AssignmentThresholds thresholds) {
  require(thresholds.fg >= thresholds.bg, "foreground threshold must be >= background threshold");
  const std::size_t n = anchors.size();
  AssignmentResult result;
  result.labels.assign(n, AnchorLabel::kNegative);
  result.matched_gt.assign(n, std::nullopt);
  result.max_iou.assign(n, 0.0);
  result.forced.assign(n, false);
  if (pseudo_boxes.empty()) return result;

  const std::size_t m = pseudo_boxes.size();
  std::vector<double> overlaps(n * m);
  std::vector<std::size_t> argmax_gt(n, 0);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t g = 0; g < m; ++g) {
      const double v = iou(anchors.anchors[a], pseudo_boxes[g]);
      overlaps[a * m + g] = v;
      if (v > result.max_iou[a]) {
        result.max_iou[a] = v;
        argmax_gt[a] = g;
      }
    }
    if (result.max_iou[a] >= thresholds.fg) {
      result.labels[a] = AnchorLabel::kPositive;
      result.matched_gt[a] = argmax_gt[a];
    } else if (result.max_iou[a] < thresholds.bg) {
      result.labels[a] = AnchorLabel::kNegative;
    } else {
      result.labels[a] = AnchorLabel::kIgnore;
    }
  }

  // Boxes that no anchor reaches at fg get their single best anchor; a later box may take
  // over an anchor already forced for an earlier one.
  for (std::size_t g = 0; g < m; ++g) {
    std::size_t best = 0;
    double best_iou = -1.0;
    for (std::size_t a = 0; a < n; ++a) {
      if (overlaps[a * m + g] > best_iou) {
        best_iou = overlaps[a * m + g];
        best = a;
      }
    }
    if (best_iou >= thresholds.fg) continue;
    result.labels[best] = AnchorLabel::kPositive;
    result.matched_gt[best] = g;
    result.forced[best] = true;
  }
  return result;
}

std::optional<SampleBatch> sample_minibatch(const AssignmentResult& assignment,
                                            const AnchorSet& anchors,
                                            std::span<const Box> pseudo_boxes,
                                            std::size_t batch_size, SampleRatio ratio,
                                            std::uint64_t rng_seed) {
  require(batch_size >= 2, "minibatch size must be at least 2");
  require(ratio.pos >= 1 && ratio.neg >= 1, "sampling ratio terms must be >= 1");
  require(assignment.labels.size() == anchors.size(), "assignment does not match anchor set");

  std::vector<std::size_t> positives;
  std::vector<std::size_t> negatives;
  for (std::size_t i = 0; i < assignment.labels.size(); ++i) {
    if (assignment.labels[i] == AnchorLabel::kPositive) positives.push_back(i);
    if (assignment.labels[i] == AnchorLabel::kNegative) negatives.push_back(i);
  }
  if (positives.empty() && negatives.empty()) return std::nullopt;

  Rng rng(rng_seed);
  rng.shuffle(positives);
  rng.shuffle(negatives);

  const std::size_t pos_quota = batch_size * static_cast<std::size_t>(ratio.pos) /
                                static_cast<std::size_t>(ratio.pos + ratio.neg);
  const std::size_t pos_take = std::min(pos_quota, positives.size());
  const std::size_t neg_take = std::min(batch_size - pos_take, negatives.size());

  SampleBatch batch;
  batch.pos_count = pos_take;
  batch.neg_count = neg_take;
  batch.indices.reserve(pos_take + neg_take);
  for (std::size_t k = 0; k < pos_take; ++k) {
    const std::size_t a = positives[k];
    batch.indices.push_back(a);
    batch.target_labels.push_back(1);
    batch.target_deltas.push_back(
        encode_deltas(pseudo_boxes[*assignment.matched_gt[a]], anchors.anchors[a]));
  }
  for (std::size_t k = 0; k < neg_take; ++k) {
    batch.indices.push_back(negatives[k]);
    batch.target_labels.push_back(0);
    batch.target_deltas.push_back({});
  }
  return batch;
}

}  // namespace wend
