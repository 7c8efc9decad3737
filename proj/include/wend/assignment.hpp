#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "wend/geometry.hpp"

namespace wend {

struct ImageSize {
  int width = 0;
  int height = 0;
};

// Reference boxes tiled over the feature grid: row-major over locations, then scale, then
// aspect ratio.
struct AnchorSet {
  std::vector<Box> anchors;
  int stride = 0;
  std::vector<double> scales;
  std::vector<double> aspect_ratios;
  ImageSize image_size;

  std::size_t size() const { return anchors.size(); }
  std::size_t per_location() const { return scales.size() * aspect_ratios.size(); }
  int grid_width() const { return image_size.width / stride; }
  int grid_height() const { return image_size.height / stride; }
};

// aspect ratio r = width/height at constant area scale^2.
AnchorSet generate_anchors(ImageSize image_size, int stride, std::span<const double> scales,
                           std::span<const double> aspect_ratios);

enum class AnchorLabel : std::int8_t { kIgnore = -1, kNegative = 0, kPositive = 1 };

struct AssignmentResult {
  std::vector<AnchorLabel> labels;
  std::vector<std::optional<std::size_t>> matched_gt;
  std::vector<double> max_iou;
  // True where the positive label came from the per-box best-match rule.
  std::vector<bool> forced;

  std::size_t count(AnchorLabel label) const;
};

struct AssignmentThresholds {
  double fg = 0.7;
  double bg = 0.3;
};

AssignmentResult assign_labels(const AnchorSet& anchors, std::span<const Box> pseudo_boxes,
                               AssignmentThresholds thresholds = {});

// Positive:negative sampling proportion, e.g. {1, 4}.
struct SampleRatio {
  int pos = 1;
  int neg = 4;
};

struct SampleBatch {
  std::vector<std::size_t> indices;
  std::vector<int> target_labels;
  // Aligned with indices; meaningful only where target_labels is 1.
  std::vector<DeltaVec> target_deltas;
  std::size_t pos_count = 0;
  std::size_t neg_count = 0;
};

// Returns nullopt when the image has neither a positive nor a negative anchor.
std::optional<SampleBatch> sample_minibatch(const AssignmentResult& assignment,
                                            const AnchorSet& anchors,
                                            std::span<const Box> pseudo_boxes,
                                            std::size_t batch_size, SampleRatio ratio,
                                            std::uint64_t rng_seed);

}  // namespace wend
