#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "wend/assignment.hpp"
#include "wend/geometry.hpp"
#include "wend/image.hpp"
#include "wend/rng.hpp"

namespace wend {

// The first three classes form the default 3-class task; all ten give a task where Top-5
// is non-trivial.
enum class ShapeClass : int {
  kCircle = 0,
  kSquare,
  kTriangle,
  kDiamond,
  kRing,
  kFrame,
  kCross,
  kEllipse,
  kHexagon,
  kSemicircle,
};
inline constexpr int kMaxShapeClasses = 10;
inline constexpr int kMaxObjects = 3;

std::string_view shape_name(ShapeClass c);

struct ObjectSpec {
  ShapeClass shape = ShapeClass::kSquare;
  double cx = 0.0;
  double cy = 0.0;
  double size = 0.0;  // side of the nominal bounding square
  double intensity = 1.0;

  Box nominal_box() const {
    return {cx - 0.5 * size, cy - 0.5 * size, cx + 0.5 * size, cy + 0.5 * size};
  }
};

struct BackgroundSpec {
  double base = 0.2;
  double gradient_angle = 0.0;  // radians
  double gradient_amplitude = 0.0;
  double noise_level = 0.0;
  int distractor_count = 0;
};

struct SceneSpec {
  ImageSize image_size{64, 64};
  int channels = 1;
  std::vector<ObjectSpec> objects;
  BackgroundSpec background;

  // Throws ValidationError unless 1..3 objects lie inside the image with pairwise IoU < 0.2.
  void validate() const;
};

struct RenderedScene {
  Image image;
  std::vector<Box> gt_boxes;  // tight bounds of the rasterized shapes
  std::vector<int> gt_classes;
};

RenderedScene render_scene(const SceneSpec& spec, std::uint64_t rng_seed);

// Ranges for randomly drawn scenes.
struct SceneParams {
  ImageSize image_size{64, 64};
  int channels = 1;
  int min_objects = 1;
  int max_objects = 3;
  double min_size = 14.0;
  double max_size = 28.0;
  int num_classes = 3;
  double max_noise = 0.06;
  int max_distractors = 3;

  void validate() const;
};

SceneSpec sample_scene(const SceneParams& params, Rng& rng);

struct NoiseModel {
  double jitter_sigma = 0.0;
  double wrong_box_prob = 0.0;
  double drop_prob = 0.0;

  void validate() const;
};

enum class Provenance { kClean, kJittered, kWrong };
std::string_view provenance_name(Provenance p);
Provenance parse_provenance(std::string_view s);

struct CorruptedBoxes {
  std::vector<Box> boxes;
  std::vector<Provenance> provenance;
};

CorruptedBoxes corrupt_boxes(std::span<const Box> gt_boxes, const NoiseModel& noise,
                             ImageSize image_size, std::uint64_t rng_seed);

struct ClassScoreModel {
  double top1_acc = 0.8;
  double top5_acc = 0.95;

  void validate() const;
};

// Distinct scores summing to 1. The true class is ranked first with probability top1_acc
// and inside the first five with probability top5_acc.
std::vector<double> simulate_class_scores(int gt_class, const ClassScoreModel& model,
                                          int num_classes, std::uint64_t rng_seed);

}  // namespace wend
