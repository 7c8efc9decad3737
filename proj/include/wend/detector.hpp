#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "wend/assignment.hpp"
#include "wend/autodiff.hpp"
#include "wend/geometry.hpp"
#include "wend/image.hpp"
#include "wend/losses.hpp"
#include "wend/optim.hpp"
#include "wend/rng.hpp"

namespace wend {

enum class QualityKind { kIou, kCenterness };

// Soft target for the localization-quality branch of a positive anchor. kIou scores the
// decoded prediction, kCenterness the anchor center's position inside matched_gt.
double quality_target(const Box& anchor, const Box& matched_gt, QualityKind kind,
                      const Box& predicted);

struct DetectorConfig {
  ImageSize image_size{64, 64};
  int channels = 1;
  std::vector<int> widths{16, 32, 64, 64};
  std::vector<int> strides{2, 2, 2, 2};
  std::vector<double> anchor_scales{24.0};
  std::vector<double> anchor_ratios{1.0};
  bool quality_head = false;
  QualityKind quality_kind = QualityKind::kIou;
  AssignmentThresholds thresholds{};
  std::size_t sample_size = 256;
  SampleRatio ratio{1, 4};
  double head_lr_multiplier = 2.0;

  int anchor_stride() const;
  void validate() const;
};

struct DetectorOutput {
  std::vector<double> p;
  std::vector<DeltaVec> deltas;
  std::vector<double> quality;  // empty without a quality head
};

struct PredictOptions {
  double score_thresh = 0.05;
  double nms_thresh = 0.5;
  std::size_t max_outputs = 10;
};

struct TrainSample {
  const Image* image = nullptr;
  std::span<const Box> pseudo_boxes;
};

struct StepLosses {
  double sup = 0.0;
  double unsup = 0.0;
  double total = 0.0;
};

// Conv backbone shared by both localizers: 3x3 conv + relu blocks.
class Backbone {
 public:
  Backbone(const DetectorConfig& cfg, std::uint64_t seed, std::vector<ad::Parameter>& params);
  ad::Tensor forward(const ad::Tensor& x) const;

 private:
  std::vector<ad::Tensor> weights_;
  std::vector<ad::Tensor> biases_;
  std::vector<int> strides_;
};

// Binary-class detector: per-anchor foreground probability, box deltas and an optional
// quality score, trained on pseudo boxes with eta*L_sup + L_unsup.
class BcdModel {
 public:
  BcdModel(DetectorConfig cfg, LossConfig loss_cfg, std::uint64_t init_seed,
           bool use_entropy = true);
  BcdModel(const BcdModel&) = delete;
  BcdModel& operator=(const BcdModel&) = delete;

  const DetectorConfig& config() const { return cfg_; }
  const LossConfig& loss_config() const { return loss_cfg_; }
  const AnchorSet& anchors() const { return anchors_; }
  bool uses_entropy() const { return use_entropy_; }
  std::vector<ad::Parameter>& parameters() { return params_; }
  std::span<const ad::Parameter> parameters() const { return params_; }

  DetectorOutput forward(const Image& image) const;
  std::vector<DetectorOutput> forward_batch(std::span<const Image* const> images) const;

  std::vector<ScoredBox> predict(const Image& image, const PredictOptions& opts) const;
  std::vector<ScoredBox> predict_from(const DetectorOutput& out, const PredictOptions& opts) const;

  // Graph of the mean per-image total loss; no parameter update.
  ad::Tensor loss(std::span<const TrainSample> batch, std::uint64_t sample_seed,
                  StepLosses* losses = nullptr) const;

  StepLosses train_step(std::span<const TrainSample> batch, ad::OptimizerState& opt, double lr,
                        std::uint64_t sample_seed);

 private:
  struct Heads {
    ad::Tensor p;        // [N*A]
    ad::Tensor deltas;   // [N*A*4]
    ad::Tensor quality;  // [N*A] or empty
  };
  Heads run(std::span<const Image* const> images) const;

  DetectorConfig cfg_;
  LossConfig loss_cfg_;
  bool use_entropy_;
  AnchorSet anchors_;
  std::vector<ad::Parameter> params_;
  Backbone backbone_;
  ad::Tensor cls_w_, cls_b_, reg_w_, reg_b_, q_w_, q_b_;
};

// Single-box regressor: global pooling then a linear layer emitting normalized
// (x1, y1, x2, y2). Trained by smooth L1 against the first pseudo box.
class ScrModel {
 public:
  ScrModel(DetectorConfig cfg, LossConfig loss_cfg, std::uint64_t init_seed);
  ScrModel(const ScrModel&) = delete;
  ScrModel& operator=(const ScrModel&) = delete;

  const DetectorConfig& config() const { return cfg_; }
  std::vector<ad::Parameter>& parameters() { return params_; }
  std::span<const ad::Parameter> parameters() const { return params_; }

  Box forward(const Image& image) const;
  std::vector<Box> forward_batch(std::span<const Image* const> images) const;

  // Samples without pseudo boxes are skipped; returns nullopt if none remain.
  std::optional<double> train_step(std::span<const TrainSample> batch, ad::OptimizerState& opt,
                                   double lr);
  ad::Tensor loss(std::span<const TrainSample> batch) const;

 private:
  ad::Tensor raw(std::span<const Image* const> images) const;
  Box to_box(const double* normalized) const;

  DetectorConfig cfg_;
  LossConfig loss_cfg_;
  std::vector<ad::Parameter> params_;
  Backbone backbone_;
  ad::Tensor fc_w_, fc_b_;
};

}  // namespace wend
