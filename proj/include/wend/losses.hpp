#pragma once

#include <array>
#include <span>
#include <vector>

#include "wend/geometry.hpp"

namespace wend {

inline constexpr double kProbEpsilon = 1e-7;

enum class RegressionKind { kSmoothL1, kGiou };

// Which predictions enter the weighted entropy term.
enum class EntropyScope { kAllAnchors, kSampled };

struct LossConfig {
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  double gamma = 6.0;
  double alpha = 0.1;
  double tau1 = 0.3;
  double tau2 = 0.3;
  double eta = 0.125;
  RegressionKind reg_kind = RegressionKind::kSmoothL1;
  double smooth_l1_beta = 1.0 / 9.0;
  EntropyScope entropy_scope = EntropyScope::kAllAnchors;

  // gamma=4, alpha=0.25, tau=0.1, eta=1/32.
  static LossConfig large_scale_preset();

  // Throws ValidationError on any out-of-domain field.
  void validate() const;
};

using Grad4 = std::array<double, 4>;

// A loss value together with its gradient. grad_p is aligned with the probability inputs,
// grad_t with the 4-vector inputs (deltas or box corners, depending on the loss).
struct LossValue {
  double value = 0.0;
  std::vector<double> grad_p;
  std::vector<Grad4> grad_t;
};

// Binary cross-entropy against a soft target in [0,1]; p is clamped to [eps, 1-eps].
LossValue bce(double p, double target);

LossValue smooth_l1(const DeltaVec& t, const DeltaVec& t_star, double beta);

// 1 - GIoU; grad_t[0] holds d/d(x1,y1,x2,y2) of pred.
LossValue giou_loss(const Box& pred, const Box& target);

// GIoU loss on boxes decoded from (t, t_star) against a common anchor; grad_t[0] is with
// respect to t.
LossValue giou_delta_loss(const DeltaVec& t, const DeltaVec& t_star, const Box& anchor,
                          double clamp = kDefaultDeltaClamp);

// lambda1 * mean BCE + lambda2 * (1/N_reg) * sum over positives of L_reg. `anchors` is only
// consulted for RegressionKind::kGiou.
LossValue supervised_loss(std::span<const double> p, std::span<const int> labels,
                          std::span<const DeltaVec> t, std::span<const DeltaVec> t_star,
                          const LossConfig& cfg, std::span<const Box> anchors = {});

double we_weight(double p, const LossConfig& cfg);

LossValue weighted_entropy_loss(std::span<const double> p, const LossConfig& cfg);

LossValue quality_loss(double c, double c_star);

// eta * sup + unsup. Gradient arrays must either be aligned or one side empty.
LossValue total_loss(const LossValue& sup, const LossValue& unsup, const LossConfig& cfg);

}  // namespace wend
