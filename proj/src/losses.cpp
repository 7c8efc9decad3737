#include "wend/losses.hpp"

#include <algorithm>
#include <cmath>

#include "wend/error.hpp"

namespace wend {

LossConfig LossConfig::large_scale_preset() {
  LossConfig cfg;
  cfg.gamma = 4.0;
  cfg.alpha = 0.25;
  cfg.tau1 = 0.1;
  cfg.tau2 = 0.1;
  cfg.eta = 0.03125;
  return cfg;
}

void LossConfig::validate() const {
  require(lambda1 >= 0.0 && lambda2 >= 0.0, "loss.lambda1 and loss.lambda2 must be >= 0");
  require(gamma >= 0.0, "loss.gamma must be >= 0");
  require(alpha > 0.0 && alpha < 1.0, "loss.alpha must lie in (0,1)");
  // The closed ends admit tau1=0, tau2=1, which switches the entropy term off entirely.
  require(tau1 >= 0.0 && tau2 <= 1.0 && tau1 <= tau2, "loss.tau1 <= loss.tau2 within [0,1] required");
  require(eta >= 0.0, "loss.eta must be >= 0");
  require(smooth_l1_beta > 0.0, "loss.smooth_l1_beta must be > 0");
}

namespace {

double clamp_prob(double p) { return std::clamp(p, kProbEpsilon, 1.0 - kProbEpsilon); }

struct GiouParts {
  double value;
  Grad4 grad;
};

GiouParts giou_loss_parts(const Box& p, const Box& t) {
  const double pw = p.width();
  const double ph = p.height();
  const double area_p = pw * ph;
  const double area_t = t.area();

  const double iw = std::min(p.x2, t.x2) - std::max(p.x1, t.x1);
  const double ih = std::min(p.y2, t.y2) - std::max(p.y1, t.y1);
  const bool overlap = iw > 0.0 && ih > 0.0;
  const double inter = overlap ? iw * ih : 0.0;
  const double uni = area_p + area_t - inter;

  const double cw = std::max(p.x2, t.x2) - std::min(p.x1, t.x1);
  const double ch = std::max(p.y2, t.y2) - std::min(p.y1, t.y1);
  const double enc = cw * ch;

  // L = 2 - I/U - U/C
  const double value = 2.0 - inter / uni - uni / enc;

  const Grad4 d_area_p{-ph, -pw, ph, pw};
  Grad4 d_inter{0.0, 0.0, 0.0, 0.0};
  if (overlap) {
    d_inter[0] = p.x1 > t.x1 ? -ih : 0.0;
    d_inter[1] = p.y1 > t.y1 ? -iw : 0.0;
    d_inter[2] = p.x2 < t.x2 ? ih : 0.0;
    d_inter[3] = p.y2 < t.y2 ? iw : 0.0;
  }
  const Grad4 d_enc{p.x1 < t.x1 ? -ch : 0.0, p.y1 < t.y1 ? -cw : 0.0, p.x2 > t.x2 ? ch : 0.0,
                    p.y2 > t.y2 ? cw : 0.0};

  Grad4 grad{};
  for (int k = 0; k < 4; ++k) {
    const double d_uni = d_area_p[k] - d_inter[k];
    grad[k] = -(d_inter[k] * uni - inter * d_uni) / (uni * uni) -
              (d_uni * enc - uni * d_enc[k]) / (enc * enc);
  }
  return {value, grad};
}

}  // namespace

LossValue bce(double p, double target) {
  const double pc = clamp_prob(p);
  LossValue out;
  out.value = -target * std::log(pc) - (1.0 - target) * std::log(1.0 - pc);
  out.grad_p = {(pc - target) / (pc * (1.0 - pc))};
  return out;
}

LossValue smooth_l1(const DeltaVec& t, const DeltaVec& t_star, double beta) {
  require(beta > 0.0, "smooth L1 beta must be positive");
  const auto a = t.to_array();
  const auto b = t_star.to_array();
  LossValue out;
  Grad4 g{};
  for (int k = 0; k < 4; ++k) {
    const double d = a[k] - b[k];
    const double ad = std::abs(d);
    if (ad < beta) {
      out.value += 0.5 * d * d / beta;
      g[k] = d / beta;
    } else {
      out.value += ad - 0.5 * beta;
      g[k] = d > 0.0 ? 1.0 : -1.0;
    }
  }
  out.grad_t = {g};
  return out;
}

LossValue giou_loss(const Box& pred, const Box& target) {
  const GiouParts parts = giou_loss_parts(pred, target);
  LossValue out;
  out.value = parts.value;
  out.grad_t = {parts.grad};
  return out;
}

LossValue giou_delta_loss(const DeltaVec& t, const DeltaVec& t_star, const Box& anchor,
                          double clamp) {
  const Box pred = decode_deltas(t, anchor, clamp);
  const Box target = decode_deltas(t_star, anchor, clamp);
  const GiouParts parts = giou_loss_parts(pred, target);
  const auto& g = parts.grad;  // d/d(x1,y1,x2,y2)

  const double aw = anchor.width();
  const double ah = anchor.height();
  const double w = pred.width();
  const double h = pred.height();
  const double dw = std::abs(t.tw) < clamp ? 1.0 : 0.0;
  const double dh = std::abs(t.th) < clamp ? 1.0 : 0.0;

  LossValue out;
  out.value = parts.value;
  out.grad_t = {Grad4{(g[0] + g[2]) * aw, (g[1] + g[3]) * ah, 0.5 * w * (g[2] - g[0]) * dw,
                      0.5 * h * (g[3] - g[1]) * dh}};
  return out;
}

LossValue supervised_loss(std::span<const double> p, std::span<const int> labels,
                          std::span<const DeltaVec> t, std::span<const DeltaVec> t_star,
                          const LossConfig& cfg, std::span<const Box> anchors) {
  const std::size_t n = p.size();
  require(n > 0, "supervised loss needs a non-empty batch");
  require(labels.size() == n && t.size() == n && t_star.size() == n,
          "supervised loss inputs are not aligned");
  if (cfg.reg_kind == RegressionKind::kGiou) {
    require(anchors.size() == n, "GIoU regression needs one anchor per sample");
  }

  LossValue out;
  out.grad_p.assign(n, 0.0);
  out.grad_t.assign(n, Grad4{});

  double cls_sum = 0.0;
  std::size_t n_reg = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const LossValue c = bce(p[i], labels[i]);
    cls_sum += c.value;
    out.grad_p[i] = cfg.lambda1 * c.grad_p[0] / static_cast<double>(n);
    if (labels[i] == 1) ++n_reg;
  }
  out.value = cfg.lambda1 * cls_sum / static_cast<double>(n);

  if (n_reg == 0) return out;
  double reg_sum = 0.0;
  const double scale = cfg.lambda2 / static_cast<double>(n_reg);
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] != 1) continue;
    const LossValue r = cfg.reg_kind == RegressionKind::kSmoothL1
                            ? smooth_l1(t[i], t_star[i], cfg.smooth_l1_beta)
                            : giou_delta_loss(t[i], t_star[i], anchors[i]);
    reg_sum += r.value;
    for (int k = 0; k < 4; ++k) out.grad_t[i][k] = scale * r.grad_t[0][k];
  }
  out.value += scale * reg_sum;
  return out;
}

double we_weight(double p, const LossConfig& cfg) {
  if (p < cfg.tau1) return (1.0 - cfg.alpha) * std::pow(p, cfg.gamma);
  if (p > cfg.tau2) return cfg.alpha * std::pow(1.0 - p, cfg.gamma);
  return 0.0;
}

namespace {

double we_weight_derivative(double p, const LossConfig& cfg) {
  if (cfg.gamma == 0.0) return 0.0;
  if (p < cfg.tau1) return (1.0 - cfg.alpha) * cfg.gamma * std::pow(p, cfg.gamma - 1.0);
  if (p > cfg.tau2) return -cfg.alpha * cfg.gamma * std::pow(1.0 - p, cfg.gamma - 1.0);
  return 0.0;
}

}  // namespace

LossValue weighted_entropy_loss(std::span<const double> p, const LossConfig& cfg) {
  LossValue out;
  const std::size_t n = p.size();
  out.grad_p.assign(n, 0.0);
  if (n == 0) return out;

  const double inv_n = 1.0 / static_cast<double>(n);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = we_weight(p[i], cfg);
    if (w == 0.0 && we_weight_derivative(p[i], cfg) == 0.0) continue;
    const double pc = clamp_prob(p[i]);
    const double log_pc = std::log(pc);
    const double h = -p[i] * log_pc;
    // d/dp of -p*log(clamp(p)); the clamp only bites outside [eps, 1-eps].
    const double dh = pc == p[i] ? -log_pc - 1.0 : -log_pc;
    sum += w * h;
    out.grad_p[i] = inv_n * (we_weight_derivative(p[i], cfg) * h + w * dh);
  }
  out.value = sum * inv_n;
  return out;
}

LossValue quality_loss(double c, double c_star) {
  require(c_star >= 0.0 && c_star <= 1.0, "quality target must lie in [0,1]");
  return bce(c, c_star);
}

namespace {

template <typename T>
std::vector<T> combine(const std::vector<T>& a, double wa, const std::vector<T>& b, double wb) {
  require(a.empty() || b.empty() || a.size() == b.size(),
          "total loss gradients are not aligned");
  const std::size_t n = std::max(a.size(), b.size());
  std::vector<T> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    if constexpr (std::is_same_v<T, double>) {
      out[i] = (a.empty() ? 0.0 : wa * a[i]) + (b.empty() ? 0.0 : wb * b[i]);
    } else {
      for (std::size_t k = 0; k < out[i].size(); ++k) {
        out[i][k] = (a.empty() ? 0.0 : wa * a[i][k]) + (b.empty() ? 0.0 : wb * b[i][k]);
      }
    }
  }
  return out;
}

}  // namespace

LossValue total_loss(const LossValue& sup, const LossValue& unsup, const LossConfig& cfg) {
  LossValue out;
  out.value = cfg.eta * sup.value + unsup.value;
  out.grad_p = combine(sup.grad_p, cfg.eta, unsup.grad_p, 1.0);
  out.grad_t = combine(sup.grad_t, cfg.eta, unsup.grad_t, 1.0);
  return out;
}

}  // namespace wend
