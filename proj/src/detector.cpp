#include "wend/detector.hpp"

#include <algorithm>
#include <cmath>

#include "wend/error.hpp"

namespace wend {

double quality_target(const Box& anchor, const Box& matched_gt, QualityKind kind,
                      const Box& predicted) {
  if (kind == QualityKind::kIou) return iou(predicted, matched_gt);
  const double l = anchor.cx() - matched_gt.x1;
  const double r = matched_gt.x2 - anchor.cx();
  const double t = anchor.cy() - matched_gt.y1;
  const double b = matched_gt.y2 - anchor.cy();
  if (l <= 0.0 || r <= 0.0 || t <= 0.0 || b <= 0.0) return 0.0;
  return std::sqrt((std::min(l, r) / std::max(l, r)) * (std::min(t, b) / std::max(t, b)));
}

int DetectorConfig::anchor_stride() const {
  int s = 1;
  for (int v : strides) s *= v;
  return s;
}

void DetectorConfig::validate() const {
  require(channels == 1 || channels == 3, "model.channels must be 1 or 3");
  require(!widths.empty() && widths.size() == strides.size(),
          "model.widths and model.strides must have equal, non-zero length");
  for (int w : widths) require(w > 0, "model.widths entries must be positive");
  for (int s : strides) require(s == 1 || s == 2, "model.strides entries must be 1 or 2");
  const int stride = anchor_stride();
  require(image_size.width % stride == 0 && image_size.height % stride == 0,
          "backbone stride " + std::to_string(stride) + " does not divide the image size");
  require(thresholds.fg >= thresholds.bg && thresholds.bg >= 0.0 && thresholds.fg <= 1.0,
          "assignment thresholds must satisfy 0 <= bg <= fg <= 1");
  require(sample_size >= 2, "assign.sample_size must be >= 2");
  require(ratio.pos >= 1 && ratio.neg >= 1, "assign.ratio terms must be >= 1");
  require(head_lr_multiplier > 0.0, "optim.head_lr_multiplier must be > 0");
}

namespace {

ad::Tensor normal_tensor(ad::Shape shape, double stddev, Rng& rng) {
  std::vector<double> v(ad::numel(shape));
  for (auto& x : v) x = rng.normal(0.0, stddev);
  return ad::Tensor::from(std::move(shape), std::move(v), true);
}

ad::Tensor const_tensor(ad::Shape shape, double value) {
  return ad::Tensor::from(shape, std::vector<double>(ad::numel(shape), value), true);
}

void check_image(const Image& img, const DetectorConfig& cfg) {
  if (img.width != cfg.image_size.width || img.height != cfg.image_size.height ||
      img.channels != cfg.channels) {
    throw ValidationError("image is " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                          "x" + std::to_string(img.channels) + ", model expects " +
                          std::to_string(cfg.image_size.width) + "x" +
                          std::to_string(cfg.image_size.height) + "x" + std::to_string(cfg.channels));
  }
}

ad::Tensor stack_images(std::span<const Image* const> images, const DetectorConfig& cfg) {
  require(!images.empty(), "empty image batch");
  std::vector<double> data;
  for (const Image* img : images) {
    check_image(*img, cfg);
    append_planar(*img, data);
  }
  return ad::Tensor::from({images.size(), static_cast<std::size_t>(cfg.channels),
                           static_cast<std::size_t>(cfg.image_size.height),
                           static_cast<std::size_t>(cfg.image_size.width)},
                          std::move(data));
}

}  // namespace

Backbone::Backbone(const DetectorConfig& cfg, std::uint64_t seed, std::vector<ad::Parameter>& params)
    : strides_(cfg.strides) {
  Rng rng(seed);
  std::size_t in = static_cast<std::size_t>(cfg.channels);
  for (std::size_t i = 0; i < cfg.widths.size(); ++i) {
    const auto out = static_cast<std::size_t>(cfg.widths[i]);
    weights_.push_back(normal_tensor({out, in, 3, 3}, std::sqrt(2.0 / (in * 9.0)), rng));
    biases_.push_back(const_tensor({out}, 0.0));
    const std::string name = "backbone.conv" + std::to_string(i);
    params.push_back({name + ".weight", weights_.back(), 1.0, true});
    params.push_back({name + ".bias", biases_.back(), 1.0, false});
    in = out;
  }
}

ad::Tensor Backbone::forward(const ad::Tensor& x) const {
  ad::Tensor h = x;
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    h = ad::relu(ad::conv2d(h, weights_[i], biases_[i], strides_[i], 1));
  }
  return h;
}

BcdModel::BcdModel(DetectorConfig cfg, LossConfig loss_cfg, std::uint64_t init_seed, bool use_entropy)
    : cfg_((cfg.validate(), std::move(cfg))),
      loss_cfg_((loss_cfg.validate(), loss_cfg)),
      use_entropy_(use_entropy),
      anchors_(generate_anchors(cfg_.image_size, cfg_.anchor_stride(), cfg_.anchor_scales,
                                cfg_.anchor_ratios)),
      backbone_(cfg_, derive_seed(init_seed, 1), params_) {
  Rng rng(derive_seed(init_seed, 2));
  const auto feat = static_cast<std::size_t>(cfg_.widths.back());
  const std::size_t a = anchors_.per_location();
  const double head_lr = cfg_.head_lr_multiplier;
  cls_w_ = normal_tensor({a, feat, 1, 1}, 0.01, rng);
  cls_b_ = const_tensor({a}, std::log(0.01 / 0.99));
  reg_w_ = normal_tensor({4 * a, feat, 1, 1}, 0.01, rng);
  reg_b_ = const_tensor({4 * a}, 0.0);
  params_.push_back({"head.cls.weight", cls_w_, head_lr, true});
  params_.push_back({"head.cls.bias", cls_b_, head_lr, false});
  params_.push_back({"head.reg.weight", reg_w_, head_lr, true});
  params_.push_back({"head.reg.bias", reg_b_, head_lr, false});
  if (cfg_.quality_head) {
    q_w_ = normal_tensor({a, feat, 1, 1}, 0.01, rng);
    q_b_ = const_tensor({a}, 0.0);
    params_.push_back({"head.quality.weight", q_w_, head_lr, true});
    params_.push_back({"head.quality.bias", q_b_, head_lr, false});
  }
}

BcdModel::Heads BcdModel::run(std::span<const Image* const> images) const {
  const ad::Tensor feat = backbone_.forward(stack_images(images, cfg_));
  const std::size_t total = images.size() * anchors_.size();
  Heads h;
  h.p = ad::sigmoid(ad::reshape(ad::to_nhwc(ad::conv2d(feat, cls_w_, cls_b_, 1, 0)), {total}));
  h.deltas = ad::reshape(ad::to_nhwc(ad::conv2d(feat, reg_w_, reg_b_, 1, 0)), {total * 4});
  if (cfg_.quality_head) {
    h.quality = ad::sigmoid(ad::reshape(ad::to_nhwc(ad::conv2d(feat, q_w_, q_b_, 1, 0)), {total}));
  }
  return h;
}

std::vector<DetectorOutput> BcdModel::forward_batch(std::span<const Image* const> images) const {
  const Heads h = run(images);
  const std::size_t na = anchors_.size();
  std::vector<DetectorOutput> outs(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) {
    auto& o = outs[i];
    o.p.assign(h.p.data().begin() + i * na, h.p.data().begin() + (i + 1) * na);
    o.deltas.resize(na);
    for (std::size_t a = 0; a < na; ++a) {
      const double* d = h.deltas.data().data() + (i * na + a) * 4;
      o.deltas[a] = {d[0], d[1], d[2], d[3]};
    }
    if (h.quality) o.quality.assign(h.quality.data().begin() + i * na, h.quality.data().begin() + (i + 1) * na);
  }
  return outs;
}

DetectorOutput BcdModel::forward(const Image& image) const {
  const Image* one[] = {&image};
  return std::move(forward_batch(one).front());
}

std::vector<ScoredBox> BcdModel::predict_from(const DetectorOutput& out, const PredictOptions& opts) const {
  require(opts.score_thresh >= 0.0 && opts.score_thresh <= 1.0 && opts.nms_thresh >= 0.0 &&
              opts.nms_thresh <= 1.0,
          "prediction thresholds must lie in [0,1]");
  std::vector<ScoredBox> candidates;
  for (std::size_t a = 0; a < anchors_.size(); ++a) {
    const double score = out.quality.empty() ? out.p[a] : out.p[a] * out.quality[a];
    if (!(score > opts.score_thresh)) continue;
    const Box box = clip_box(decode_deltas(out.deltas[a], anchors_.anchors[a]), cfg_.image_size.width,
                             cfg_.image_size.height);
    candidates.push_back({box, score});
  }
  auto kept = nms(candidates, opts.nms_thresh);
  if (kept.size() > opts.max_outputs) kept.resize(opts.max_outputs);
  return kept;
}

std::vector<ScoredBox> BcdModel::predict(const Image& image, const PredictOptions& opts) const {
  return predict_from(forward(image), opts);
}

ad::Tensor BcdModel::loss(std::span<const TrainSample> batch, std::uint64_t sample_seed,
                          StepLosses* losses) const {
  std::vector<const Image*> images;
  for (const auto& s : batch) images.push_back(s.image);
  const Heads h = run(images);

  const std::size_t na = anchors_.size();
  const std::size_t n_all = batch.size() * na;
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  std::vector<double> g_p(n_all, 0.0), g_t(n_all * 4, 0.0), g_q(cfg_.quality_head ? n_all : 0, 0.0);
  std::vector<double> g_unsup(n_all, 0.0);
  double sup_sum = 0.0;
  double unsup_sum = 0.0;

  const auto p_all = h.p.data();
  const auto t_all = h.deltas.data();
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const std::size_t base = i * na;
    const auto pseudo = batch[i].pseudo_boxes;
    const AssignmentResult assignment = assign_labels(anchors_, pseudo, cfg_.thresholds);
    const auto sample = sample_minibatch(assignment, anchors_, pseudo, cfg_.sample_size, cfg_.ratio,
                                         derive_seed(sample_seed, i));
    std::vector<double> entropy_p;
    std::vector<std::size_t> entropy_idx;
    if (sample) {
      const std::size_t m = sample->indices.size();
      std::vector<double> p(m);
      std::vector<DeltaVec> t(m);
      std::vector<Box> anchor_boxes(m);
      for (std::size_t j = 0; j < m; ++j) {
        const std::size_t a = sample->indices[j];
        p[j] = p_all[base + a];
        const double* d = t_all.data() + (base + a) * 4;
        t[j] = {d[0], d[1], d[2], d[3]};
        anchor_boxes[j] = anchors_.anchors[a];
      }
      const LossValue sup = supervised_loss(p, sample->target_labels, t, sample->target_deltas,
                                            loss_cfg_, anchor_boxes);
      sup_sum += sup.value;
      for (std::size_t j = 0; j < m; ++j) {
        const std::size_t a = sample->indices[j];
        g_p[base + a] += inv_n * sup.grad_p[j];
        for (int k = 0; k < 4; ++k) g_t[(base + a) * 4 + k] += inv_n * sup.grad_t[j][k];
      }

      if (cfg_.quality_head && sample->pos_count > 0) {
        const auto q_all = h.quality.data();
        const double inv_pos = 1.0 / static_cast<double>(sample->pos_count);
        for (std::size_t j = 0; j < m; ++j) {
          if (sample->target_labels[j] != 1) continue;
          const std::size_t a = sample->indices[j];
          const Box& gt = pseudo[*assignment.matched_gt[a]];
          const double target = quality_target(anchors_.anchors[a], gt, cfg_.quality_kind,
                                               decode_deltas(t[j], anchors_.anchors[a]));
          const LossValue q = quality_loss(q_all[base + a], target);
          sup_sum += inv_pos * q.value;
          g_q[base + a] += inv_n * inv_pos * q.grad_p[0];
        }
      }
      if (loss_cfg_.entropy_scope == EntropyScope::kSampled) {
        entropy_idx = sample->indices;
      }
    }
    if (!use_entropy_) continue;
    if (loss_cfg_.entropy_scope == EntropyScope::kAllAnchors) {
      entropy_idx.resize(na);
      for (std::size_t a = 0; a < na; ++a) entropy_idx[a] = a;
    }
    for (std::size_t a : entropy_idx) entropy_p.push_back(p_all[base + a]);
    const LossValue unsup = weighted_entropy_loss(entropy_p, loss_cfg_);
    unsup_sum += unsup.value;
    for (std::size_t j = 0; j < entropy_idx.size(); ++j) {
      g_unsup[base + entropy_idx[j]] += inv_n * unsup.grad_p[j];
    }
  }

  const double sup_mean = sup_sum * inv_n;
  const double unsup_mean = unsup_sum * inv_n;
  std::vector<ad::Tensor> sup_inputs{h.p, h.deltas};
  std::vector<std::vector<double>> sup_grads{std::move(g_p), std::move(g_t)};
  if (cfg_.quality_head) {
    sup_inputs.push_back(h.quality);
    sup_grads.push_back(std::move(g_q));
  }
  const ad::Tensor sup_node = ad::external_loss(sup_inputs, sup_mean, std::move(sup_grads));
  const ad::Tensor p_only[] = {h.p};
  const ad::Tensor unsup_node = ad::external_loss(p_only, unsup_mean, {std::move(g_unsup)});
  ad::Tensor total = ad::add(ad::mul_scalar(sup_node, loss_cfg_.eta), unsup_node);
  if (losses) *losses = {sup_mean, unsup_mean, total.item()};
  return total;
}

StepLosses BcdModel::train_step(std::span<const TrainSample> batch, ad::OptimizerState& opt, double lr,
                                std::uint64_t sample_seed) {
  StepLosses out;
  ad::zero_grads(params_);
  const ad::Tensor total = loss(batch, sample_seed, &out);
  ad::backward(total);
  ad::sgd_step(params_, opt, lr);
  return out;
}

ScrModel::ScrModel(DetectorConfig cfg, LossConfig loss_cfg, std::uint64_t init_seed)
    : cfg_((cfg.validate(), std::move(cfg))),
      loss_cfg_((loss_cfg.validate(), loss_cfg)),
      backbone_(cfg_, derive_seed(init_seed, 1), params_) {
  Rng rng(derive_seed(init_seed, 3));
  const auto feat = static_cast<std::size_t>(cfg_.widths.back());
  fc_w_ = normal_tensor({4, feat}, 0.01, rng);
  fc_b_ = ad::Tensor::from({4}, {0.25, 0.25, 0.75, 0.75}, true);
  params_.push_back({"head.fc.weight", fc_w_, cfg_.head_lr_multiplier, true});
  params_.push_back({"head.fc.bias", fc_b_, cfg_.head_lr_multiplier, false});
}

ad::Tensor ScrModel::raw(std::span<const Image* const> images) const {
  return ad::linear(ad::global_avg_pool(backbone_.forward(stack_images(images, cfg_))), fc_w_, fc_b_);
}

Box ScrModel::to_box(const double* v) const {
  const double w = cfg_.image_size.width;
  const double h = cfg_.image_size.height;
  Box b{std::min(v[0], v[2]) * w, std::min(v[1], v[3]) * h, std::max(v[0], v[2]) * w,
        std::max(v[1], v[3]) * h};
  if (b.x2 - b.x1 < 1.0) b.x2 = b.x1 + 1.0;
  if (b.y2 - b.y1 < 1.0) b.y2 = b.y1 + 1.0;
  return clip_box(b, w, h);
}

std::vector<Box> ScrModel::forward_batch(std::span<const Image* const> images) const {
  const ad::Tensor out = raw(images);
  std::vector<Box> boxes;
  for (std::size_t i = 0; i < images.size(); ++i) boxes.push_back(to_box(out.data().data() + i * 4));
  return boxes;
}

Box ScrModel::forward(const Image& image) const {
  const Image* one[] = {&image};
  return forward_batch(one).front();
}

ad::Tensor ScrModel::loss(std::span<const TrainSample> batch) const {
  std::vector<const Image*> images;
  std::vector<Box> targets;
  for (const auto& s : batch) {
    if (s.pseudo_boxes.empty()) continue;
    images.push_back(s.image);
    targets.push_back(s.pseudo_boxes.front());
  }
  if (images.empty()) return {};
  const ad::Tensor out = raw(images);
  const double w = cfg_.image_size.width;
  const double h = cfg_.image_size.height;
  const double inv_n = 1.0 / static_cast<double>(images.size());
  std::vector<double> grad(out.size(), 0.0);
  double value = 0.0;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const double* o = out.data().data() + i * 4;
    const Box& t = targets[i];
    const LossValue l = smooth_l1({o[0], o[1], o[2], o[3]}, {t.x1 / w, t.y1 / h, t.x2 / w, t.y2 / h},
                                  loss_cfg_.smooth_l1_beta);
    value += inv_n * l.value;
    for (int k = 0; k < 4; ++k) grad[i * 4 + k] = inv_n * l.grad_t[0][k];
  }
  const ad::Tensor in[] = {out};
  return ad::external_loss(in, value, {std::move(grad)});
}

std::optional<double> ScrModel::train_step(std::span<const TrainSample> batch, ad::OptimizerState& opt,
                                           double lr) {
  ad::zero_grads(params_);
  const ad::Tensor l = loss(batch);
  if (!l) return std::nullopt;
  ad::backward(l);
  ad::sgd_step(params_, opt, lr);
  return l.item();
}

}  // namespace wend
