#include "wend/geometry.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "wend/error.hpp"

namespace wend {

Box make_box(double x1, double y1, double x2, double y2) {
  Box b{x1, y1, x2, y2};
  if (!b.valid()) {
    std::ostringstream os;
    os << "invalid box [" << x1 << "," << y1 << "," << x2 << "," << y2 << "]";
    throw ValidationError(os.str());
  }
  return b;
}

double intersection_area(const Box& a, const Box& b) {
  const double w = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double h = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (w <= 0.0 || h <= 0.0) return 0.0;
  return w * h;
}

double iou(const Box& a, const Box& b) {
  const double inter = intersection_area(a, b);
  if (inter <= 0.0) return 0.0;
  return inter / (a.area() + b.area() - inter);
}

double giou(const Box& a, const Box& b) {
  const double inter = intersection_area(a, b);
  const double uni = a.area() + b.area() - inter;
  const double enclosing =
      (std::max(a.x2, b.x2) - std::min(a.x1, b.x1)) * (std::max(a.y2, b.y2) - std::min(a.y1, b.y1));
  return inter / uni - (enclosing - uni) / enclosing;
}

DeltaVec encode_deltas(const Box& target, const Box& reference) {
  const double rw = reference.width();
  const double rh = reference.height();
  return {(target.cx() - reference.cx()) / rw, (target.cy() - reference.cy()) / rh,
          std::log(target.width() / rw), std::log(target.height() / rh)};
}

Box decode_deltas(const DeltaVec& delta, const Box& reference, double clamp) {
  const double rw = reference.width();
  const double rh = reference.height();
  const double cx = reference.cx() + delta.tx * rw;
  const double cy = reference.cy() + delta.ty * rh;
  const double w = rw * std::exp(std::clamp(delta.tw, -clamp, clamp));
  const double h = rh * std::exp(std::clamp(delta.th, -clamp, clamp));
  return {cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
}

std::vector<ScoredBox> nms(std::span<const ScoredBox> candidates, double iou_threshold) {
  require(iou_threshold >= 0.0 && iou_threshold <= 1.0, "nms threshold must lie in [0,1]");
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return candidates[a].score > candidates[b].score;
  });

  std::vector<ScoredBox> kept;
  for (std::size_t idx : order) {
    const ScoredBox& c = candidates[idx];
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const ScoredBox& k) {
      return iou(k.box, c.box) > iou_threshold;
    });
    if (!suppressed) kept.push_back(c);
  }
  return kept;
}

namespace {

void clip_axis(double& lo, double& hi, double limit) {
  lo = std::clamp(lo, 0.0, limit);
  hi = std::clamp(hi, 0.0, limit);
  if (hi <= lo) {
    lo = std::min(lo, limit - 1.0);
    lo = std::max(lo, 0.0);
    hi = lo + 1.0;
  }
}

}  // namespace

Box clip_box(const Box& b, double width, double height) {
  require(width > 0.0 && height > 0.0, "clip_box needs a positive image size");
  Box out = b;
  clip_axis(out.x1, out.x2, width);
  clip_axis(out.y1, out.y2, height);
  return out;
}

}  // namespace wend
