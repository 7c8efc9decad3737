#pragma once

#include <array>
#include <cmath>
#include <span>
#include <vector>

namespace wend {

// Axis-aligned rectangle, corner convention. area = (x2-x1)*(y2-y1), no +1 pixel term.
struct Box {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }
  double cx() const { return 0.5 * (x1 + x2); }
  double cy() const { return 0.5 * (y1 + y2); }

  bool valid() const {
    return std::isfinite(x1) && std::isfinite(y1) && std::isfinite(x2) && std::isfinite(y2) &&
           x2 > x1 && y2 > y1;
  }

  std::array<double, 4> to_array() const { return {x1, y1, x2, y2}; }

  friend bool operator==(const Box&, const Box&) = default;
};

// Builds a box and throws ValidationError if it has no area or a non-finite coordinate.
Box make_box(double x1, double y1, double x2, double y2);

// Anchor-relative box parameterization (tx, ty, tw, th).
struct DeltaVec {
  double tx = 0.0;
  double ty = 0.0;
  double tw = 0.0;
  double th = 0.0;

  std::array<double, 4> to_array() const { return {tx, ty, tw, th}; }
  static DeltaVec from_array(const std::array<double, 4>& a) { return {a[0], a[1], a[2], a[3]}; }

  friend bool operator==(const DeltaVec&, const DeltaVec&) = default;
};

struct ScoredBox {
  Box box;
  double score = 0.0;
};

// log(1000/16): largest log-scale a regression head may apply at decode time.
inline const double kDefaultDeltaClamp = std::log(1000.0 / 16.0);

double intersection_area(const Box& a, const Box& b);
double iou(const Box& a, const Box& b);
double giou(const Box& a, const Box& b);

DeltaVec encode_deltas(const Box& target, const Box& reference);
Box decode_deltas(const DeltaVec& delta, const Box& reference, double clamp = kDefaultDeltaClamp);

// Greedy non-maximum suppression. Output is sorted by descending score; equal scores keep
// input order.
std::vector<ScoredBox> nms(std::span<const ScoredBox> candidates, double iou_threshold);

// Clamps to [0,width]x[0,height]. An axis that collapses becomes a 1-pixel span at the
// clamped location.
Box clip_box(const Box& b, double width, double height);

}  // namespace wend
