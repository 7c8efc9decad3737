#pragma once

// Deliberately naive reference implementations used to cross-check the library.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

#include "wend/evaluation.hpp"
#include "wend/geometry.hpp"

namespace ref {

struct IntBox {
  int x1, y1, x2, y2;
};

// Pixel counts of intersection and union, by visiting every pixel of the grid.
inline std::pair<long, long> raster_counts(const IntBox& a, const IntBox& b, int grid) {
  long inter = 0, uni = 0;
  for (int y = 0; y < grid; ++y) {
    for (int x = 0; x < grid; ++x) {
      const bool in_a = x >= a.x1 && x < a.x2 && y >= a.y1 && y < a.y2;
      const bool in_b = x >= b.x1 && x < b.x2 && y >= b.y1 && y < b.y2;
      inter += in_a && in_b;
      uni += in_a || in_b;
    }
  }
  return {inter, uni};
}

inline double plain_iou(const wend::Box& a, const wend::Box& b) {
  const double iw = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
  const double ih = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
  const double inter = iw * ih;
  return inter / ((a.x2 - a.x1) * (a.y2 - a.y1) + (b.x2 - b.x1) * (b.y2 - b.y1) - inter);
}

// Repeatedly take the best remaining box (ties: lower index) and drop everything it
// overlaps above the threshold.
inline std::vector<std::size_t> greedy_nms(const std::vector<wend::ScoredBox>& boxes, double thr) {
  std::vector<bool> alive(boxes.size(), true);
  std::vector<std::size_t> keep;
  while (true) {
    std::size_t best = boxes.size();
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      if (!alive[i]) continue;
      if (best == boxes.size() || boxes[i].score > boxes[best].score) best = i;
    }
    if (best == boxes.size()) break;
    keep.push_back(best);
    alive[best] = false;
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      if (alive[i] && plain_iou(boxes[best].box, boxes[i].box) > thr) alive[i] = false;
    }
  }
  return keep;
}

struct ImageVerdicts {
  bool top1 = false, top5_single = false, top5_multi = false, gk_single = false, gk_multi = false;
};

// Applies the localization rules literally: enumerate the allowed boxes against every GT and
// rank classes by sorting (score desc, index asc).
inline ImageVerdicts judge(const wend::PredictionRecord& p, const std::vector<wend::Box>& gts, int gt_class,
                           int k_single, int k_multi) {
  auto any_hit = [&](int k) {
    for (int i = 0; i < k && i < static_cast<int>(p.boxes.size()); ++i) {
      for (const auto& g : gts) {
        if (plain_iou(p.boxes[static_cast<std::size_t>(i)].box, g) > 0.5) return true;
      }
    }
    return false;
  };
  std::vector<int> order(p.class_scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const double sa = p.class_scores[static_cast<std::size_t>(a)];
    const double sb = p.class_scores[static_cast<std::size_t>(b)];
    return sa != sb ? sa > sb : a < b;
  });
  const bool cls1 = order.front() == gt_class;
  bool cls5 = false;
  for (int i = 0; i < 5 && i < static_cast<int>(order.size()); ++i) cls5 = cls5 || order[static_cast<std::size_t>(i)] == gt_class;
  ImageVerdicts v;
  v.gk_single = any_hit(k_single);
  v.gk_multi = any_hit(k_multi);
  v.top1 = cls1 && any_hit(1);
  v.top5_single = cls5 && v.gk_single;
  v.top5_multi = cls5 && v.gk_multi;
  return v;
}

struct EvalInstance {
  std::vector<wend::GroundTruth> truth;
  std::vector<wend::PredictionRecord> predictions;
};

// Random images with <= 3 GT boxes, <= 8 predictions and 10 classes. Predictions are built
// near GT boxes often enough that every metric sees both outcomes; class scores use a coarse
// grid so ties occur.
template <typename Gen>
EvalInstance random_eval_instance(Gen& gen, int images) {
  std::uniform_real_distribution<double> u(0, 1);
  std::uniform_int_distribution<int> ngt(1, 3), npred(0, 8), cls(0, 9);
  EvalInstance inst;
  for (int i = 0; i < images; ++i) {
    wend::GroundTruth gt;
    gt.image_id = "img" + std::to_string(i);
    for (int g = ngt(gen); g > 0; --g) {
      const double x = u(gen) * 40, y = u(gen) * 40;
      gt.boxes.push_back({x, y, x + 8 + u(gen) * 16, y + 8 + u(gen) * 16});
    }
    gt.gt_class = cls(gen);
    wend::PredictionRecord p;
    p.image_id = gt.image_id;
    for (int k = npred(gen); k > 0; --k) {
      wend::Box b;
      if (u(gen) < 0.5) {
        const auto& g = gt.boxes[static_cast<std::size_t>(u(gen) * gt.boxes.size()) % gt.boxes.size()];
        const double s = 6 * u(gen);
        b = {g.x1 + s * (u(gen) - 0.5), g.y1 + s * (u(gen) - 0.5), g.x2 + s * (u(gen) - 0.5), g.y2 + s * (u(gen) - 0.5)};
      } else {
        const double x = u(gen) * 50, y = u(gen) * 50;
        b = {x, y, x + 4 + u(gen) * 20, y + 4 + u(gen) * 20};
      }
      p.boxes.push_back({b, u(gen)});
    }
    std::sort(p.boxes.begin(), p.boxes.end(), [](const auto& a, const auto& b) { return a.score > b.score; });
    for (int c = 0; c < 10; ++c) p.class_scores.push_back(std::floor(u(gen) * 6) / 6);
    inst.truth.push_back(std::move(gt));
    inst.predictions.push_back(std::move(p));
  }
  return inst;
}

struct BruteReport {
  double top1 = 0, top5_single = 0, top5_multi = 0, gk_single = 0, gk_multi = 0;
};

inline BruteReport brute_force_report(const EvalInstance& inst, int k_single, int k_multi) {
  long top1 = 0, t5s = 0, t5m = 0, gks = 0, gkm = 0;
  for (const auto& gt : inst.truth) {
    const wend::PredictionRecord* p = nullptr;
    for (const auto& cand : inst.predictions) {
      if (cand.image_id == gt.image_id) p = &cand;
    }
    const auto v = judge(*p, gt.boxes, gt.gt_class, k_single, k_multi);
    top1 += v.top1;
    t5s += v.top5_single;
    t5m += v.top5_multi;
    gks += v.gk_single;
    gkm += v.gk_multi;
  }
  const double pct = 100.0 / static_cast<double>(inst.truth.size());
  return {top1 * pct, t5s * pct, t5m * pct, gks * pct, gkm * pct};
}

// Central finite difference of f at x along coordinate i.
inline double central_diff(const std::function<double(std::vector<double>&)>& f, std::vector<double> x,
                           std::size_t i, double h = 1e-4) {
  const double x0 = x[i];
  x[i] = x0 + h;
  const double fp = f(x);
  x[i] = x0 - h;
  const double fm = f(x);
  return (fp - fm) / (2.0 * h);
}

// Relative error with an absolute floor so that near-zero gradients compare sensibly.
inline double rel_err(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

}  // namespace ref
