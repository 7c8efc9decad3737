#include "wend/synthdata.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "wend/error.hpp"

namespace wend {

namespace {

constexpr std::array<std::string_view, kMaxShapeClasses> kShapeNames = {
    "circle", "square", "triangle", "diamond", "ring",
    "frame",  "cross",  "ellipse",  "hexagon", "semicircle"};

// Membership test in coordinates normalized by the half-size; y grows downward.
bool inside_shape(ShapeClass shape, double u, double v) {
  const double au = std::abs(u);
  const double av = std::abs(v);
  switch (shape) {
    case ShapeClass::kCircle:
      return u * u + v * v <= 1.0;
    case ShapeClass::kSquare:
      return au <= 1.0 && av <= 1.0;
    case ShapeClass::kTriangle:
      return v >= -1.0 && v <= 1.0 && au <= 0.5 * (v + 1.0);
    case ShapeClass::kDiamond:
      return au + av <= 1.0;
    case ShapeClass::kRing: {
      const double r2 = u * u + v * v;
      return r2 <= 1.0 && r2 >= 0.3;
    }
    case ShapeClass::kFrame:
      return au <= 1.0 && av <= 1.0 && (au >= 0.55 || av >= 0.55);
    case ShapeClass::kCross:
      return (au <= 0.3 && av <= 1.0) || (av <= 0.3 && au <= 1.0);
    case ShapeClass::kEllipse:
      return u * u + (v / 0.6) * (v / 0.6) <= 1.0;
    case ShapeClass::kHexagon:
      return au <= 1.0 && av <= 0.866 && av <= std::sqrt(3.0) * (1.0 - au);
    case ShapeClass::kSemicircle:
      return u * u + v * v <= 1.0 && v >= 0.0;
  }
  return false;
}

bool contained(const Box& b, ImageSize size) {
  return b.x1 >= 0.0 && b.y1 >= 0.0 && b.x2 <= size.width && b.y2 <= size.height;
}

}  // namespace

std::string_view shape_name(ShapeClass c) { return kShapeNames.at(static_cast<std::size_t>(c)); }

void SceneSpec::validate() const {
  require(image_size.width > 0 && image_size.height > 0, "scene image size must be positive");
  require(channels == 1 || channels == 3, "scene channels must be 1 or 3");
  require(!objects.empty() && objects.size() <= static_cast<std::size_t>(kMaxObjects),
          "scene must hold between 1 and 3 objects");
  for (std::size_t i = 0; i < objects.size(); ++i) {
    const auto& o = objects[i];
    const int cls = static_cast<int>(o.shape);
    require(cls >= 0 && cls < kMaxShapeClasses, "unknown shape class");
    require(o.size >= 4.0, "object size must be at least 4 pixels");
    require(o.intensity >= 0.0 && o.intensity <= 1.0, "object intensity must lie in [0,1]");
    require(contained(o.nominal_box(), image_size), "object " + std::to_string(i) + " leaves the image");
    for (std::size_t j = 0; j < i; ++j) {
      require(iou(o.nominal_box(), objects[j].nominal_box()) < 0.2,
              "objects " + std::to_string(j) + " and " + std::to_string(i) + " overlap with IoU >= 0.2");
    }
  }
  require(background.noise_level >= 0.0 && background.distractor_count >= 0,
          "background noise and distractor count must be non-negative");
}

RenderedScene render_scene(const SceneSpec& spec, std::uint64_t rng_seed) {
  spec.validate();
  Rng rng(rng_seed);
  const int w = spec.image_size.width;
  const int h = spec.image_size.height;
  std::vector<double> canvas(static_cast<std::size_t>(w) * h);

  const auto& bg = spec.background;
  const double gx = std::cos(bg.gradient_angle);
  const double gy = std::sin(bg.gradient_angle);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double t = ((x + 0.5) / w - 0.5) * gx + ((y + 0.5) / h - 0.5) * gy;
      canvas[static_cast<std::size_t>(y) * w + x] = bg.base + bg.gradient_amplitude * t;
    }
  }

  // Small bright blobs away from the objects: confusing background texture.
  for (int d = 0; d < bg.distractor_count; ++d) {
    const double r = rng.uniform(1.5, 3.0);
    const double value = rng.uniform(0.55, 0.95);
    for (int attempt = 0; attempt < 50; ++attempt) {
      const double cx = rng.uniform(r, w - r);
      const double cy = rng.uniform(r, h - r);
      const Box blob{cx - r, cy - r, cx + r, cy + r};
      const bool clash = std::any_of(spec.objects.begin(), spec.objects.end(), [&](const ObjectSpec& o) {
        return intersection_area(blob, o.nominal_box()) > 0.0;
      });
      if (clash) continue;
      for (int y = std::max(0, static_cast<int>(cy - r)); y < std::min(h, static_cast<int>(cy + r) + 1); ++y) {
        for (int x = std::max(0, static_cast<int>(cx - r)); x < std::min(w, static_cast<int>(cx + r) + 1); ++x) {
          const double dx = x + 0.5 - cx;
          const double dy = y + 0.5 - cy;
          if (dx * dx + dy * dy <= r * r) canvas[static_cast<std::size_t>(y) * w + x] = value;
        }
      }
      break;
    }
  }

  RenderedScene out;
  for (const auto& o : spec.objects) {
    const double half = 0.5 * o.size;
    int min_x = w, min_y = h, max_x = -1, max_y = -1;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (!inside_shape(o.shape, (x + 0.5 - o.cx) / half, (y + 0.5 - o.cy) / half)) continue;
        canvas[static_cast<std::size_t>(y) * w + x] = o.intensity;
        min_x = std::min(min_x, x);
        min_y = std::min(min_y, y);
        max_x = std::max(max_x, x);
        max_y = std::max(max_y, y);
      }
    }
    require(max_x >= 0, "object rasterizes to no pixels");
    out.gt_boxes.push_back({static_cast<double>(min_x), static_cast<double>(min_y),
                            static_cast<double>(max_x + 1), static_cast<double>(max_y + 1)});
    out.gt_classes.push_back(static_cast<int>(o.shape));
  }

  out.image = Image(w, h, spec.channels);
  for (std::size_t p = 0; p < canvas.size(); ++p) {
    const double noisy = bg.noise_level > 0.0 ? canvas[p] + rng.normal(0.0, bg.noise_level) : canvas[p];
    const auto q = static_cast<std::uint8_t>(std::lround(std::clamp(noisy, 0.0, 1.0) * 255.0));
    for (int c = 0; c < spec.channels; ++c) out.image.pixels[p * spec.channels + c] = q;
  }
  return out;
}

void SceneParams::validate() const {
  require(image_size.width >= 16 && image_size.height >= 16, "scene image size must be at least 16");
  require(channels == 1 || channels == 3, "scene channels must be 1 or 3");
  require(min_objects >= 1 && max_objects <= kMaxObjects && min_objects <= max_objects,
          "object count range must lie within [1,3]");
  require(min_size >= 4.0 && min_size <= max_size &&
              max_size <= std::min(image_size.width, image_size.height),
          "object size range invalid");
  require(num_classes >= 2 && num_classes <= kMaxShapeClasses, "num_classes must lie in [2,10]");
  require(max_noise >= 0.0 && max_distractors >= 0, "noise and distractor bounds must be >= 0");
}

SceneSpec sample_scene(const SceneParams& params, Rng& rng) {
  params.validate();
  SceneSpec spec;
  spec.image_size = params.image_size;
  spec.channels = params.channels;
  const int count = params.min_objects +
                    static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(params.max_objects - params.min_objects + 1)));
  const double w = params.image_size.width;
  const double h = params.image_size.height;
  while (static_cast<int>(spec.objects.size()) < count) {
    spec.objects.clear();
    for (int i = 0; i < count; ++i) {
      bool placed = false;
      for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
        ObjectSpec o;
        o.size = rng.uniform(params.min_size, params.max_size);
        o.cx = rng.uniform(0.5 * o.size, w - 0.5 * o.size);
        o.cy = rng.uniform(0.5 * o.size, h - 0.5 * o.size);
        o.shape = static_cast<ShapeClass>(rng.uniform_index(static_cast<std::uint64_t>(params.num_classes)));
        o.intensity = rng.uniform(0.6, 1.0);
        placed = std::all_of(spec.objects.begin(), spec.objects.end(), [&](const ObjectSpec& other) {
          return iou(o.nominal_box(), other.nominal_box()) < 0.2;
        });
        if (placed) spec.objects.push_back(o);
      }
      if (!placed) break;
    }
  }
  spec.background.base = rng.uniform(0.05, 0.35);
  spec.background.gradient_angle = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
  spec.background.gradient_amplitude = rng.uniform(0.0, 0.2);
  spec.background.noise_level = rng.uniform(0.0, params.max_noise);
  spec.background.distractor_count =
      static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(params.max_distractors + 1)));
  return spec;
}

void NoiseModel::validate() const {
  require(jitter_sigma >= 0.0, "noise.jitter_sigma must be >= 0");
  require(wrong_box_prob >= 0.0 && wrong_box_prob <= 1.0, "noise.wrong_box_prob must lie in [0,1]");
  require(drop_prob >= 0.0 && drop_prob <= 1.0, "noise.drop_prob must lie in [0,1]");
}

std::string_view provenance_name(Provenance p) {
  switch (p) {
    case Provenance::kClean: return "clean";
    case Provenance::kJittered: return "jitter";
    case Provenance::kWrong: return "wrong";
  }
  return "clean";
}

Provenance parse_provenance(std::string_view s) {
  if (s == "clean") return Provenance::kClean;
  if (s == "jitter") return Provenance::kJittered;
  if (s == "wrong") return Provenance::kWrong;
  throw ValidationError("unknown provenance '" + std::string(s) + "'");
}

namespace {

std::optional<Box> random_background_box(const Box& like, std::span<const Box> gt_boxes,
                                         ImageSize size, Rng& rng) {
  double scale = 1.0;
  for (int round = 0; round < 8; ++round, scale *= 0.75) {
    for (int attempt = 0; attempt < 100; ++attempt) {
      const double bw = std::clamp(like.width() * scale * rng.uniform(0.7, 1.3), 2.0, size.width - 1.0);
      const double bh = std::clamp(like.height() * scale * rng.uniform(0.7, 1.3), 2.0, size.height - 1.0);
      const double x1 = rng.uniform(0.0, size.width - bw);
      const double y1 = rng.uniform(0.0, size.height - bh);
      const Box cand{x1, y1, x1 + bw, y1 + bh};
      const bool ok = std::all_of(gt_boxes.begin(), gt_boxes.end(),
                                  [&](const Box& g) { return iou(cand, g) <= 0.1; });
      if (ok) return cand;
    }
  }
  return std::nullopt;
}

}  // namespace

CorruptedBoxes corrupt_boxes(std::span<const Box> gt_boxes, const NoiseModel& noise,
                             ImageSize image_size, std::uint64_t rng_seed) {
  noise.validate();
  Rng rng(rng_seed);
  CorruptedBoxes out;
  for (const Box& g : gt_boxes) {
    const double u_drop = rng.uniform();
    const double u_wrong = rng.uniform();
    if (u_drop < noise.drop_prob) continue;
    if (u_wrong < noise.wrong_box_prob) {
      if (auto b = random_background_box(g, gt_boxes, image_size, rng)) {
        out.boxes.push_back(*b);
        out.provenance.push_back(Provenance::kWrong);
      }
      continue;
    }
    if (noise.jitter_sigma == 0.0) {
      out.boxes.push_back(clip_box(g, image_size.width, image_size.height));
      out.provenance.push_back(Provenance::kClean);
      continue;
    }
    const double s = noise.jitter_sigma;
    const double cx = g.cx() + rng.normal(0.0, s) * g.width();
    const double cy = g.cy() + rng.normal(0.0, s) * g.height();
    const double w = g.width() * std::exp(rng.normal(0.0, s));
    const double h = g.height() * std::exp(rng.normal(0.0, s));
    out.boxes.push_back(clip_box({cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h},
                                 image_size.width, image_size.height));
    out.provenance.push_back(Provenance::kJittered);
  }
  return out;
}

void ClassScoreModel::validate() const {
  require(top1_acc >= 0.0 && top1_acc <= 1.0 && top5_acc >= 0.0 && top5_acc <= 1.0,
          "classifier accuracies must lie in [0,1]");
  require(top5_acc >= top1_acc, "classifier top5_acc must be >= top1_acc");
}

std::vector<double> simulate_class_scores(int gt_class, const ClassScoreModel& model,
                                          int num_classes, std::uint64_t rng_seed) {
  model.validate();
  require(num_classes >= 2, "simulated classifier needs at least 2 classes");
  require(gt_class >= 0 && gt_class < num_classes, "ground-truth class out of range");
  Rng rng(rng_seed);
  const auto n = static_cast<std::size_t>(num_classes);

  std::size_t rank = 0;
  const double u = rng.uniform();
  if (u >= model.top1_acc) {
    const std::size_t top5_last = std::min<std::size_t>(4, n - 1);
    if (u < model.top5_acc || n <= 5) {
      rank = 1 + rng.uniform_index(top5_last);
    } else {
      rank = 5 + rng.uniform_index(n - 5);
    }
  }

  std::vector<double> levels(n);
  for (auto& v : levels) v = 0.05 + rng.uniform();
  std::sort(levels.begin(), levels.end(), std::greater<>());
  for (std::size_t i = 1; i < n; ++i) {
    if (levels[i] >= levels[i - 1]) levels[i] = std::nextafter(levels[i - 1], 0.0);
  }

  std::vector<int> others;
  for (int c = 0; c < num_classes; ++c) {
    if (c != gt_class) others.push_back(c);
  }
  rng.shuffle(others);

  std::vector<double> scores(n);
  scores[static_cast<std::size_t>(gt_class)] = levels[rank];
  std::size_t next = 0;
  for (std::size_t r = 0; r < n; ++r) {
    if (r == rank) continue;
    scores[static_cast<std::size_t>(others[next++])] = levels[r];
  }
  const double total = std::accumulate(scores.begin(), scores.end(), 0.0);
  for (auto& s : scores) s /= total;
  return scores;
}

}  // namespace wend
