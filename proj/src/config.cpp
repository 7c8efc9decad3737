#include "wend/config.hpp"

#include <charconv>
#include <cstdlib>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <type_traits>

#include "wend/error.hpp"

namespace wend {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  // Prefer the shortest representation that round-trips.
  for (int prec = 1; prec <= 17; ++prec) {
    char shortbuf[64];
    std::snprintf(shortbuf, sizeof(shortbuf), "%.*g", prec, v);
    if (std::strtod(shortbuf, nullptr) == v) return shortbuf;
  }
  return buf;
}

template <typename T>
std::string join(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    if constexpr (std::is_floating_point_v<T>) out += fmt_double(v[i]);
    else out += std::to_string(v[i]);
  }
  return out;
}

class Reader {
 public:
  explicit Reader(const KeyValues& kv) : kv_(kv) {}

  template <typename T>
  void get(const std::string& key, T& out) {
    auto it = kv_.find(key);
    if (it == kv_.end()) return;
    used_.insert(key);
    out = parse<T>(key, it->second);
  }

  void get_list(const std::string& key, std::vector<double>& out) {
    auto it = kv_.find(key);
    if (it == kv_.end()) return;
    used_.insert(key);
    out = split<double>(key, it->second);
  }

  void get_list(const std::string& key, std::vector<int>& out) {
    auto it = kv_.find(key);
    if (it == kv_.end()) return;
    used_.insert(key);
    out = split<int>(key, it->second);
  }

  template <typename F>
  void get_custom(const std::string& key, F&& apply) {
    auto it = kv_.find(key);
    if (it == kv_.end()) return;
    used_.insert(key);
    try {
      apply(it->second);
    } catch (const ValidationError& e) {
      throw ValidationError("config key '" + key + "': " + e.what());
    }
  }

  void reject_unknown() const {
    for (const auto& [k, v] : kv_) {
      if (!used_.count(k)) throw ValidationError("unknown config key '" + k + "'");
    }
  }

 private:
  template <typename T>
  static T parse(const std::string& key, const std::string& raw) {
    const std::string s = trim(raw);
    if constexpr (std::is_same_v<T, bool>) {
      if (s == "true" || s == "1") return true;
      if (s == "false" || s == "0") return false;
    } else if constexpr (std::is_floating_point_v<T>) {
      char* end = nullptr;
      const double v = std::strtod(s.c_str(), &end);
      if (!s.empty() && end == s.c_str() + s.size()) return v;
    } else {
      T v{};
      auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec == std::errc() && ptr == s.data() + s.size()) return v;
    }
    throw ValidationError("config key '" + key + "' has malformed value '" + raw + "'");
  }

  template <typename T>
  static std::vector<T> split(const std::string& key, const std::string& raw) {
    std::vector<T> out;
    std::stringstream ss(raw);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse<T>(key, item));
    if (out.empty()) throw ValidationError("config key '" + key + "' needs at least one value");
    return out;
  }

  const KeyValues& kv_;
  std::set<std::string> used_;
};

SampleRatio parse_ratio(const std::string& s) {
  const auto colon = s.find(':');
  require(colon != std::string::npos, "ratio must look like POS:NEG");
  SampleRatio r;
  try {
    r.pos = std::stoi(s.substr(0, colon));
    r.neg = std::stoi(s.substr(colon + 1));
  } catch (const std::exception&) {
    throw ValidationError("ratio must look like POS:NEG, got '" + s + "'");
  }
  require(r.pos >= 1 && r.neg >= 1, "ratio terms must be >= 1");
  return r;
}

}  // namespace

KeyValues parse_key_values(const std::string& text, const std::string& origin) {
  KeyValues kv;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ValidationError(origin + ":" + std::to_string(lineno) + ": expected key=value");
    }
    kv[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
  }
  return kv;
}

KeyValues read_key_values(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read config file: " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_key_values(ss.str(), path.string());
}

std::string format_key_values(const KeyValues& kv) {
  std::string out;
  for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
  return out;
}

std::string model_kind_name(ModelKind k) {
  switch (k) {
    case ModelKind::kBcd: return "bcd";
    case ModelKind::kBcdNoWe: return "bcd-no-we";
    case ModelKind::kScr: return "scr";
  }
  return "bcd";
}

ModelKind parse_model_kind(const std::string& s) {
  if (s == "bcd") return ModelKind::kBcd;
  if (s == "bcd-no-we" || s == "bcd_no_we") return ModelKind::kBcdNoWe;
  if (s == "scr") return ModelKind::kScr;
  throw ValidationError("unknown model kind '" + s + "' (expected bcd, bcd-no-we or scr)");
}

SceneParams DataConfig::test_scene() const {
  SceneParams p = train_scene;
  p.min_objects = test_min_objects;
  p.max_objects = test_max_objects;
  return p;
}

void RunConfig::validate() const {
  data.train_scene.validate();
  data.test_scene().validate();
  data.noise.validate();
  data.classifier.validate();
  require(data.train_count >= 1 && data.test_count >= 1, "data.train_count and data.test_count must be >= 1");
  detector.validate();
  require(detector.image_size.width == data.train_scene.image_size.width &&
              detector.image_size.height == data.train_scene.image_size.height &&
              detector.channels == data.train_scene.channels,
          "model image geometry must match the dataset");
  loss.validate();
  require(optim.base_lr > 0.0, "optim.base_lr must be > 0");
  require(optim.momentum >= 0.0 && optim.momentum < 1.0, "optim.momentum must lie in [0,1)");
  require(optim.weight_decay >= 0.0, "optim.weight_decay must be >= 0");
  require(optim.epochs >= 1, "optim.epochs must be >= 1");
  require(optim.batch_images >= 1, "optim.batch_images must be >= 1");
  require(eval.predict.score_thresh >= 0.0 && eval.predict.score_thresh <= 1.0,
          "eval.score_thresh must lie in [0,1]");
  require(eval.predict.nms_thresh >= 0.0 && eval.predict.nms_thresh <= 1.0, "eval.nms_thresh must lie in [0,1]");
  require(eval.predict.max_outputs >= 1, "eval.max_outputs must be >= 1");
  require(!eval.k.empty() && eval.k.size() <= 2, "eval.k takes one or two values");
  for (int k : eval.k) require(k >= 1, "eval.k values must be >= 1");
}

KeyValues RunConfig::to_key_values() const {
  KeyValues kv;
  const auto& ts = data.train_scene;
  kv["data.seed"] = std::to_string(data.seed);
  kv["data.train_count"] = std::to_string(data.train_count);
  kv["data.test_count"] = std::to_string(data.test_count);
  kv["data.image_width"] = std::to_string(ts.image_size.width);
  kv["data.image_height"] = std::to_string(ts.image_size.height);
  kv["data.channels"] = std::to_string(ts.channels);
  kv["data.min_objects"] = std::to_string(ts.min_objects);
  kv["data.max_objects"] = std::to_string(ts.max_objects);
  kv["data.test_min_objects"] = std::to_string(data.test_min_objects);
  kv["data.test_max_objects"] = std::to_string(data.test_max_objects);
  kv["data.min_size"] = fmt_double(ts.min_size);
  kv["data.max_size"] = fmt_double(ts.max_size);
  kv["data.num_classes"] = std::to_string(ts.num_classes);
  kv["data.max_noise"] = fmt_double(ts.max_noise);
  kv["data.max_distractors"] = std::to_string(ts.max_distractors);
  kv["noise.jitter_sigma"] = fmt_double(data.noise.jitter_sigma);
  kv["noise.wrong_box_prob"] = fmt_double(data.noise.wrong_box_prob);
  kv["noise.drop_prob"] = fmt_double(data.noise.drop_prob);
  kv["classifier.top1_acc"] = fmt_double(data.classifier.top1_acc);
  kv["classifier.top5_acc"] = fmt_double(data.classifier.top5_acc);

  kv["model.kind"] = model_kind_name(model);
  kv["model.widths"] = join(detector.widths);
  kv["model.strides"] = join(detector.strides);
  kv["model.anchor_scales"] = join(detector.anchor_scales);
  kv["model.anchor_ratios"] = join(detector.anchor_ratios);
  kv["model.quality_head"] = detector.quality_head ? "true" : "false";
  kv["model.quality_kind"] = detector.quality_kind == QualityKind::kIou ? "iou" : "centerness";
  kv["assign.fg"] = fmt_double(detector.thresholds.fg);
  kv["assign.bg"] = fmt_double(detector.thresholds.bg);
  kv["assign.sample_size"] = std::to_string(detector.sample_size);
  kv["assign.ratio"] = std::to_string(detector.ratio.pos) + ":" + std::to_string(detector.ratio.neg);

  kv["loss.lambda1"] = fmt_double(loss.lambda1);
  kv["loss.lambda2"] = fmt_double(loss.lambda2);
  kv["loss.gamma"] = fmt_double(loss.gamma);
  kv["loss.alpha"] = fmt_double(loss.alpha);
  kv["loss.tau1"] = fmt_double(loss.tau1);
  kv["loss.tau2"] = fmt_double(loss.tau2);
  kv["loss.eta"] = fmt_double(loss.eta);
  kv["loss.reg"] = loss.reg_kind == RegressionKind::kSmoothL1 ? "smooth_l1" : "giou";
  kv["loss.smooth_l1_beta"] = fmt_double(loss.smooth_l1_beta);
  kv["loss.entropy_scope"] = loss.entropy_scope == EntropyScope::kAllAnchors ? "all" : "sampled";

  kv["optim.base_lr"] = fmt_double(optim.base_lr);
  kv["optim.head_lr_multiplier"] = fmt_double(detector.head_lr_multiplier);
  kv["optim.momentum"] = fmt_double(optim.momentum);
  kv["optim.weight_decay"] = fmt_double(optim.weight_decay);
  kv["optim.epochs"] = std::to_string(optim.epochs);
  kv["optim.batch_images"] = std::to_string(optim.batch_images);

  kv["eval.score_thresh"] = fmt_double(eval.predict.score_thresh);
  kv["eval.nms_thresh"] = fmt_double(eval.predict.nms_thresh);
  kv["eval.max_outputs"] = std::to_string(eval.predict.max_outputs);
  kv["eval.k"] = join(eval.k);
  kv["run.seed"] = std::to_string(seed);
  return kv;
}

RunConfig RunConfig::from_key_values(const KeyValues& kv, RunConfig c) {
  Reader r(kv);
  auto& ts = c.data.train_scene;
  r.get("data.seed", c.data.seed);
  r.get("data.train_count", c.data.train_count);
  r.get("data.test_count", c.data.test_count);
  r.get("data.image_width", ts.image_size.width);
  r.get("data.image_height", ts.image_size.height);
  r.get("data.channels", ts.channels);
  r.get("data.min_objects", ts.min_objects);
  r.get("data.max_objects", ts.max_objects);
  r.get("data.test_min_objects", c.data.test_min_objects);
  r.get("data.test_max_objects", c.data.test_max_objects);
  r.get("data.min_size", ts.min_size);
  r.get("data.max_size", ts.max_size);
  r.get("data.num_classes", ts.num_classes);
  r.get("data.max_noise", ts.max_noise);
  r.get("data.max_distractors", ts.max_distractors);
  r.get("noise.jitter_sigma", c.data.noise.jitter_sigma);
  r.get("noise.wrong_box_prob", c.data.noise.wrong_box_prob);
  r.get("noise.drop_prob", c.data.noise.drop_prob);
  r.get("classifier.top1_acc", c.data.classifier.top1_acc);
  r.get("classifier.top5_acc", c.data.classifier.top5_acc);

  r.get_custom("model.kind", [&](const std::string& v) { c.model = parse_model_kind(v); });
  r.get_list("model.widths", c.detector.widths);
  r.get_list("model.strides", c.detector.strides);
  r.get_list("model.anchor_scales", c.detector.anchor_scales);
  r.get_list("model.anchor_ratios", c.detector.anchor_ratios);
  r.get("model.quality_head", c.detector.quality_head);
  r.get_custom("model.quality_kind", [&](const std::string& v) {
    if (v == "iou") c.detector.quality_kind = QualityKind::kIou;
    else if (v == "centerness") c.detector.quality_kind = QualityKind::kCenterness;
    else throw ValidationError("expected iou or centerness");
  });
  r.get("assign.fg", c.detector.thresholds.fg);
  r.get("assign.bg", c.detector.thresholds.bg);
  r.get("assign.sample_size", c.detector.sample_size);
  r.get_custom("assign.ratio", [&](const std::string& v) { c.detector.ratio = parse_ratio(v); });

  r.get("loss.lambda1", c.loss.lambda1);
  r.get("loss.lambda2", c.loss.lambda2);
  r.get("loss.gamma", c.loss.gamma);
  r.get("loss.alpha", c.loss.alpha);
  r.get("loss.tau1", c.loss.tau1);
  r.get("loss.tau2", c.loss.tau2);
  r.get("loss.eta", c.loss.eta);
  r.get_custom("loss.reg", [&](const std::string& v) {
    if (v == "smooth_l1") c.loss.reg_kind = RegressionKind::kSmoothL1;
    else if (v == "giou") c.loss.reg_kind = RegressionKind::kGiou;
    else throw ValidationError("expected smooth_l1 or giou");
  });
  r.get("loss.smooth_l1_beta", c.loss.smooth_l1_beta);
  r.get_custom("loss.entropy_scope", [&](const std::string& v) {
    if (v == "all") c.loss.entropy_scope = EntropyScope::kAllAnchors;
    else if (v == "sampled") c.loss.entropy_scope = EntropyScope::kSampled;
    else throw ValidationError("expected all or sampled");
  });

  r.get("optim.base_lr", c.optim.base_lr);
  r.get("optim.head_lr_multiplier", c.detector.head_lr_multiplier);
  r.get("optim.momentum", c.optim.momentum);
  r.get("optim.weight_decay", c.optim.weight_decay);
  r.get("optim.epochs", c.optim.epochs);
  r.get("optim.batch_images", c.optim.batch_images);

  r.get("eval.score_thresh", c.eval.predict.score_thresh);
  r.get("eval.nms_thresh", c.eval.predict.nms_thresh);
  r.get("eval.max_outputs", c.eval.predict.max_outputs);
  r.get_list("eval.k", c.eval.k);
  r.get("run.seed", c.seed);
  r.reject_unknown();

  c.detector.image_size = ts.image_size;
  c.detector.channels = ts.channels;
  return c;
}

RunConfig RunConfig::from_key_values(const KeyValues& kv) { return from_key_values(kv, RunConfig{}); }

std::uint64_t RunConfig::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : canonical_text()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

RunConfig load_run_config(const std::filesystem::path& path, const KeyValues& overrides) {
  KeyValues kv;
  if (!path.empty()) kv = read_key_values(path);
  for (const auto& [k, v] : overrides) kv[k] = v;
  RunConfig cfg = RunConfig::from_key_values(kv);
  cfg.validate();
  return cfg;
}

}  // namespace wend
