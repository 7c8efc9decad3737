#include "wend/harness.hpp"

#include <spawn.h>
#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "wend/detector.hpp"
#include "wend/error.hpp"
#include "wend/optim.hpp"
#include "wend/rng.hpp"

extern char** environ;

namespace wend {

using json = nlohmann::json;

namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

json box_json(const Box& b) { return json::array({b.x1, b.y1, b.x2, b.y2}); }

Box parse_box(const json& j) {
  require(j.is_array() && j.size() == 4, "box must be a 4-element array");
  return make_box(j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>());
}

std::string image_ext(int channels) { return channels == 1 ? ".pgm" : ".ppm"; }

// Runs `fn` on every non-empty line, rethrowing failures as IoError with file:line.
template <typename F>
void for_each_line(const fs::path& path, F&& fn) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read " + path.string());
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      fn(json::parse(line));
    } catch (const json::exception& e) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const ValidationError& e) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

void ensure_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw IoError("cannot create directory " + p.string() + ": " + ec.message());
}

}  // namespace

// ---------------------------------------------------------------------------- files

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  os << text;
  if (!os) throw IoError("write failed: " + path.string());
}

std::string read_text_file(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::vector<GroundTruth> Dataset::ground_truth() const {
  std::vector<GroundTruth> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    out.push_back({r.id, r.gt_boxes, r.gt_classes.empty() ? 0 : r.gt_classes.front()});
  }
  return out;
}

std::string manifest_line(const ManifestRecord& r) {
  json j;
  j["id"] = r.id;
  j["image_path"] = r.image_path;
  j["gt_boxes"] = json::array();
  for (const auto& b : r.gt_boxes) j["gt_boxes"].push_back(box_json(b));
  j["gt_classes"] = r.gt_classes;
  j["pseudo_boxes"] = json::array();
  for (const auto& b : r.pseudo_boxes) j["pseudo_boxes"].push_back(box_json(b));
  j["provenance"] = json::array();
  for (auto p : r.provenance) j["provenance"].push_back(std::string(provenance_name(p)));
  j["class_scores_path"] = r.class_scores_path;
  return j.dump();
}

std::vector<ManifestRecord> read_manifest(const fs::path& path) {
  std::vector<ManifestRecord> out;
  for_each_line(path, [&](const json& j) {
    ManifestRecord r;
    r.id = j.at("id").get<std::string>();
    r.image_path = j.at("image_path").get<std::string>();
    for (const auto& b : j.at("gt_boxes")) r.gt_boxes.push_back(parse_box(b));
    r.gt_classes = j.at("gt_classes").get<std::vector<int>>();
    for (const auto& b : j.at("pseudo_boxes")) r.pseudo_boxes.push_back(parse_box(b));
    if (j.contains("provenance")) {
      for (const auto& p : j.at("provenance")) r.provenance.push_back(parse_provenance(p.get<std::string>()));
      require(r.provenance.size() == r.pseudo_boxes.size(), "provenance length differs from pseudo_boxes");
    }
    r.class_scores_path = j.at("class_scores_path").get<std::string>();
    require(!r.gt_boxes.empty(), "record has no ground-truth boxes");
    require(r.gt_classes.size() == r.gt_boxes.size(), "gt_classes length differs from gt_boxes");
    out.push_back(std::move(r));
  });
  return out;
}

void write_manifest(const fs::path& path, const std::vector<ManifestRecord>& records) {
  std::string text;
  for (const auto& r : records) text += manifest_line(r) + "\n";
  write_text_file(path, text);
}

std::vector<double> read_class_scores(const fs::path& path) {
  const std::string text = read_text_file(path);
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    char* end = nullptr;
    const double v = std::strtod(item.c_str(), &end);
    while (end && (*end == '\n' || *end == '\r' || *end == ' ')) ++end;
    if (end == item.c_str() || (end && *end != '\0')) throw IoError("malformed class score in " + path.string());
    out.push_back(v);
  }
  if (out.empty()) throw IoError("empty class score file " + path.string());
  return out;
}

Dataset load_dataset(const fs::path& manifest_path) {
  Dataset d;
  d.root = manifest_path.parent_path();
  d.records = read_manifest(manifest_path);
  d.images.reserve(d.records.size());
  for (const auto& r : d.records) {
    d.images.push_back(read_ppm(d.root / r.image_path));
    d.class_scores.push_back(read_class_scores(d.root / r.class_scores_path));
  }
  return d;
}

std::string prediction_line(const PredictionRecord& r) {
  json j;
  j["id"] = r.image_id;
  j["boxes"] = json::array();
  for (const auto& sb : r.boxes) {
    j["boxes"].push_back(json::array({sb.box.x1, sb.box.y1, sb.box.x2, sb.box.y2, sb.score}));
  }
  j["class_scores"] = r.class_scores;
  return j.dump();
}

std::vector<PredictionRecord> read_predictions(const fs::path& path) {
  std::vector<PredictionRecord> out;
  for_each_line(path, [&](const json& j) {
    PredictionRecord r;
    r.image_id = j.at("id").get<std::string>();
    for (const auto& b : j.at("boxes")) {
      require(b.is_array() && b.size() == 5, "prediction box must be [x1,y1,x2,y2,score]");
      r.boxes.push_back({make_box(b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()),
                         b[4].get<double>()});
    }
    for (std::size_t i = 1; i < r.boxes.size(); ++i) {
      require(r.boxes[i - 1].score >= r.boxes[i].score, "prediction boxes must be sorted by descending score");
    }
    r.class_scores = j.at("class_scores").get<std::vector<double>>();
    out.push_back(std::move(r));
  });
  return out;
}

void write_predictions(const fs::path& path, const std::vector<PredictionRecord>& records) {
  std::string text;
  for (const auto& r : records) text += prediction_line(r) + "\n";
  write_text_file(path, text);
}

// ---------------------------------------------------------------------------- gen-data

namespace {

std::vector<ManifestRecord> generate_split(const RunConfig& cfg, const fs::path& out_dir, const std::string& split,
                                           std::uint64_t split_tag, std::size_t count, const SceneParams& params) {
  std::vector<ManifestRecord> records;
  records.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint64_t base = derive_seed(cfg.data.seed, split_tag, i);
    Rng scene_rng(derive_seed(base, 1));
    const SceneSpec spec = sample_scene(params, scene_rng);
    const RenderedScene scene = render_scene(spec, derive_seed(base, 2));
    const CorruptedBoxes pseudo = corrupt_boxes(scene.gt_boxes, cfg.data.noise, params.image_size, derive_seed(base, 3));
    const auto scores =
        simulate_class_scores(scene.gt_classes.front(), cfg.data.classifier, params.num_classes, derive_seed(base, 4));

    char name[64];
    std::snprintf(name, sizeof(name), "%s_%06zu", split.c_str(), i);
    ManifestRecord r;
    r.id = name;
    r.image_path = "images/" + r.id + image_ext(params.channels);
    r.class_scores_path = "scores/" + r.id + ".txt";
    r.gt_boxes = scene.gt_boxes;
    r.gt_classes = scene.gt_classes;
    r.pseudo_boxes = pseudo.boxes;
    r.provenance = pseudo.provenance;

    write_ppm(out_dir / r.image_path, scene.image);
    std::string line;
    for (std::size_t c = 0; c < scores.size(); ++c) {
      if (c) line += ",";
      line += fmt("%.17g", scores[c]);
    }
    write_text_file(out_dir / r.class_scores_path, line + "\n");
    records.push_back(std::move(r));
  }
  return records;
}

}  // namespace

void cmd_gen_data(const RunConfig& cfg, const fs::path& out_dir) {
  cfg.validate();
  ensure_dir(out_dir / "images");
  ensure_dir(out_dir / "scores");
  write_text_file(out_dir / "config.txt", cfg.canonical_text());
  write_manifest(out_dir / "train.jsonl",
                 generate_split(cfg, out_dir, "train", 1, cfg.data.train_count, cfg.data.train_scene));
  write_manifest(out_dir / "test.jsonl",
                 generate_split(cfg, out_dir, "test", 2, cfg.data.test_count, cfg.data.test_scene()));
}

// ---------------------------------------------------------------------------- train

std::string run_record_csv(const RunRecord& r) {
  std::string out = "epoch,lr,sup_loss,unsup_loss,total_loss,gtknown_k1,gtknown_k5\n";
  for (const auto& e : r.epochs) {
    out += std::to_string(e.epoch) + "," + fmt("%.10g", e.lr) + "," + fmt("%.10g", e.sup) + "," +
           fmt("%.10g", e.unsup) + "," + fmt("%.10g", e.total) + "," + fmt("%.4f", e.gtknown_single) + "," +
           fmt("%.4f", e.gtknown_multi) + "\n";
  }
  return out;
}

namespace {

std::string summary_csv(const RunConfig& cfg, const RunRecord& r) {
  const auto& m = r.final_metrics;
  std::string out = "key,value\n";
  out += "model," + model_kind_name(cfg.model) + "\n";
  out += "seed," + std::to_string(r.seed) + "\n";
  char hash[32];
  std::snprintf(hash, sizeof(hash), "%016llx", static_cast<unsigned long long>(r.config_hash));
  out += std::string("config_hash,") + hash + "\n";
  out += "epochs," + std::to_string(r.epochs.size()) + "\n";
  out += "top1_loc," + fmt("%.4f", m.top1_loc) + "\n";
  out += "top5_loc_k" + std::to_string(m.k_single) + "," + fmt("%.4f", m.top5_loc_single) + "\n";
  out += "top5_loc_k" + std::to_string(m.k_multi) + "," + fmt("%.4f", m.top5_loc_multi) + "\n";
  out += "gtknown_loc_k" + std::to_string(m.k_single) + "," + fmt("%.4f", m.gtknown_single) + "\n";
  out += "gtknown_loc_k" + std::to_string(m.k_multi) + "," + fmt("%.4f", m.gtknown_multi) + "\n";
  out += "mid_confidence_fraction," + fmt("%.6f", r.mid_confidence_fraction) + "\n";
  out += "count," + std::to_string(m.count) + "\n";
  return out;
}

struct AnyModel {
  std::unique_ptr<BcdModel> bcd;
  std::unique_ptr<ScrModel> scr;

  AnyModel(const RunConfig& cfg) {
    const std::uint64_t init = derive_seed(cfg.seed, 11);
    if (cfg.model == ModelKind::kScr) scr = std::make_unique<ScrModel>(cfg.detector, cfg.loss, init);
    else bcd = std::make_unique<BcdModel>(cfg.detector, cfg.loss, init, cfg.model == ModelKind::kBcd);
  }

  std::vector<ad::Parameter>& parameters() { return bcd ? bcd->parameters() : scr->parameters(); }
};

constexpr std::size_t kEvalChunk = 32;

// Predictions for every image; `mid_fraction` (if given) receives the share of anchor
// probabilities strictly inside (0.1, 0.9).
std::vector<PredictionRecord> predict_dataset(const AnyModel& model, const RunConfig& cfg, const Dataset& data,
                                              double* mid_fraction) {
  std::vector<PredictionRecord> out(data.records.size());
  std::size_t mid = 0, total = 0;
  for (std::size_t start = 0; start < data.images.size(); start += kEvalChunk) {
    const std::size_t end = std::min(data.images.size(), start + kEvalChunk);
    std::vector<const Image*> chunk;
    for (std::size_t i = start; i < end; ++i) chunk.push_back(&data.images[i]);
    if (model.bcd) {
      const auto outs = model.bcd->forward_batch(chunk);
      for (std::size_t i = start; i < end; ++i) {
        const auto& o = outs[i - start];
        out[i].boxes = model.bcd->predict_from(o, cfg.eval.predict);
        for (double p : o.p) mid += (p > 0.1 && p < 0.9);
        total += o.p.size();
      }
    } else {
      const auto boxes = model.scr->forward_batch(chunk);
      for (std::size_t i = start; i < end; ++i) out[i].boxes = {{boxes[i - start], 1.0}};
    }
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].image_id = data.records[i].id;
    out[i].class_scores = data.class_scores[i];
  }
  if (mid_fraction) *mid_fraction = total ? static_cast<double>(mid) / static_cast<double>(total) : 0.0;
  return out;
}

int k_single(const RunConfig& cfg) { return cfg.eval.k.front(); }
int k_multi(const RunConfig& cfg) { return cfg.eval.k.back(); }

}  // namespace

RunRecord cmd_train(const RunConfig& cfg, const fs::path& data_dir, const fs::path& out_dir, bool verbose) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const Dataset train = load_dataset(data_dir / "train.jsonl");
  const Dataset test = load_dataset(data_dir / "test.jsonl");
  require(!train.records.empty() && !test.records.empty(), "dataset splits must be non-empty");
  for (const auto& img : train.images) {
    require(img.width == cfg.detector.image_size.width && img.height == cfg.detector.image_size.height &&
                img.channels == cfg.detector.channels,
            "dataset image geometry does not match the model config");
  }
  ensure_dir(out_dir);
  write_text_file(out_dir / "config.txt", cfg.canonical_text());

  AnyModel model(cfg);
  ad::OptimizerState opt;
  opt.momentum = cfg.optim.momentum;
  opt.weight_decay = cfg.optim.weight_decay;
  opt.base_lr = cfg.optim.base_lr;

  std::vector<TrainSample> samples;
  for (std::size_t i = 0; i < train.records.size(); ++i) {
    samples.push_back({&train.images[i], train.records[i].pseudo_boxes});
  }
  const auto truth = test.ground_truth();

  RunRecord rec;
  rec.seed = cfg.seed;
  rec.config_hash = cfg.hash();
  std::vector<PredictionRecord> preds;
  for (int epoch = 0; epoch < cfg.optim.epochs; ++epoch) {
    opt.epoch = epoch;
    const double lr = ad::cosine_lr(epoch, cfg.optim.epochs, cfg.optim.base_lr);
    std::vector<std::size_t> order(samples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng shuffle_rng(derive_seed(cfg.seed, 21, static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(order);

    EpochRecord er;
    er.epoch = epoch;
    er.lr = lr;
    std::size_t steps = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.optim.batch_images) {
      const std::size_t end = std::min(order.size(), start + cfg.optim.batch_images);
      std::vector<TrainSample> batch;
      for (std::size_t i = start; i < end; ++i) batch.push_back(samples[order[i]]);
      if (model.bcd) {
        const std::uint64_t sseed = derive_seed(derive_seed(cfg.seed, 31, static_cast<std::uint64_t>(epoch)), start);
        const StepLosses l = model.bcd->train_step(batch, opt, lr, sseed);
        er.sup += l.sup;
        er.unsup += l.unsup;
        er.total += l.total;
        ++steps;
      } else if (auto l = model.scr->train_step(batch, opt, lr)) {
        er.sup += *l;
        er.total += *l;
        ++steps;
      }
    }
    if (steps) {
      er.sup /= static_cast<double>(steps);
      er.unsup /= static_cast<double>(steps);
      er.total /= static_cast<double>(steps);
    }
    const bool last = epoch + 1 == cfg.optim.epochs;
    preds = predict_dataset(model, cfg, test, last ? &rec.mid_confidence_fraction : nullptr);
    const MetricsReport m = evaluate_dataset(truth, preds, k_single(cfg), k_multi(cfg));
    er.gtknown_single = m.gtknown_single;
    er.gtknown_multi = m.gtknown_multi;
    rec.epochs.push_back(er);
    if (last) rec.final_metrics = m;
    if (verbose) {
      std::fprintf(stderr, "epoch %d lr %.6g loss %.6g (sup %.6g unsup %.6g) gtknown k%d %.2f k%d %.2f\n", epoch, lr,
                   er.total, er.sup, er.unsup, k_single(cfg), er.gtknown_single, k_multi(cfg), er.gtknown_multi);
    }
  }
  rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  write_text_file(out_dir / "run_record.csv", run_record_csv(rec));
  write_text_file(out_dir / "run_summary.csv", summary_csv(cfg, rec));
  write_text_file(out_dir / "timing.txt", fmt("wall_seconds=%.3f\n", rec.wall_seconds));
  ad::save_checkpoint(out_dir / "checkpoint.bin", model.parameters());
  write_predictions(out_dir / "predictions.jsonl", preds);
  write_text_file(out_dir / "metrics.csv", metrics_csv(rec.final_metrics));
  return rec;
}

std::vector<PredictionRecord> predict_with_checkpoint(const RunConfig& cfg, const fs::path& checkpoint,
                                                      const Dataset& data) {
  cfg.validate();
  AnyModel model(cfg);
  ad::load_checkpoint(checkpoint, model.parameters());
  return predict_dataset(model, cfg, data, nullptr);
}

// ---------------------------------------------------------------------------- eval

MetricsReport cmd_eval(const fs::path& manifest, const fs::path& predictions, std::vector<int> ks) {
  if (ks.empty()) ks = {1, 5};
  require(ks.size() <= 2, "eval takes one or two k values");
  for (int k : ks) require(k >= 1, "k values must be >= 1");
  Dataset d;
  d.records = read_manifest(manifest);
  const auto preds = read_predictions(predictions);
  const auto truth = d.ground_truth();
  return evaluate_dataset(truth, preds, ks.front(), ks.back());
}

// ---------------------------------------------------------------------------- sweep

SweepAxis parse_sweep_axis(const std::string& s) {
  if (s == "eta") return SweepAxis::kEta;
  if (s == "gamma_alpha") return SweepAxis::kGammaAlpha;
  if (s == "tau") return SweepAxis::kTau;
  if (s == "ratio") return SweepAxis::kRatio;
  throw ValidationError("unknown sweep axis '" + s + "' (expected eta, gamma_alpha, tau or ratio)");
}

std::string sweep_axis_name(SweepAxis a) {
  switch (a) {
    case SweepAxis::kEta: return "eta";
    case SweepAxis::kGammaAlpha: return "gamma_alpha";
    case SweepAxis::kTau: return "tau";
    case SweepAxis::kRatio: return "ratio";
  }
  return "eta";
}

RunConfig apply_sweep_value(RunConfig cfg, SweepAxis axis, const std::string& value) {
  KeyValues kv;
  switch (axis) {
    case SweepAxis::kEta: kv["loss.eta"] = value; break;
    case SweepAxis::kTau:
      kv["loss.tau1"] = value;
      kv["loss.tau2"] = value;
      break;
    case SweepAxis::kRatio: kv["assign.ratio"] = value; break;
    case SweepAxis::kGammaAlpha: {
      const auto colon = value.find(':');
      require(colon != std::string::npos, "gamma_alpha values look like GAMMA:ALPHA, got '" + value + "'");
      kv["loss.gamma"] = value.substr(0, colon);
      kv["loss.alpha"] = value.substr(colon + 1);
      break;
    }
  }
  cfg = RunConfig::from_key_values(kv, cfg);
  cfg.validate();
  return cfg;
}

std::string sweep_run_name(SweepAxis axis, const std::string& value, std::uint64_t seed) {
  std::string v = value;
  std::replace(v.begin(), v.end(), ':', '-');
  std::replace(v.begin(), v.end(), '/', '_');
  return sweep_axis_name(axis) + "_" + v + "_seed" + std::to_string(seed);
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  return out;
}

// Reconstructs the pieces of a RunRecord a sweep table needs from a finished run directory.
RunRecord read_run_outputs(const fs::path& dir) {
  RunRecord r;
  std::stringstream rec(read_text_file(dir / "run_record.csv"));
  std::string line;
  std::getline(rec, line);
  while (std::getline(rec, line)) {
    const auto f = split_csv_line(line);
    if (f.size() != 7) throw IoError("malformed run record in " + dir.string());
    EpochRecord e;
    e.epoch = std::stoi(f[0]);
    e.lr = std::stod(f[1]);
    e.sup = std::stod(f[2]);
    e.unsup = std::stod(f[3]);
    e.total = std::stod(f[4]);
    e.gtknown_single = std::stod(f[5]);
    e.gtknown_multi = std::stod(f[6]);
    r.epochs.push_back(e);
  }
  std::stringstream sum(read_text_file(dir / "run_summary.csv"));
  std::getline(sum, line);
  std::map<std::string, std::string> kv;
  while (std::getline(sum, line)) {
    const auto f = split_csv_line(line);
    if (f.size() == 2) kv[f[0]] = f[1];
  }
  auto num = [&](const std::string& prefix, double& out, int* k = nullptr) {
    for (const auto& [key, v] : kv) {
      if (key.rfind(prefix, 0) != 0) continue;
      if (k && key.size() > prefix.size()) {
        if (std::stoi(key.substr(prefix.size())) != *k) continue;
      }
      out = std::stod(v);
      return;
    }
  };
  auto& m = r.final_metrics;
  num("top1_loc", m.top1_loc);
  // k values appear in the key names; the smaller one is the single-box variant.
  std::vector<int> ks;
  for (const auto& [key, v] : kv) {
    if (key.rfind("gtknown_loc_k", 0) == 0) ks.push_back(std::stoi(key.substr(13)));
  }
  std::sort(ks.begin(), ks.end());
  if (!ks.empty()) {
    m.k_single = ks.front();
    m.k_multi = ks.back();
  }
  num("top5_loc_k", m.top5_loc_single, &m.k_single);
  num("top5_loc_k", m.top5_loc_multi, &m.k_multi);
  num("gtknown_loc_k", m.gtknown_single, &m.k_single);
  num("gtknown_loc_k", m.gtknown_multi, &m.k_multi);
  num("mid_confidence_fraction", r.mid_confidence_fraction);
  if (kv.count("seed")) r.seed = std::stoull(kv["seed"]);
  if (kv.count("count")) m.count = std::stoull(kv["count"]);
  if (kv.count("config_hash")) r.config_hash = std::stoull(kv["config_hash"], nullptr, 16);
  return r;
}

int spawn_worker(const fs::path& exe, const std::vector<std::string>& args, pid_t& pid) {
  std::vector<std::string> all{exe.string()};
  all.insert(all.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : all) argv.push_back(a.data());
  argv.push_back(nullptr);
  return posix_spawn(&pid, exe.c_str(), nullptr, nullptr, argv.data(), environ);
}

std::string sweep_table_csv(SweepAxis axis, const std::vector<SweepRow>& rows) {
  std::string out =
      "axis,value,seed,status,top1_loc,top5_loc_k1,top5_loc_k5,gtknown_k1,gtknown_k5,mid_confidence_fraction,"
      "first_gtknown_k1,final_gtknown_k1,run_dir\n";
  for (const auto& r : rows) {
    std::string status = r.status;
    std::replace(status.begin(), status.end(), ',', ';');
    std::replace(status.begin(), status.end(), '\n', ' ');
    out += sweep_axis_name(axis) + "," + r.value + "," + std::to_string(r.seed) + "," + status + ",";
    if (r.record && !r.record->epochs.empty()) {
      const auto& m = r.record->final_metrics;
      out += fmt("%.4f", m.top1_loc) + "," + fmt("%.4f", m.top5_loc_single) + "," + fmt("%.4f", m.top5_loc_multi) +
             "," + fmt("%.4f", m.gtknown_single) + "," + fmt("%.4f", m.gtknown_multi) + "," +
             fmt("%.6f", r.record->mid_confidence_fraction) + "," +
             fmt("%.4f", r.record->epochs.front().gtknown_single) + "," +
             fmt("%.4f", r.record->epochs.back().gtknown_single);
    } else {
      out += ",,,,,,,";
    }
    out += "," + r.run_dir.filename().string() + "\n";
  }
  return out;
}

std::string sweep_curves_csv(SweepAxis axis, const std::vector<SweepRow>& rows) {
  std::string out = "axis,value,seed,epoch,gtknown_k1,gtknown_k5,total_loss\n";
  for (const auto& r : rows) {
    if (!r.record) continue;
    for (const auto& e : r.record->epochs) {
      out += sweep_axis_name(axis) + "," + r.value + "," + std::to_string(r.seed) + "," + std::to_string(e.epoch) +
             "," + fmt("%.4f", e.gtknown_single) + "," + fmt("%.4f", e.gtknown_multi) + "," + fmt("%.10g", e.total) +
             "\n";
    }
  }
  return out;
}

}  // namespace

std::vector<SweepRow> cmd_sweep(const RunConfig& base, const SweepOptions& opts, const fs::path& data_dir,
                                const fs::path& out_dir) {
  require(!opts.values.empty(), "sweep needs at least one value");
  require(!opts.seeds.empty(), "sweep needs at least one seed");
  require(opts.jobs >= 1, "jobs must be >= 1");
  require(opts.jobs == 1 || !opts.worker_exe.empty(), "parallel sweeps need a worker executable");

  // Validate every value and claim every output path before any training starts.
  std::vector<SweepRow> rows;
  std::vector<RunConfig> configs;
  std::set<std::string> names;
  for (const auto& v : opts.values) {
    const RunConfig vc = apply_sweep_value(base, opts.axis, v);
    for (std::uint64_t seed : opts.seeds) {
      SweepRow row;
      row.value = v;
      row.seed = seed;
      row.run_dir = out_dir / sweep_run_name(opts.axis, v, seed);
      if (!names.insert(row.run_dir.filename().string()).second) {
        throw ValidationError("sweep output path collision: " + row.run_dir.string());
      }
      if (fs::exists(row.run_dir)) throw ValidationError("sweep output path already exists: " + row.run_dir.string());
      RunConfig c = vc;
      c.seed = seed;
      configs.push_back(c);
      rows.push_back(std::move(row));
    }
  }
  for (const char* f : {"sweep.csv", "sweep_curves.csv"}) {
    if (fs::exists(out_dir / f)) throw ValidationError("sweep output path already exists: " + (out_dir / f).string());
  }
  ensure_dir(out_dir);

  if (opts.jobs == 1) {
    for (std::size_t i = 0; i < rows.size(); ++i) {
      try {
        rows[i].record = cmd_train(configs[i], data_dir, rows[i].run_dir, opts.verbose);
        rows[i].status = "ok";
      } catch (const std::exception& e) {
        rows[i].status = std::string("failed: ") + e.what();
      }
    }
  } else {
    std::map<pid_t, std::size_t> running;
    std::size_t next = 0;
    auto reap_one = [&] {
      int st = 0;
      const pid_t pid = waitpid(-1, &st, 0);
      if (pid <= 0) return;
      auto it = running.find(pid);
      if (it == running.end()) return;
      SweepRow& row = rows[it->second];
      if (WIFEXITED(st) && WEXITSTATUS(st) == 0) {
        try {
          row.record = read_run_outputs(row.run_dir);
          row.status = "ok";
        } catch (const std::exception& e) {
          row.status = std::string("failed: ") + e.what();
        }
      } else {
        row.status = "failed: worker exit status " + std::to_string(WIFEXITED(st) ? WEXITSTATUS(st) : -1);
      }
      running.erase(it);
    };
    while (next < rows.size() || !running.empty()) {
      while (next < rows.size() && running.size() < static_cast<std::size_t>(opts.jobs)) {
        SweepRow& row = rows[next];
        ensure_dir(row.run_dir);
        const fs::path cfg_path = row.run_dir / "requested_config.txt";
        write_text_file(cfg_path, configs[next].canonical_text());
        pid_t pid = 0;
        const int rc = spawn_worker(opts.worker_exe,
                                    {"train", "--config", cfg_path.string(), "--data", data_dir.string(), "--out",
                                     row.run_dir.string()},
                                    pid);
        if (rc != 0) {
          row.status = "failed: cannot launch worker";
        } else {
          running[pid] = next;
        }
        ++next;
      }
      if (!running.empty()) reap_one();
    }
  }

  write_text_file(out_dir / "sweep.csv", sweep_table_csv(opts.axis, rows));
  write_text_file(out_dir / "sweep_curves.csv", sweep_curves_csv(opts.axis, rows));
  return rows;
}

// ---------------------------------------------------------------------------- render

void draw_box_outline(Image& img, const Box& b, std::uint8_t value) {
  const int c0 = static_cast<int>(std::floor(b.x1));
  const int r0 = static_cast<int>(std::floor(b.y1));
  const int c1 = std::max(c0, static_cast<int>(std::ceil(b.x2)) - 1);
  const int r1 = std::max(r0, static_cast<int>(std::ceil(b.y2)) - 1);
  auto put = [&](int x, int y) {
    if (x < 0 || y < 0 || x >= img.width || y >= img.height) return;
    for (int c = 0; c < img.channels; ++c) img.at(x, y, c) = value;
  };
  for (int x = c0; x <= c1; ++x) {
    put(x, r0);
    put(x, r1);
  }
  for (int y = r0; y <= r1; ++y) {
    put(c0, y);
    put(c1, y);
  }
}

std::size_t cmd_render(const fs::path& manifest, const fs::path& predictions, const fs::path& out_dir) {
  const auto records = read_manifest(manifest);
  std::map<std::string, std::vector<ScoredBox>> preds;
  if (!predictions.empty()) {
    for (auto& p : read_predictions(predictions)) preds[p.image_id] = std::move(p.boxes);
  }
  ensure_dir(out_dir);
  const fs::path root = manifest.parent_path();
  for (const auto& r : records) {
    Image img = read_ppm(root / r.image_path);
    if (auto it = preds.find(r.id); it != preds.end()) {
      for (const auto& sb : it->second) draw_box_outline(img, sb.box, kPredIntensity);
    }
    for (const auto& b : r.gt_boxes) draw_box_outline(img, b, kGtIntensity);
    write_ppm(out_dir / (r.id + image_ext(img.channels)), img);
  }
  return records.size();
}

}  // namespace wend
