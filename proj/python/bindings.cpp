#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "wend/assignment.hpp"
#include "wend/config.hpp"
#include "wend/error.hpp"
#include "wend/evaluation.hpp"
#include "wend/geometry.hpp"
#include "wend/harness.hpp"
#include "wend/losses.hpp"

namespace py = pybind11;
using namespace wend;

namespace {

// Boxes and deltas cross the boundary as plain 4-tuples.
using Quad = std::array<double, 4>;

Box to_box(const Quad& q) { return {q[0], q[1], q[2], q[3]}; }
Quad from_box(const Box& b) { return {b.x1, b.y1, b.x2, b.y2}; }
DeltaVec to_delta(const Quad& q) { return {q[0], q[1], q[2], q[3]}; }
Quad from_delta(const DeltaVec& d) { return d.to_array(); }

std::vector<Box> to_boxes(const std::vector<Quad>& qs) {
  std::vector<Box> out;
  for (const auto& q : qs) out.push_back(to_box(q));
  return out;
}

py::tuple loss_tuple(const LossValue& v) {
  std::vector<Quad> gt(v.grad_t.begin(), v.grad_t.end());
  return py::make_tuple(v.value, v.grad_p, gt);
}

py::dict metrics_dict(const MetricsReport& r) {
  py::dict d;
  d["top1_loc"] = r.top1_loc;
  d[py::str("top5_loc_k" + std::to_string(r.k_single))] = r.top5_loc_single;
  d[py::str("top5_loc_k" + std::to_string(r.k_multi))] = r.top5_loc_multi;
  d[py::str("gtknown_loc_k" + std::to_string(r.k_single))] = r.gtknown_single;
  d[py::str("gtknown_loc_k" + std::to_string(r.k_multi))] = r.gtknown_multi;
  d["count"] = r.count;
  return d;
}

py::dict record_dict(const RunRecord& r) {
  py::dict d;
  py::list epochs;
  for (const auto& e : r.epochs) {
    py::dict row;
    row["epoch"] = e.epoch;
    row["lr"] = e.lr;
    row["sup_loss"] = e.sup;
    row["unsup_loss"] = e.unsup;
    row["total_loss"] = e.total;
    row["gtknown_single"] = e.gtknown_single;
    row["gtknown_multi"] = e.gtknown_multi;
    epochs.append(row);
  }
  d["epochs"] = epochs;
  d["metrics"] = metrics_dict(r.final_metrics);
  d["mid_confidence_fraction"] = r.mid_confidence_fraction;
  d["wall_seconds"] = r.wall_seconds;
  d["seed"] = r.seed;
  d["config_hash"] = r.config_hash;
  return d;
}

RunConfig config_from(const KeyValues& overrides) {
  RunConfig cfg = RunConfig::from_key_values(overrides);
  cfg.validate();
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_wend, m) {
  m.doc() = "Binary-class detector with weighted-entropy training for weakly supervised localization";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);

  // geometry
  m.def("iou", [](const Quad& a, const Quad& b) { return iou(to_box(a), to_box(b)); });
  m.def("giou", [](const Quad& a, const Quad& b) { return giou(to_box(a), to_box(b)); });
  m.def("encode_deltas", [](const Quad& t, const Quad& r) { return from_delta(encode_deltas(to_box(t), to_box(r))); });
  m.def(
      "decode_deltas",
      [](const Quad& d, const Quad& r, double clamp) { return from_box(decode_deltas(to_delta(d), to_box(r), clamp)); },
      py::arg("delta"), py::arg("reference"), py::arg("clamp") = kDefaultDeltaClamp);
  m.def("clip_box", [](const Quad& b, double w, double h) { return from_box(clip_box(to_box(b), w, h)); });
  m.def(
      "nms",
      [](const std::vector<std::pair<Quad, double>>& boxes, double thr) {
        std::vector<ScoredBox> in;
        for (const auto& [b, s] : boxes) in.push_back({to_box(b), s});
        std::vector<std::pair<Quad, double>> out;
        for (const auto& k : nms(in, thr)) out.emplace_back(from_box(k.box), k.score);
        return out;
      },
      py::arg("boxes"), py::arg("iou_threshold"));

  // losses
  py::enum_<RegressionKind>(m, "RegressionKind")
      .value("SMOOTH_L1", RegressionKind::kSmoothL1)
      .value("GIOU", RegressionKind::kGiou);
  py::class_<LossConfig>(m, "LossConfig")
      .def(py::init<>())
      .def_readwrite("lambda1", &LossConfig::lambda1)
      .def_readwrite("lambda2", &LossConfig::lambda2)
      .def_readwrite("gamma", &LossConfig::gamma)
      .def_readwrite("alpha", &LossConfig::alpha)
      .def_readwrite("tau1", &LossConfig::tau1)
      .def_readwrite("tau2", &LossConfig::tau2)
      .def_readwrite("eta", &LossConfig::eta)
      .def_readwrite("reg_kind", &LossConfig::reg_kind)
      .def_readwrite("smooth_l1_beta", &LossConfig::smooth_l1_beta)
      .def_static("large_scale_preset", &LossConfig::large_scale_preset)
      .def("validate", &LossConfig::validate);

  m.def("bce", [](double p, double y) { return loss_tuple(bce(p, y)); });
  m.def("smooth_l1", [](const Quad& t, const Quad& s, double beta) {
    return loss_tuple(smooth_l1(to_delta(t), to_delta(s), beta));
  });
  m.def("giou_loss", [](const Quad& p, const Quad& t) { return loss_tuple(giou_loss(to_box(p), to_box(t))); });
  m.def("quality_loss", [](double c, double c_star) { return loss_tuple(quality_loss(c, c_star)); });
  m.def(
      "supervised_loss",
      [](const std::vector<double>& p, const std::vector<int>& labels, const std::vector<Quad>& t,
         const std::vector<Quad>& t_star, const LossConfig& cfg, const std::vector<Quad>& anchors) {
        std::vector<DeltaVec> a, b;
        for (const auto& q : t) a.push_back(to_delta(q));
        for (const auto& q : t_star) b.push_back(to_delta(q));
        const auto boxes = to_boxes(anchors);
        return loss_tuple(supervised_loss(p, labels, a, b, cfg, boxes));
      },
      py::arg("p"), py::arg("labels"), py::arg("t"), py::arg("t_star"), py::arg("cfg") = LossConfig{},
      py::arg("anchors") = std::vector<Quad>{});
  m.def("we_weight", &we_weight, py::arg("p"), py::arg("cfg") = LossConfig{});
  m.def(
      "weighted_entropy_loss",
      [](const std::vector<double>& p, const LossConfig& cfg) { return loss_tuple(weighted_entropy_loss(p, cfg)); },
      py::arg("p"), py::arg("cfg") = LossConfig{});
  m.def(
      "total_loss",
      [](double sup, double unsup, const LossConfig& cfg) {
        return total_loss(LossValue{sup, {}, {}}, LossValue{unsup, {}, {}}, cfg).value;
      },
      py::arg("sup"), py::arg("unsup"), py::arg("cfg") = LossConfig{});

  // assignment
  m.def(
      "generate_anchors",
      [](int width, int height, int stride, const std::vector<double>& scales, const std::vector<double>& ratios) {
        std::vector<Quad> out;
        for (const auto& b : generate_anchors({width, height}, stride, scales, ratios).anchors) out.push_back(from_box(b));
        return out;
      },
      py::arg("width"), py::arg("height"), py::arg("stride"), py::arg("scales"), py::arg("ratios") = std::vector<double>{1.0});
  m.def(
      "assign_labels",
      [](const std::vector<Quad>& anchors, const std::vector<Quad>& pseudo_boxes, double fg, double bg) {
        AnchorSet set;
        set.anchors = to_boxes(anchors);
        std::vector<int> labels;
        for (auto l : assign_labels(set, to_boxes(pseudo_boxes), {fg, bg}).labels) labels.push_back(static_cast<int>(l));
        return labels;
      },
      py::arg("anchors"), py::arg("pseudo_boxes"), py::arg("fg") = 0.7, py::arg("bg") = 0.3);

  // evaluation
  m.def(
      "evaluate",
      [](const std::vector<std::tuple<std::string, std::vector<Quad>, int>>& truth,
         const std::vector<std::tuple<std::string, std::vector<std::pair<Quad, double>>, std::vector<double>>>& preds,
         int k_single, int k_multi) {
        std::vector<GroundTruth> gts;
        for (const auto& [id, boxes, cls] : truth) gts.push_back({id, to_boxes(boxes), cls});
        std::vector<PredictionRecord> recs;
        for (const auto& [id, boxes, scores] : preds) {
          PredictionRecord r{id, {}, scores};
          for (const auto& [b, s] : boxes) r.boxes.push_back({to_box(b), s});
          recs.push_back(std::move(r));
        }
        return metrics_dict(evaluate_dataset(gts, recs, k_single, k_multi));
      },
      py::arg("truth"), py::arg("predictions"), py::arg("k_single") = 1, py::arg("k_multi") = 5);

  // batch commands; overrides use the same key=value names as the CLI's --set
  m.def(
      "canonical_config", [](const KeyValues& overrides) { return config_from(overrides).canonical_text(); },
      py::arg("overrides") = KeyValues{});
  m.def(
      "gen_data", [](const fs::path& out, const KeyValues& overrides) { cmd_gen_data(config_from(overrides), out); },
      py::arg("out"), py::arg("overrides") = KeyValues{});
  m.def(
      "train",
      [](const fs::path& data, const fs::path& out, const KeyValues& overrides) {
        RunRecord r;
        {
          py::gil_scoped_release release;
          r = cmd_train(config_from(overrides), data, out);
        }
        return record_dict(r);
      },
      py::arg("data"), py::arg("out"), py::arg("overrides") = KeyValues{});
  m.def(
      "eval",
      [](const fs::path& manifest, const fs::path& predictions, std::vector<int> ks) {
        return metrics_dict(cmd_eval(manifest, predictions, std::move(ks)));
      },
      py::arg("manifest"), py::arg("predictions"), py::arg("k") = std::vector<int>{1, 5});
  m.def(
      "sweep",
      [](const fs::path& data, const fs::path& out, const std::string& axis, const std::vector<std::string>& values,
         const std::vector<std::uint64_t>& seeds, const KeyValues& overrides) {
        SweepOptions opts;
        opts.axis = parse_sweep_axis(axis);
        opts.values = values;
        opts.seeds = seeds;
        std::vector<SweepRow> rows;
        {
          py::gil_scoped_release release;
          rows = cmd_sweep(config_from(overrides), opts, data, out);
        }
        py::list out_rows;
        for (const auto& r : rows) {
          py::dict d;
          d["value"] = r.value;
          d["seed"] = r.seed;
          d["status"] = r.status;
          d["run_dir"] = r.run_dir;
          d["record"] = r.record ? py::object(record_dict(*r.record)) : py::none();
          out_rows.append(d);
        }
        return out_rows;
      },
      py::arg("data"), py::arg("out"), py::arg("axis"), py::arg("values"), py::arg("seeds") = std::vector<std::uint64_t>{0},
      py::arg("overrides") = KeyValues{});
  m.def(
      "render",
      [](const fs::path& manifest, const fs::path& out, const fs::path& predictions) {
        return cmd_render(manifest, predictions, out);
      },
      py::arg("manifest"), py::arg("out"), py::arg("predictions") = fs::path{});
}
