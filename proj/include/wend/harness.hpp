#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "wend/config.hpp"
#include "wend/evaluation.hpp"
#include "wend/image.hpp"
#include "wend/synthdata.hpp"

namespace wend {

namespace fs = std::filesystem;

// One manifest line. Paths are relative to the manifest's directory.
struct ManifestRecord {
  std::string id;
  std::string image_path;
  std::vector<Box> gt_boxes;
  std::vector<int> gt_classes;
  std::vector<Box> pseudo_boxes;
  std::vector<Provenance> provenance;
  std::string class_scores_path;
};

struct Dataset {
  fs::path root;
  std::vector<ManifestRecord> records;
  std::vector<Image> images;
  std::vector<std::vector<double>> class_scores;

  std::vector<GroundTruth> ground_truth() const;
};

std::string manifest_line(const ManifestRecord& r);
std::vector<ManifestRecord> read_manifest(const fs::path& path);
void write_manifest(const fs::path& path, const std::vector<ManifestRecord>& records);
Dataset load_dataset(const fs::path& manifest_path);

std::string prediction_line(const PredictionRecord& r);
std::vector<PredictionRecord> read_predictions(const fs::path& path);
void write_predictions(const fs::path& path, const std::vector<PredictionRecord>& records);

std::vector<double> read_class_scores(const fs::path& path);

void write_text_file(const fs::path& path, const std::string& text);
std::string read_text_file(const fs::path& path);

// Writes <out>/train.jsonl, <out>/test.jsonl, images/, scores/ and config.txt.
void cmd_gen_data(const RunConfig& cfg, const fs::path& out_dir);

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double sup = 0.0;
  double unsup = 0.0;
  double total = 0.0;
  double gtknown_single = 0.0;
  double gtknown_multi = 0.0;
};

struct RunRecord {
  std::vector<EpochRecord> epochs;
  MetricsReport final_metrics;
  double mid_confidence_fraction = 0.0;  // held-out anchor probabilities in (0.1, 0.9)
  double wall_seconds = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
};

std::string run_record_csv(const RunRecord& r);

// Trains on <data>/train.jsonl, evaluates on <data>/test.jsonl after every epoch.
// Writes config.txt, run_record.csv, run_summary.csv, timing.txt, checkpoint.bin,
// predictions.jsonl and metrics.csv into out_dir.
RunRecord cmd_train(const RunConfig& cfg, const fs::path& data_dir, const fs::path& out_dir,
                    bool verbose = false);

// Predicts the test split with a saved checkpoint (same code path as the training loop).
std::vector<PredictionRecord> predict_with_checkpoint(const RunConfig& cfg, const fs::path& checkpoint,
                                                      const Dataset& data);

MetricsReport cmd_eval(const fs::path& manifest, const fs::path& predictions, std::vector<int> ks);

enum class SweepAxis { kEta, kGammaAlpha, kTau, kRatio };
SweepAxis parse_sweep_axis(const std::string& s);
std::string sweep_axis_name(SweepAxis a);
// Applies one sweep value ("0.125", "6:0.1", "0.3", "1:4") on top of a config.
RunConfig apply_sweep_value(RunConfig cfg, SweepAxis axis, const std::string& value);

struct SweepOptions {
  SweepAxis axis = SweepAxis::kEta;
  std::vector<std::string> values;
  std::vector<std::uint64_t> seeds{0};
  int jobs = 1;            // >1 launches worker processes
  fs::path worker_exe;     // CLI binary used for workers; required when jobs > 1
  bool verbose = false;
};

struct SweepRow {
  std::string value;
  std::uint64_t seed = 0;
  std::string status;  // "ok" or "failed: <reason>"
  fs::path run_dir;
  std::optional<RunRecord> record;
};

std::string sweep_run_name(SweepAxis axis, const std::string& value, std::uint64_t seed);

// Writes sweep.csv and sweep_curves.csv into out_dir; one run directory per (value, seed).
std::vector<SweepRow> cmd_sweep(const RunConfig& base, const SweepOptions& opts, const fs::path& data_dir,
                                const fs::path& out_dir);

inline constexpr std::uint8_t kGtIntensity = 255;
inline constexpr std::uint8_t kPredIntensity = 128;

// Draws a 1-pixel outline on the rows/cols covering the box's integer perimeter.
void draw_box_outline(Image& img, const Box& b, std::uint8_t value);

// Returns the number of images written.
std::size_t cmd_render(const fs::path& manifest, const fs::path& predictions, const fs::path& out_dir);

}  // namespace wend
