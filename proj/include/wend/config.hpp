#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "wend/detector.hpp"
#include "wend/losses.hpp"
#include "wend/synthdata.hpp"

namespace wend {

// Flat "section.key=value" text. Blank lines and '#' comments are ignored.
using KeyValues = std::map<std::string, std::string>;

KeyValues parse_key_values(const std::string& text, const std::string& origin = "<config>");
KeyValues read_key_values(const std::filesystem::path& path);
std::string format_key_values(const KeyValues& kv);

enum class ModelKind { kBcd, kBcdNoWe, kScr };
std::string model_kind_name(ModelKind k);
ModelKind parse_model_kind(const std::string& s);

struct DataConfig {
  std::uint64_t seed = 1;
  std::size_t train_count = 2000;
  std::size_t test_count = 500;
  SceneParams train_scene;
  int test_min_objects = 1;
  int test_max_objects = 3;
  NoiseModel noise;
  ClassScoreModel classifier;

  SceneParams test_scene() const;
};

struct OptimConfig {
  double base_lr = 0.004;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  int epochs = 30;
  std::size_t batch_images = 8;
};

struct EvalConfig {
  PredictOptions predict;
  std::vector<int> k{1, 5};
};

struct RunConfig {
  DataConfig data;
  ModelKind model = ModelKind::kBcd;
  DetectorConfig detector;
  LossConfig loss;
  OptimConfig optim;
  EvalConfig eval;
  std::uint64_t seed = 0;

  void validate() const;
  KeyValues to_key_values() const;
  // Unknown keys and malformed values raise ValidationError naming the key.
  static RunConfig from_key_values(const KeyValues& kv, RunConfig base);
  static RunConfig from_key_values(const KeyValues& kv);

  std::string canonical_text() const { return format_key_values(to_key_values()); }
  std::uint64_t hash() const;
};

// Config file (optional) overlaid with explicit key=value overrides.
RunConfig load_run_config(const std::filesystem::path& path, const KeyValues& overrides);

}  // namespace wend
