#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "wend/autodiff.hpp"

namespace wend::ad {

struct Parameter {
  std::string name;
  Tensor tensor;
  double lr_multiplier = 1.0;
  bool weight_decay = true;
};

struct OptimizerState {
  double momentum = 0.9;
  double weight_decay = 1e-4;
  double base_lr = 0.004;
  std::vector<std::vector<double>> velocity;
  int epoch = 0;
  std::size_t steps = 0;
};

void zero_grads(std::span<Parameter> params);

// v <- momentum*v + (grad + wd*param); param <- param - lr*lr_multiplier*v.
// Throws ValidationError when a parameter carries no gradient.
void sgd_step(std::span<Parameter> params, OptimizerState& state, double lr);

// base_lr * 0.5 * (1 + cos(pi*epoch/total_epochs)), epoch in [0, total_epochs).
double cosine_lr(int epoch, int total_epochs, double base_lr);

// Binary checkpoint: "WENDCKPT", u32 version, then per tensor
// (u32 name length, name bytes, u32 rank, u64 dims..., f64 values...), all little-endian.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, std::span<const Parameter> params);
// Loads into the given parameters by name; names and shapes must match exactly.
void load_checkpoint(const std::filesystem::path& path, std::span<Parameter> params);

}  // namespace wend::ad
