#include "wend/optim.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numbers>

#include "wend/error.hpp"

namespace wend::ad {

void zero_grads(std::span<Parameter> params) {
  for (auto& p : params) p.tensor.zero_grad();
}

void sgd_step(std::span<Parameter> params, OptimizerState& state, double lr) {
  if (state.velocity.size() != params.size()) {
    state.velocity.clear();
    for (const auto& p : params) state.velocity.emplace_back(p.tensor.size(), 0.0);
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    require(p.tensor.has_grad(), "sgd_step: parameter '" + p.name + "' has no gradient");
    auto& v = state.velocity[i];
    require(v.size() == p.tensor.size(), "sgd_step: momentum buffer shape mismatch for '" + p.name + "'");
    const double wd = p.weight_decay ? state.weight_decay : 0.0;
    const double step = lr * p.lr_multiplier;
    auto data = p.tensor.data();
    const auto grad = p.tensor.grad();
    for (std::size_t j = 0; j < data.size(); ++j) {
      v[j] = state.momentum * v[j] + (grad[j] + wd * data[j]);
      data[j] -= step * v[j];
    }
  }
  ++state.steps;
}

double cosine_lr(int epoch, int total_epochs, double base_lr) {
  require(total_epochs > 0 && epoch >= 0 && epoch < total_epochs,
          "cosine_lr: epoch " + std::to_string(epoch) + " outside [0," +
              std::to_string(total_epochs) + ")");
  return base_lr * 0.5 *
         (1.0 + std::cos(std::numbers::pi * static_cast<double>(epoch) / total_epochs));
}

namespace {

constexpr char kMagic[8] = {'W', 'E', 'N', 'D', 'C', 'K', 'P', 'T'};

template <typename T>
void put(std::ostream& os, T v) {
  static_assert(std::endian::native == std::endian::little, "little-endian host assumed");
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
bool get(std::istream& is, T& v) {
  return static_cast<bool>(is.read(reinterpret_cast<char*>(&v), sizeof(T)));
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, std::span<const Parameter> params) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open checkpoint for writing: " + path.string());
  os.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(os, kCheckpointVersion);
  for (const auto& p : params) {
    put<std::uint32_t>(os, static_cast<std::uint32_t>(p.name.size()));
    os.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(p.tensor.shape().size()));
    for (std::size_t d : p.tensor.shape()) put<std::uint64_t>(os, d);
    for (double v : p.tensor.data()) put<double>(os, v);
  }
  if (!os) throw IoError("failed writing checkpoint: " + path.string());
}

void load_checkpoint(const std::filesystem::path& path, std::span<Parameter> params) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + path.string());
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) {
    throw IoError("not a checkpoint file: " + path.string());
  }
  std::uint32_t version = 0;
  if (!get(is, version) || version != kCheckpointVersion) {
    throw IoError("unsupported checkpoint version in " + path.string());
  }
  std::map<std::string, std::pair<Shape, std::vector<double>>> records;
  while (true) {
    std::uint32_t name_len = 0;
    if (!get(is, name_len)) break;
    std::string name(name_len, '\0');
    std::uint32_t rank = 0;
    if (!is.read(name.data(), name_len) || !get(is, rank)) {
      throw IoError("truncated checkpoint record in " + path.string());
    }
    Shape shape(rank);
    for (auto& d : shape) {
      std::uint64_t v = 0;
      if (!get(is, v)) throw IoError("truncated checkpoint dims in " + path.string());
      d = static_cast<std::size_t>(v);
    }
    std::vector<double> values(numel(shape));
    if (!is.read(reinterpret_cast<char*>(values.data()),
                 static_cast<std::streamsize>(values.size() * sizeof(double)))) {
      throw IoError("truncated checkpoint data for '" + name + "' in " + path.string());
    }
    records.emplace(std::move(name), std::make_pair(std::move(shape), std::move(values)));
  }
  for (auto& p : params) {
    auto it = records.find(p.name);
    if (it == records.end()) throw ValidationError("checkpoint lacks parameter '" + p.name + "'");
    if (it->second.first != p.tensor.shape()) {
      throw ValidationError("checkpoint shape " + shape_string(it->second.first) + " for '" + p.name +
                    "' does not match model shape " + shape_string(p.tensor.shape()));
    }
    std::copy(it->second.second.begin(), it->second.second.end(), p.tensor.data().begin());
  }
}

}  // namespace wend::ad
