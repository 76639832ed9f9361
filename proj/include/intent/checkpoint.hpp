#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "intent/dataset.hpp"
#include "intent/fusion.hpp"
#include "intent/preprocess.hpp"

namespace intent {

inline constexpr char kCheckpointMagic[9] = "INTENTC1";
inline constexpr std::uint32_t kCheckpointVersion = 1;

// Everything next to the weights that is needed to rebuild the model and
// reproduce its preprocessing and data split.
struct CheckpointMeta {
  ModelConfig model;
  NormStats stats;
  double class_weight = 1.0;
  std::string profile;
  std::uint64_t seed = 0;
  std::int64_t epoch = 0;  // epoch the weights come from, 1-based
  std::array<double, 3> split_ratios = {0.7, 0.15, 0.15};
  std::uint64_t split_seed = 1;
  WindowParams windows;

  bool operator==(const CheckpointMeta&) const = default;
};

// Layout: 8-byte magic, u32 format version, u64 header length, JSON header
// (meta plus tensor index), then raw float64 payload in index order.
void save_checkpoint(const std::string& path, const CheckpointMeta& meta,
                     const std::vector<std::pair<std::string, Var>>& params);

struct LoadedCheckpoint {
  CheckpointMeta meta;
  std::vector<std::pair<std::string, Tensor>> tensors;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

// Rebuilds the model from the stored config and overwrites every parameter
// with the stored tensor; name or shape mismatches throw.
std::unique_ptr<IntentModel> model_from_checkpoint(const LoadedCheckpoint& ckpt);

}  // namespace intent
