#pragma once

#include <array>
#include <cstdint>
#include <string>

#include <json.hpp>

#include "intent/fusion.hpp"
#include "intent/preprocess.hpp"
#include "intent/training.hpp"

namespace intent {

using Json = nlohmann::ordered_json;

// Full description of one run: what to train, on which data, where to put
// the artifacts. Serialized as a single JSON document with strict schema
// checking; unknown keys are rejected with their path.
struct ExperimentConfig {
  ModelConfig model;
  TrainConfig train;
  WindowParams windows;
  std::string data_dir;
  std::string frames_root;  // empty means <data_dir>/frames
  std::string out_dir;
  std::array<double, 3> split_ratios = {0.7, 0.15, 0.15};
  std::uint64_t split_seed = 1;

  bool operator==(const ExperimentConfig&) const = default;
};

Json mask_to_json(const FeatureMask& m);
Json video_config_to_json(const VideoEncoderConfig& c);
Json seq_config_to_json(const SeqEncoderConfig& c);
Json fusion_config_to_json(const FusionConfig& c);
Json prep_config_to_json(const PrepConfig& c);
Json model_config_to_json(const ModelConfig& c);
Json norm_stats_to_json(const NormStats& s);
Json train_config_to_json(const TrainConfig& c);
Json window_params_to_json(const WindowParams& p);
Json experiment_config_to_json(const ExperimentConfig& c);

// Parsers take defaults and overwrite whatever the document mentions.
// `path` prefixes error messages, e.g. "model.video.in_channels".
FeatureMask mask_from_json(const Json& j, const std::string& path);
VideoEncoderConfig video_config_from_json(const Json& j, const std::string& path,
                                          const VideoEncoderConfig& base = {});
SeqEncoderConfig seq_config_from_json(const Json& j, const std::string& path,
                                      const SeqEncoderConfig& base = {});
FusionConfig fusion_config_from_json(const Json& j, const std::string& path,
                                     const FusionConfig& base = {});
PrepConfig prep_config_from_json(const Json& j, const std::string& path, const PrepConfig& base = {});
ModelConfig model_config_from_json(const Json& j, const std::string& path,
                                   const ModelConfig& base = {});
NormStats norm_stats_from_json(const Json& j, const std::string& path);
TrainConfig train_config_from_json(const Json& j, const std::string& path,
                                   const TrainConfig& base = {});
WindowParams window_params_from_json(const Json& j, const std::string& path,
                                     const WindowParams& base = {});
ExperimentConfig experiment_config_from_json(const Json& j, const std::string& path,
                                             const ExperimentConfig& base = {});

// Reads and parses a config file on top of `base`.
ExperimentConfig load_experiment_config(const std::string& file, const ExperimentConfig& base = {});

// Stable hash of the serialized model configuration.
std::uint64_t config_fingerprint(const ModelConfig& c);

}  // namespace intent
