#pragma once

#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "intent/preprocess.hpp"
#include "intent/seq_encoder.hpp"
#include "intent/video_encoder.hpp"

namespace intent {

enum class FusionMode { kConcat, kAttention };

std::string fusion_mode_name(FusionMode mode);
FusionMode parse_fusion_mode(const std::string& name);

struct FusionConfig {
  FusionMode mode = FusionMode::kConcat;
  std::int64_t hidden = 256;
  double dropout = 0.5;

  bool operator==(const FusionConfig&) const = default;
};

// Everything needed to rebuild the model and its preprocessing.
struct ModelConfig {
  FeatureMask mask;
  VideoEncoderConfig video;
  SeqEncoderConfig seq;
  FusionConfig fusion;
  PrepConfig prep;

  bool operator==(const ModelConfig&) const = default;
};

// Full network: video branch and/or sequence branch, fused into a two-layer
// head emitting one raw logit. The sigmoid lives with the loss, not here.
class IntentModel {
 public:
  IntentModel(ModelConfig config, std::uint64_t seed);

  // kTrain applies dropout and needs `dropout_rng`; kEval is deterministic.
  Var forward(const FeatureBundle& bundle, Mode mode, RandomStream* dropout_rng = nullptr,
              EncoderTrace* trace = nullptr) const;

  std::vector<std::pair<std::string, Var>> named_parameters() const;
  std::int64_t parameter_count() const;
  const ModelConfig& config() const { return config_; }

  const VideoEncoder* video_encoder() const { return video_.get(); }
  const SeqEncoder* seq_encoder() const { return seq_.get(); }

 private:
  Var fuse(std::optional<Var> v, std::optional<Var> s, Mode mode, RandomStream* dropout_rng) const;

  ModelConfig config_;
  std::unique_ptr<VideoEncoder> video_;
  std::unique_ptr<SeqEncoder> seq_;
  Var attn_w_;  // score matrix for attention fusion
  Var fc1_w_, fc1_b_, fc2_w_, fc2_b_;
};

}  // namespace intent
