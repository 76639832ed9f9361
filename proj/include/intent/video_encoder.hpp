#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "intent/autograd.hpp"
#include "intent/rng.hpp"

namespace intent {

// Shift-based spatio-temporal encoder: stages of (learnable 3D shift ->
// strided 3x3 conv -> ReLU -> 3x3 conv -> ReLU), global average pooling,
// linear head. Input channels are t-major groups of 3 (RGB per kept frame).
struct VideoEncoderConfig {
  std::int64_t in_channels = 24;
  std::int64_t temporal_groups = 8;
  std::vector<std::int64_t> stage_channels = {64, 128, 256, 384};
  std::int64_t kernel = 3;
  std::int64_t feature_dim = 128;  // F
  std::int64_t input_hw = 112;
  double shift_init_range = 0.5;
  // effective shift learning rate when the training profile gives no
  // absolute shift rate: backbone_lr times this
  double shift_lr_multiplier = 1.0;

  bool operator==(const VideoEncoderConfig&) const = default;
};

class VideoEncoder {
 public:
  VideoEncoder(VideoEncoderConfig config, RandomStream& rng);

  // stack: in_channels x input_hw x input_hw -> [1, feature_dim]
  Var forward(const Tensor& stack) const;
  // [B, feature_dim]; samples processed in order, one at a time
  Var forward_batch(const std::vector<const Tensor*>& stacks) const;

  std::vector<std::pair<std::string, Var>> named_parameters() const;
  std::int64_t parameter_count() const;
  const VideoEncoderConfig& config() const { return config_; }

 private:
  struct Stage {
    Var shift_offsets;  // [cin, 3]
    Var conv1_w, conv1_b;
    Var conv2_w, conv2_b;
    std::int64_t cin = 0, cout = 0;
  };
  VideoEncoderConfig config_;
  std::vector<Stage> stages_;
  Var head_w_, head_b_;
};

}  // namespace intent
