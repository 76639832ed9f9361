#pragma once

#include <cstdint>
#include <vector>

#include "intent/dataset.hpp"
#include "intent/frames.hpp"
#include "intent/mask.hpp"
#include "intent/tensor.hpp"

namespace intent {

// Normalization constants. Speed statistics must come from the training
// partition; image dimensions are the fixed annotation space.
struct NormStats {
  double speed_mean = 0.0;
  double speed_std = 1.0;
  double image_width = kImageWidth;
  double image_height = kImageHeight;

  bool operator==(const NormStats&) const = default;
};

struct PrepConfig {
  std::int64_t obs_len = 16;
  std::int64_t sub_phase = 0;  // 0 keeps even window positions, 1 keeps odd
  std::int64_t crop_height = 112;
  std::int64_t crop_width = 112;
  std::int64_t pose_dim = kPoseDim;
  double pixel_min = 0.0;
  double pixel_max = 255.0;

  std::int64_t stack_channels() const { return (obs_len / 2) * 3; }
  bool operator==(const PrepConfig&) const = default;
};

// Model inputs for one window. Channels switched off by the mask hold an
// empty tensor rather than zeros.
struct FeatureBundle {
  Tensor video_stack;  // stack_channels x crop_height x crop_width
  Tensor box_seq;      // obs_len x 4, in [0,1]
  Tensor pose_seq;     // obs_len x pose_dim, in [0,1], zeros preserved
  Tensor speed_seq;    // obs_len x 1, z-scored
  int label = 0;
  FeatureMask mask;
};

// Halves the frame rate: keeps every second entry starting at `phase`.
std::vector<std::int64_t> subsample_frames(const std::vector<std::int64_t>& frames,
                                           std::int64_t expected_len = 16, std::int64_t phase = 0);

// Crop `box_px` (frame pixel coordinates, clipped to the frame) and resize
// to out_h x out_w with bilinear interpolation; aspect ratio is not kept.
// Returns 3 x out_h x out_w in the source value scale.
Tensor crop_resize(const Image& frame, const Box& box_px, std::int64_t out_h, std::int64_t out_w);

Tensor normalize_image(const Tensor& img, double range_min, double range_max);
Box normalize_box(const Box& box, const NormStats& stats);
Pose normalize_pose(const Pose& pose, const NormStats& stats);
double zscore_speed(double v, const NormStats& stats);

// Population mean/std over every speed value of the training windows.
NormStats compute_norm_stats(const std::vector<ObservationWindow>& train_windows);

// Runs the full per-window pipeline. `frames` may be null when images are
// masked off.
FeatureBundle assemble_bundle(const ObservationWindow& window, const NormStats& stats,
                              const FeatureMask& mask, const PrepConfig& prep, FrameSource* frames);

}  // namespace intent
