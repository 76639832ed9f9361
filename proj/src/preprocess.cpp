#include "intent/preprocess.hpp"

#include <algorithm>
#include <cmath>

namespace intent {

std::vector<std::int64_t> subsample_frames(const std::vector<std::int64_t>& frames,
                                           std::int64_t expected_len, std::int64_t phase) {
  if (static_cast<std::int64_t>(frames.size()) != expected_len)
    throw ShapeError(msg("subsample expects ", expected_len, " frames, got ", frames.size()));
  if (expected_len % 2 != 0) throw ConfigError(msg("observation length ", expected_len, " must be even"));
  if (phase != 0 && phase != 1) throw ConfigError(msg("subsample phase ", phase, " must be 0 or 1"));
  std::vector<std::int64_t> out;
  out.reserve(static_cast<std::size_t>(expected_len / 2));
  for (std::int64_t i = phase; i < expected_len; i += 2) out.push_back(frames[static_cast<std::size_t>(i)]);
  return out;
}

Tensor crop_resize(const Image& frame, const Box& box_px, std::int64_t out_h, std::int64_t out_w) {
  const double fw = static_cast<double>(frame.width);
  const double fh = static_cast<double>(frame.height);
  const double x0 = std::clamp(box_px[0], 0.0, fw);
  const double y0 = std::clamp(box_px[1], 0.0, fh);
  const double x1 = std::clamp(box_px[2], 0.0, fw);
  const double y1 = std::clamp(box_px[3], 0.0, fh);
  const double bw = x1 - x0, bh = y1 - y0;
  if (bw <= 0.0 || bh <= 0.0)
    throw ValidationError(msg("crop box (", box_px[0], ",", box_px[1], ",", box_px[2], ",", box_px[3],
                              ") has zero area after clipping to ", frame.width, "x", frame.height));

  Tensor out({3, out_h, out_w});
  for (std::int64_t i = 0; i < out_h; ++i) {
    // sample at pixel centers of the crop region
    const double sy = y0 + (static_cast<double>(i) + 0.5) * bh / static_cast<double>(out_h) - 0.5;
    const double syc = std::clamp(sy, 0.0, fh - 1.0);
    const std::int64_t iy0 = static_cast<std::int64_t>(std::floor(syc));
    const std::int64_t iy1 = std::min(iy0 + 1, frame.height - 1);
    const double wy = syc - static_cast<double>(iy0);
    for (std::int64_t j = 0; j < out_w; ++j) {
      const double sx = x0 + (static_cast<double>(j) + 0.5) * bw / static_cast<double>(out_w) - 0.5;
      const double sxc = std::clamp(sx, 0.0, fw - 1.0);
      const std::int64_t ix0 = static_cast<std::int64_t>(std::floor(sxc));
      const std::int64_t ix1 = std::min(ix0 + 1, frame.width - 1);
      const double wx = sxc - static_cast<double>(ix0);
      for (int c = 0; c < 3; ++c) {
        const double top = (1.0 - wx) * frame.at(iy0, ix0, c) + wx * frame.at(iy0, ix1, c);
        const double bot = (1.0 - wx) * frame.at(iy1, ix0, c) + wx * frame.at(iy1, ix1, c);
        out.at(c, i, j) = (1.0 - wy) * top + wy * bot;
      }
    }
  }
  return out;
}

Tensor normalize_image(const Tensor& img, double range_min, double range_max) {
  if (range_max <= range_min)
    throw ConfigError(msg("bad pixel range [", range_min, ",", range_max, "]"));
  Tensor out = img;
  const double span = range_max - range_min;
  for (auto& v : out.vec()) {
    if (v < range_min || v > range_max)
      throw ValidationError(msg("pixel value ", v, " outside declared range [", range_min, ",",
                                range_max, "]"));
    v = (v - range_min) / span;
  }
  return out;
}

Box normalize_box(const Box& box, const NormStats& stats) {
  if (box[0] < 0 || box[1] < 0 || box[2] > stats.image_width || box[3] > stats.image_height ||
      box[0] >= box[2] || box[1] >= box[3])
    throw ValidationError(msg("box (", box[0], ",", box[1], ",", box[2], ",", box[3],
                              ") outside image ", stats.image_width, "x", stats.image_height));
  return {box[0] / stats.image_width, box[1] / stats.image_height, box[2] / stats.image_width,
          box[3] / stats.image_height};
}

Pose normalize_pose(const Pose& pose, const NormStats& stats) {
  Pose out{};
  for (std::size_t i = 0; i < pose.size(); ++i) {
    const double v = pose[i];
    if (v < 0.0) throw ValidationError(msg("pose value ", v, " is negative"));
    if (v == 0.0) {
      out[i] = 0.0;  // missing-keypoint marker passes through untouched
      continue;
    }
    const double div = (i % 2 == 0) ? stats.image_width : stats.image_height;
    out[i] = std::min(v / div, 1.0);
  }
  return out;
}

double zscore_speed(double v, const NormStats& stats) {
  if (stats.speed_std <= 0.0)
    throw ConfigError(msg("speed std ", stats.speed_std, " must be positive"));
  return (v - stats.speed_mean) / stats.speed_std;
}

NormStats compute_norm_stats(const std::vector<ObservationWindow>& train_windows) {
  std::int64_t n = 0;
  double mean = 0.0;
  for (const auto& w : train_windows)
    for (double v : w.ego_speed) {
      ++n;
      mean += v;
    }
  if (n == 0) throw ConfigError("cannot compute speed statistics from an empty training set");
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (const auto& w : train_windows)
    for (double v : w.ego_speed) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n);  // population variance
  NormStats stats;
  stats.speed_mean = mean;
  stats.speed_std = std::sqrt(var);
  if (stats.speed_std <= 0.0)
    throw ConfigError("speed values are constant over the training set; z-score undefined");
  return stats;
}

FeatureBundle assemble_bundle(const ObservationWindow& window, const NormStats& stats,
                              const FeatureMask& mask, const PrepConfig& prep, FrameSource* frames) {
  const std::int64_t n = prep.obs_len;
  if (static_cast<std::int64_t>(window.frames.size()) != n)
    throw ShapeError(msg("window has ", window.frames.size(), " frames, expected ", n));
  if (static_cast<std::int64_t>(window.boxes.size()) != n ||
      static_cast<std::int64_t>(window.pose.size()) != n ||
      static_cast<std::int64_t>(window.ego_speed.size()) != n)
    throw ShapeError(msg("window per-frame fields disagree with obs_len ", n));
  if (!mask.any()) throw ConfigError("feature mask enables no channel");

  FeatureBundle b;
  b.label = window.label;
  b.mask = mask;

  if (mask.boxes) {
    b.box_seq = Tensor({n, 4});
    for (std::int64_t i = 0; i < n; ++i) {
      const Box nb = normalize_box(window.boxes[static_cast<std::size_t>(i)], stats);
      for (int k = 0; k < 4; ++k) b.box_seq.at(i, k) = nb[static_cast<std::size_t>(k)];
    }
  }
  if (mask.pose) {
    b.pose_seq = Tensor({n, prep.pose_dim});
    for (std::int64_t i = 0; i < n; ++i) {
      const Pose np = normalize_pose(window.pose[static_cast<std::size_t>(i)], stats);
      for (std::int64_t k = 0; k < prep.pose_dim; ++k)
        b.pose_seq.at(i, k) = np[static_cast<std::size_t>(k)];
    }
  }
  if (mask.speed) {
    b.speed_seq = Tensor({n, 1});
    for (std::int64_t i = 0; i < n; ++i)
      b.speed_seq.at(i, 0) = zscore_speed(window.ego_speed[static_cast<std::size_t>(i)], stats);
  }

  if (mask.images) {
    if (!frames)
      throw ConfigError(msg("images are enabled but no frame source is configured (video ",
                            window.video_id, ")"));
    const auto kept = subsample_frames(window.frames, n, prep.sub_phase);
    b.video_stack = Tensor({prep.stack_channels(), prep.crop_height, prep.crop_width});
    for (std::size_t s = 0; s < kept.size(); ++s) {
      const std::int64_t frame_no = kept[s];
      const std::int64_t win_pos = static_cast<std::int64_t>(2 * s) + prep.sub_phase;
      Image img;
      try {
        img = frames->frame(window.video_id, frame_no);
      } catch (const Error& e) {
        throw IoError(msg("cannot resolve frame (video ", window.video_id, ", frame ", frame_no,
                          "): ", e.what()));
      }
      // annotation coordinates live in the fixed space; scale to this frame
      const Box& ab = window.boxes[static_cast<std::size_t>(win_pos)];
      const double sx = static_cast<double>(img.width) / stats.image_width;
      const double sy = static_cast<double>(img.height) / stats.image_height;
      const Box px = {ab[0] * sx, ab[1] * sy, ab[2] * sx, ab[3] * sy};
      const Tensor crop = crop_resize(img, px, prep.crop_height, prep.crop_width);
      const Tensor norm = normalize_image(crop, prep.pixel_min, prep.pixel_max);
      const std::int64_t base = static_cast<std::int64_t>(s) * 3;
      for (int c = 0; c < 3; ++c)
        for (std::int64_t y = 0; y < prep.crop_height; ++y)
          for (std::int64_t x = 0; x < prep.crop_width; ++x)
            b.video_stack.at(base + c, y, x) = norm.at(c, y, x);
    }
  }
  return b;
}

}  // namespace intent
