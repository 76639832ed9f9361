#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "intent/dataset.hpp"

namespace intent {

// Interleaved 8-bit RGB raster.
struct Image {
  std::int64_t width = 0;
  std::int64_t height = 0;
  std::vector<std::uint8_t> rgb;  // height * width * 3

  Image() = default;
  Image(std::int64_t w, std::int64_t h)
      : width(w), height(h), rgb(static_cast<std::size_t>(w * h * 3), 0) {}

  std::uint8_t& at(std::int64_t y, std::int64_t x, int c) {
    return rgb[static_cast<std::size_t>((y * width + x) * 3 + c)];
  }
  std::uint8_t at(std::int64_t y, std::int64_t x, int c) const {
    return rgb[static_cast<std::size_t>((y * width + x) * 3 + c)];
  }
  bool operator==(const Image&) const = default;
};

// Binary PPM (P6), maxval 255.
Image read_ppm(const std::string& path);
void write_ppm(const std::string& path, const Image& img);

// Resolves (video_id, frame_index) to pixels. Frames may be stored at any
// resolution; annotation coordinates stay in the 1920x1080 space and are
// scaled by the consumer.
class FrameSource {
 public:
  virtual ~FrameSource() = default;
  virtual Image frame(const std::string& video_id, std::int64_t frame_index) = 0;
};

// Reads <root>/<video_id>/<frame_index padded to 5>.ppm with a small FIFO cache.
class DirectoryFrameSource : public FrameSource {
 public:
  explicit DirectoryFrameSource(std::string root, std::size_t cache_capacity = 256);
  Image frame(const std::string& video_id, std::int64_t frame_index) override;

  static std::string frame_path(const std::string& root, const std::string& video_id,
                                std::int64_t frame_index);

 private:
  std::string root_;
  std::size_t cache_capacity_;
  std::unordered_map<std::string, Image> cache_;
  std::vector<std::string> cache_order_;
};

// Procedural frames: hashed-noise background, pedestrian box filled with a
// striped texture. With label_texture on, stripe orientation encodes the
// track label (vertical = crossing); off renders every box the same way.
class SyntheticFrameSource : public FrameSource {
 public:
  SyntheticFrameSource(const std::vector<TrackAnnotation>& tracks, std::uint64_t seed,
                       bool label_texture = true, std::int64_t frame_width = 320,
                       std::int64_t frame_height = 180);
  Image frame(const std::string& video_id, std::int64_t frame_index) override;

  std::int64_t frame_width() const { return width_; }
  std::int64_t frame_height() const { return height_; }

 private:
  struct PaintedTrack {
    int label = 0;
    std::int64_t first_frame = 0;
    std::vector<Box> boxes;
  };
  std::uint64_t seed_;
  bool label_texture_;
  std::int64_t width_, height_;
  std::unordered_map<std::string, std::vector<PaintedTrack>> by_video_;
};

// Writes every frame of every track through the same renderer as
// SyntheticFrameSource, so a DirectoryFrameSource over the output directory
// serves bitwise-identical pixels.
void write_synthetic_frames(const std::string& root, const std::vector<TrackAnnotation>& tracks,
                            std::uint64_t seed, bool label_texture = true,
                            std::int64_t frame_width = 320, std::int64_t frame_height = 180);

}  // namespace intent
