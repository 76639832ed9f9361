#include "intent/frames.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "intent/hash.hpp"
#include "intent/rng.hpp"

namespace intent {

namespace fs = std::filesystem;

Image read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(msg("cannot open image ", path));
  std::string magic;
  in >> magic;
  if (magic != "P6") throw ParseError(msg(path, ": not a binary PPM (magic '", magic, "')"));
  auto next_token = [&]() -> std::int64_t {
    // PPM allows '#' comments between header tokens
    for (;;) {
      in >> std::ws;
      if (in.peek() == '#') {
        std::string comment;
        std::getline(in, comment);
        continue;
      }
      std::int64_t v = -1;
      if (!(in >> v)) throw ParseError(msg(path, ": truncated PPM header"));
      return v;
    }
  };
  const std::int64_t w = next_token();
  const std::int64_t h = next_token();
  const std::int64_t maxval = next_token();
  if (w <= 0 || h <= 0) throw ParseError(msg(path, ": bad dimensions ", w, "x", h));
  if (maxval != 255) throw ParseError(msg(path, ": unsupported maxval ", maxval));
  in.get();  // single whitespace byte before the raster
  Image img(w, h);
  in.read(reinterpret_cast<char*>(img.rgb.data()), static_cast<std::streamsize>(img.rgb.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.rgb.size()))
    throw ParseError(msg(path, ": truncated raster, expected ", img.rgb.size(), " bytes"));
  return img;
}

void write_ppm(const std::string& path, const Image& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(msg("cannot write image ", path));
  out << "P6\n" << img.width << ' ' << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.rgb.data()), static_cast<std::streamsize>(img.rgb.size()));
  if (!out) throw IoError(msg("write failed for ", path));
}

DirectoryFrameSource::DirectoryFrameSource(std::string root, std::size_t cache_capacity)
    : root_(std::move(root)), cache_capacity_(cache_capacity) {}

std::string DirectoryFrameSource::frame_path(const std::string& root, const std::string& video_id,
                                             std::int64_t frame_index) {
  std::ostringstream os;
  os << root << '/' << video_id << '/' << std::setw(5) << std::setfill('0') << frame_index << ".ppm";
  return os.str();
}

Image DirectoryFrameSource::frame(const std::string& video_id, std::int64_t frame_index) {
  const std::string path = frame_path(root_, video_id, frame_index);
  if (auto it = cache_.find(path); it != cache_.end()) return it->second;
  if (!fs::exists(path))
    throw IoError(msg("missing frame (video ", video_id, ", frame ", frame_index, "): ", path));
  Image img = read_ppm(path);
  if (cache_.size() >= cache_capacity_ && !cache_order_.empty()) {
    cache_.erase(cache_order_.front());
    cache_order_.erase(cache_order_.begin());
  }
  cache_.emplace(path, img);
  cache_order_.push_back(path);
  return img;
}

namespace {

// Deterministic per-pixel value, independent of evaluation order.
inline std::uint8_t noise_byte(std::uint64_t seed, std::uint64_t video_hash, std::int64_t frame,
                               std::int64_t pixel) {
  const std::uint64_t h = splitmix64(seed ^ video_hash ^ (static_cast<std::uint64_t>(frame) * 0x9e3779b97f4a7c15ULL) ^
                                     static_cast<std::uint64_t>(pixel));
  return static_cast<std::uint8_t>(h & 0x3f);  // dim gray background
}

struct RenderBox {
  std::int64_t x0, x1, y0, y1;  // half-open pixel rect
  int label;
};

void paint(Image& img, const RenderBox& rb, bool label_texture) {
  // stripes every 4 frame pixels; orientation encodes the label when enabled
  const bool vertical = label_texture ? rb.label == 1 : true;
  for (std::int64_t y = rb.y0; y < rb.y1; ++y) {
    for (std::int64_t x = rb.x0; x < rb.x1; ++x) {
      const std::int64_t band = vertical ? x : y;
      const bool bright = (band / 4) % 2 == 0;
      img.at(y, x, 0) = bright ? 220 : 70;
      img.at(y, x, 1) = bright ? 210 : 60;
      img.at(y, x, 2) = bright ? 80 : 160;
    }
  }
}

Image render_frame(std::uint64_t seed, const std::string& video_id, std::int64_t frame_index,
                   const std::vector<RenderBox>& boxes, bool label_texture, std::int64_t w,
                   std::int64_t h) {
  Image img(w, h);
  const std::uint64_t vh = fnv1a(video_id);
  for (std::int64_t y = 0; y < h; ++y) {
    for (std::int64_t x = 0; x < w; ++x) {
      const std::uint8_t g = noise_byte(seed, vh, frame_index, y * w + x);
      img.at(y, x, 0) = g;
      img.at(y, x, 1) = g;
      img.at(y, x, 2) = g;
    }
  }
  for (const RenderBox& rb : boxes) paint(img, rb, label_texture);
  return img;
}

RenderBox to_pixels(const Box& b, int label, std::int64_t w, std::int64_t h) {
  const double sx = static_cast<double>(w) / kImageWidth;
  const double sy = static_cast<double>(h) / kImageHeight;
  RenderBox rb;
  rb.x0 = std::clamp<std::int64_t>(static_cast<std::int64_t>(std::floor(b[0] * sx)), 0, w);
  rb.x1 = std::clamp<std::int64_t>(static_cast<std::int64_t>(std::ceil(b[2] * sx)), 0, w);
  rb.y0 = std::clamp<std::int64_t>(static_cast<std::int64_t>(std::floor(b[1] * sy)), 0, h);
  rb.y1 = std::clamp<std::int64_t>(static_cast<std::int64_t>(std::ceil(b[3] * sy)), 0, h);
  rb.label = label;
  return rb;
}

}  // namespace

SyntheticFrameSource::SyntheticFrameSource(const std::vector<TrackAnnotation>& tracks,
                                           std::uint64_t seed, bool label_texture,
                                           std::int64_t frame_width, std::int64_t frame_height)
    : seed_(seed), label_texture_(label_texture), width_(frame_width), height_(frame_height) {
  for (const auto& t : tracks) {
    PaintedTrack pt;
    pt.label = t.label;
    pt.first_frame = t.frames.empty() ? 0 : t.frames.front();
    pt.boxes = t.boxes;
    by_video_[t.video_id].push_back(std::move(pt));
  }
}

Image SyntheticFrameSource::frame(const std::string& video_id, std::int64_t frame_index) {
  std::vector<RenderBox> boxes;
  if (auto it = by_video_.find(video_id); it != by_video_.end()) {
    for (const PaintedTrack& pt : it->second) {
      const std::int64_t rel = frame_index - pt.first_frame;
      if (rel >= 0 && rel < static_cast<std::int64_t>(pt.boxes.size()))
        boxes.push_back(to_pixels(pt.boxes[static_cast<std::size_t>(rel)], pt.label, width_, height_));
    }
  }
  return render_frame(seed_, video_id, frame_index, boxes, label_texture_, width_, height_);
}

void write_synthetic_frames(const std::string& root, const std::vector<TrackAnnotation>& tracks,
                            std::uint64_t seed, bool label_texture, std::int64_t frame_width,
                            std::int64_t frame_height) {
  SyntheticFrameSource source(tracks, seed, label_texture, frame_width, frame_height);
  for (const auto& t : tracks) {
    const fs::path dir = fs::path(root) / t.video_id;
    fs::create_directories(dir);
    for (std::int64_t f : t.frames) {
      const std::string path = DirectoryFrameSource::frame_path(root, t.video_id, f);
      write_ppm(path, source.frame(t.video_id, f));
    }
  }
}

}  // namespace intent
