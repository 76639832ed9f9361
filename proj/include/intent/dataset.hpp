#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "intent/error.hpp"

namespace intent {

constexpr std::int64_t kPoseDim = 36;
constexpr double kImageWidth = 1920.0;
constexpr double kImageHeight = 1080.0;
constexpr int kAnnotationSchemaVersion = 1;

using Box = std::array<double, 4>;  // x1, y1, x2, y2 in pixels, origin top-left
using Pose = std::array<double, kPoseDim>;  // 18 keypoints x (x, y); 0.0 marks missing

// One pedestrian track at 30 fps. Coordinates live in a fixed 1920x1080
// annotation space regardless of the stored frame resolution.
struct TrackAnnotation {
  std::string track_id;
  std::string video_id;
  std::vector<std::int64_t> frames;  // strictly increasing, step 1
  std::vector<Box> boxes;            // one per frame
  std::vector<Pose> pose;            // one per frame
  std::vector<double> ego_speed;     // km/h, one per frame
  int label = 0;                     // 1 = crossing
  std::int64_t event_frame = 0;      // crossing onset, or last observable frame
};

// Returns an empty string for a valid track, else the violated rule.
std::string validate_track(const TrackAnnotation& t);

struct ObservationWindow {
  std::string track_id;
  std::string video_id;
  std::int64_t start_frame = 0;
  std::vector<std::int64_t> frames;
  std::vector<Box> boxes;
  std::vector<Pose> pose;
  std::vector<double> ego_speed;
  std::int64_t tte = 0;  // event_frame minus last observed frame
  int label = 0;
};

struct WindowParams {
  std::int64_t obs_len = 16;
  std::int64_t tte_min = 30;
  std::int64_t tte_max = 60;
  std::int64_t stride = 1;

  bool operator==(const WindowParams&) const = default;
};

struct DatasetSplit {
  std::vector<ObservationWindow> train;
  std::vector<ObservationWindow> val;
  std::vector<ObservationWindow> test;
};

struct LoadResult {
  std::vector<TrackAnnotation> tracks;
  // one entry per rejected track: "<track_id>: <rule>"
  std::vector<std::string> diagnostics;
};

// One track per line, schema_version field mandatory. Malformed lines throw;
// tracks breaking invariants are skipped with a diagnostic.
LoadResult load_annotations(const std::string& path);
void save_annotations(const std::string& path, const std::vector<TrackAnnotation>& tracks);

std::vector<ObservationWindow> extract_windows(const TrackAnnotation& track, const WindowParams& p);

// W_c = (non-crossing count) / (crossing count) over training windows
double compute_class_weight(const std::vector<ObservationWindow>& train_windows);

// Assigns whole videos to partitions by shuffled largest-remainder
// apportionment of the ratios, then extracts windows per track.
DatasetSplit split_by_video(const std::vector<TrackAnnotation>& tracks,
                            const std::array<double, 3>& ratios, std::uint64_t seed,
                            const WindowParams& wp);

// Which channels of the generated data carry label-correlated signal.
struct SignalSpec {
  double crossing_fraction = 0.5;
  std::int64_t track_len = 80;
  bool speed_signal = true;   // crossing tracks decelerate
  bool box_signal = false;    // crossing boxes drift toward image center
  bool pose_signal = false;   // crossing poses widen stance over time
  bool image_signal = true;   // crop texture orientation encodes the label
  double speed_noise = 0.8;   // km/h, per-frame gaussian jitter
};

std::vector<TrackAnnotation> generate_synthetic(std::int64_t n_tracks, const SignalSpec& spec,
                                                std::uint64_t seed);

}  // namespace intent
