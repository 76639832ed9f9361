#include "intent/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "intent/rng.hpp"

namespace intent {

using nlohmann::json;

std::string validate_track(const TrackAnnotation& t) {
  if (t.track_id.empty()) return "track_id empty";
  if (t.frames.empty()) return "frames empty";
  for (std::size_t i = 1; i < t.frames.size(); ++i)
    if (t.frames[i] != t.frames[i - 1] + 1) return "frames not consecutive";
  const std::size_t n = t.frames.size();
  if (t.boxes.size() != n || t.pose.size() != n || t.ego_speed.size() != n)
    return "per-frame field length mismatch";
  for (const Box& b : t.boxes) {
    if (!(b[0] < b[2] && b[1] < b[3])) return "box degenerate";
    if (b[0] < 0 || b[1] < 0 || b[2] > kImageWidth || b[3] > kImageHeight) return "box out of bounds";
  }
  for (const Pose& p : t.pose)
    for (double v : p)
      if (v < 0.0 || !std::isfinite(v)) return "pose value negative or non-finite";
  for (double v : t.ego_speed)
    if (!std::isfinite(v)) return "speed non-finite";
  if (t.label != 0 && t.label != 1) return "label not binary";
  if (!std::binary_search(t.frames.begin(), t.frames.end(), t.event_frame))
    return "event_frame outside frames";
  return {};
}

namespace {

TrackAnnotation track_from_json(const json& j) {
  TrackAnnotation t;
  t.track_id = j.at("track_id").get<std::string>();
  t.video_id = j.at("video_id").get<std::string>();
  t.frames = j.at("frames").get<std::vector<std::int64_t>>();
  for (const auto& b : j.at("boxes")) {
    if (b.size() != 4) throw ValidationError("box entry is not a 4-vector");
    t.boxes.push_back({b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()});
  }
  for (const auto& p : j.at("pose")) {
    if (p.size() != static_cast<std::size_t>(kPoseDim))
      throw ValidationError(msg("pose entry has ", p.size(), " values, expected ", kPoseDim));
    Pose pose{};
    for (std::size_t i = 0; i < pose.size(); ++i) pose[i] = p[i].get<double>();
    t.pose.push_back(pose);
  }
  t.ego_speed = j.at("ego_speed").get<std::vector<double>>();
  t.label = j.at("label").get<int>();
  t.event_frame = j.at("event_frame").get<std::int64_t>();
  return t;
}

}  // namespace

LoadResult load_annotations(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(msg("cannot open annotation file ", path));
  LoadResult result;
  std::string line;
  std::int64_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(msg(path, ":", lineno, ": malformed record: ", e.what()));
    }
    TrackAnnotation t;
    try {
      const int version = j.at("schema_version").get<int>();
      if (version != kAnnotationSchemaVersion)
        throw ParseError(msg(path, ":", lineno, ": schema_version ", version, ", this build reads ",
                             kAnnotationSchemaVersion));
      t = track_from_json(j);
    } catch (const ParseError&) {
      throw;
    } catch (const std::exception& e) {
      throw ParseError(msg(path, ":", lineno, ": malformed record: ", e.what()));
    }
    const std::string rule = validate_track(t);
    if (!rule.empty()) {
      result.diagnostics.push_back(msg(t.track_id.empty() ? "<unnamed>" : t.track_id, ": ", rule));
      continue;
    }
    result.tracks.push_back(std::move(t));
  }
  return result;
}

void save_annotations(const std::string& path, const std::vector<TrackAnnotation>& tracks) {
  std::ofstream out(path);
  if (!out) throw IoError(msg("cannot write annotation file ", path));
  for (const TrackAnnotation& t : tracks) {
    json j;
    j["schema_version"] = kAnnotationSchemaVersion;
    j["track_id"] = t.track_id;
    j["video_id"] = t.video_id;
    j["frames"] = t.frames;
    j["boxes"] = t.boxes;
    j["pose"] = t.pose;
    j["ego_speed"] = t.ego_speed;
    j["label"] = t.label;
    j["event_frame"] = t.event_frame;
    out << j.dump() << '\n';
  }
  if (!out) throw IoError(msg("write failed for ", path));
}

std::vector<ObservationWindow> extract_windows(const TrackAnnotation& track, const WindowParams& p) {
  if (p.stride < 1) throw ConfigError(msg("window stride ", p.stride, " must be >= 1"));
  if (p.obs_len < 1 || p.tte_min < 0 || p.tte_max < p.tte_min)
    throw ConfigError(msg("bad window params obs_len=", p.obs_len, " tte=[", p.tte_min, ",", p.tte_max, "]"));
  std::vector<ObservationWindow> out;
  const std::int64_t n = static_cast<std::int64_t>(track.frames.size());
  if (n < p.obs_len) return out;

  // tte decreases by one per start step, so the feasible starts are one
  // contiguous run; find its first element, then walk by stride.
  std::int64_t first = -1;
  for (std::int64_t s = 0; s + p.obs_len <= n; ++s) {
    const std::int64_t tte = track.event_frame - track.frames[s + p.obs_len - 1];
    if (tte <= p.tte_max) {
      if (tte >= p.tte_min) first = s;
      break;
    }
  }
  if (first < 0) return out;

  for (std::int64_t s = first; s + p.obs_len <= n; s += p.stride) {
    const std::int64_t tte = track.event_frame - track.frames[s + p.obs_len - 1];
    if (tte < p.tte_min) break;
    ObservationWindow w;
    w.track_id = track.track_id;
    w.video_id = track.video_id;
    w.start_frame = track.frames[s];
    w.frames.assign(track.frames.begin() + s, track.frames.begin() + s + p.obs_len);
    w.boxes.assign(track.boxes.begin() + s, track.boxes.begin() + s + p.obs_len);
    w.pose.assign(track.pose.begin() + s, track.pose.begin() + s + p.obs_len);
    w.ego_speed.assign(track.ego_speed.begin() + s, track.ego_speed.begin() + s + p.obs_len);
    w.tte = tte;
    w.label = track.label;
    out.push_back(std::move(w));
  }
  return out;
}

double compute_class_weight(const std::vector<ObservationWindow>& train_windows) {
  std::int64_t crossing = 0, non_crossing = 0;
  for (const auto& w : train_windows) (w.label ? crossing : non_crossing)++;
  if (crossing == 0)
    throw ConfigError("class weight undefined: training set has no crossing windows");
  if (non_crossing == 0)
    throw ConfigError("class weight degenerate: training set has no non-crossing windows");
  return static_cast<double>(non_crossing) / static_cast<double>(crossing);
}

DatasetSplit split_by_video(const std::vector<TrackAnnotation>& tracks,
                            const std::array<double, 3>& ratios, std::uint64_t seed,
                            const WindowParams& wp) {
  double sum = 0.0;
  for (double r : ratios) {
    if (r <= 0.0) throw ConfigError(msg("split ratio ", r, " must be positive"));
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError(msg("split ratios sum to ", sum, ", expected 1"));

  std::vector<std::string> videos;
  for (const auto& t : tracks) videos.push_back(t.video_id);
  std::sort(videos.begin(), videos.end());
  videos.erase(std::unique(videos.begin(), videos.end()), videos.end());
  const std::int64_t n = static_cast<std::int64_t>(videos.size());
  if (n < 3) throw ConfigError(msg("need at least 3 videos to form train/val/test, have ", n));

  RandomStream rng(seed);
  std::shuffle(videos.begin(), videos.end(), rng.engine());

  // largest-remainder apportionment, then guarantee one video per partition
  std::array<std::int64_t, 3> count{};
  std::array<double, 3> frac{};
  std::int64_t assigned = 0;
  for (int i = 0; i < 3; ++i) {
    const double quota = static_cast<double>(n) * ratios[i];
    count[i] = static_cast<std::int64_t>(std::floor(quota));
    frac[i] = quota - std::floor(quota);
    assigned += count[i];
  }
  std::array<int, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return frac[a] > frac[b]; });
  for (std::int64_t r = 0; r < n - assigned; ++r) count[order[r % 3]]++;
  for (int i = 0; i < 3; ++i) {
    while (count[i] == 0) {
      const int donor = static_cast<int>(std::max_element(count.begin(), count.end()) - count.begin());
      count[donor]--;
      count[i]++;
    }
  }

  DatasetSplit split;
  std::array<std::vector<ObservationWindow>*, 3> parts{&split.train, &split.val, &split.test};
  std::unordered_map<std::string, int> part_of_video;
  std::int64_t cursor = 0;
  for (int i = 0; i < 3; ++i)
    for (std::int64_t k = 0; k < count[i]; ++k) part_of_video[videos[static_cast<std::size_t>(cursor++)]] = i;

  for (const auto& t : tracks) {
    auto windows = extract_windows(t, wp);
    auto& dst = *parts[static_cast<std::size_t>(part_of_video.at(t.video_id))];
    dst.insert(dst.end(), std::make_move_iterator(windows.begin()), std::make_move_iterator(windows.end()));
  }
  return split;
}

namespace {

std::string padded_id(char prefix, std::int64_t i) {
  std::ostringstream os;
  os << prefix << std::setw(4) << std::setfill('0') << i;
  return os.str();
}

double clamp(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

}  // namespace

std::vector<TrackAnnotation> generate_synthetic(std::int64_t n_tracks, const SignalSpec& spec,
                                                std::uint64_t seed) {
  if (n_tracks < 1) throw ConfigError(msg("n_tracks ", n_tracks, " must be >= 1"));
  if (spec.crossing_fraction < 0.0 || spec.crossing_fraction > 1.0)
    throw ConfigError(msg("crossing_fraction ", spec.crossing_fraction, " outside [0,1]"));
  if (spec.track_len < 2) throw ConfigError(msg("track_len ", spec.track_len, " too short"));

  const std::int64_t n_cross = std::llround(spec.crossing_fraction * static_cast<double>(n_tracks));
  RandomStream root(seed);
  std::vector<TrackAnnotation> tracks;
  tracks.reserve(static_cast<std::size_t>(n_tracks));

  for (std::int64_t i = 0; i < n_tracks; ++i) {
    // evenly interleaved exact label counts
    const std::int64_t before = i * n_cross / n_tracks;
    const std::int64_t after = (i + 1) * n_cross / n_tracks;
    const int label = after > before ? 1 : 0;

    RandomStream rng = root.fork(static_cast<std::uint64_t>(i));
    const std::int64_t len = spec.track_len;
    TrackAnnotation t;
    t.track_id = padded_id('t', i);
    t.video_id = padded_id('v', i);
    t.label = label;
    t.event_frame = len - 1;
    t.frames.resize(static_cast<std::size_t>(len));
    for (std::int64_t f = 0; f < len; ++f) t.frames[static_cast<std::size_t>(f)] = f;

    const double v_base = rng.uniform(30.0, 50.0);
    const double box_w = rng.uniform(50.0, 100.0);
    const double box_h = rng.uniform(120.0, 240.0);
    double cx = rng.uniform(200.0, 1720.0);
    double cy = rng.uniform(300.0, 780.0);

    for (std::int64_t f = 0; f < len; ++f) {
      const double progress = static_cast<double>(f) / static_cast<double>(len - 1);

      const double speed_noise = rng.normal(0.0, spec.speed_noise);
      const double decel = (spec.speed_signal && label) ? 1.0 - 0.8 * progress : 1.0;
      t.ego_speed.push_back(std::max(0.0, v_base * decel + speed_noise));

      const double jx = rng.normal(0.0, 1.5);
      const double jy = rng.normal(0.0, 1.0);
      if (spec.box_signal && label) cx += (kImageWidth / 2.0 - cx) * 0.02;
      cx = clamp(cx + jx, box_w / 2.0, kImageWidth - box_w / 2.0);
      cy = clamp(cy + jy, box_h / 2.0, kImageHeight - box_h / 2.0);
      t.boxes.push_back({cx - box_w / 2.0, cy - box_h / 2.0, cx + box_w / 2.0, cy + box_h / 2.0});

      Pose p{};
      const double spread = (spec.pose_signal && label) ? 1.0 + 0.5 * progress : 1.0;
      for (int k = 0; k < 18; ++k) {
        const double off_x = rng.uniform(-0.4, 0.4) * box_w * spread;
        const double off_y = (static_cast<double>(k) / 17.0 + rng.uniform(-0.03, 0.03)) * box_h;
        const bool missing = rng.bernoulli(0.1);
        if (!missing) {
          p[static_cast<std::size_t>(2 * k)] = clamp(cx + off_x, 0.0, kImageWidth);
          p[static_cast<std::size_t>(2 * k + 1)] = clamp(cy - box_h / 2.0 + off_y, 0.0, kImageHeight);
        }
      }
      t.pose.push_back(p);
    }

    const std::string rule = validate_track(t);
    if (!rule.empty()) throw Error(msg("synthetic generator produced an invalid track: ", rule));
    tracks.push_back(std::move(t));
  }
  return tracks;
}

}  // namespace intent
