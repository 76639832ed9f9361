#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "intent/ablation.hpp"
#include "intent/checkpoint.hpp"
#include "intent/config_io.hpp"
#include "intent/dataset.hpp"
#include "intent/frames.hpp"
#include "intent/hash.hpp"
#include "intent/metrics.hpp"
#include "intent/training.hpp"

namespace fs = std::filesystem;
using namespace intent;

namespace {

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

std::uint64_t file_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(msg("cannot open ", path, " for hashing"));
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string bytes = buf.str();
  return fnv1a_bytes(bytes.data(), bytes.size());
}

// cheap fingerprint of a frames tree: sorted relative paths and sizes
std::uint64_t tree_hash(const std::string& root) {
  std::vector<std::string> entries;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    entries.push_back(msg(fs::relative(e.path(), root).generic_string(), ":", e.file_size()));
  }
  std::sort(entries.begin(), entries.end());
  std::uint64_t h = 1469598103934665603ULL;
  for (const std::string& s : entries) h = fnv1a_bytes(s.data(), s.size()) ^ (h * 1099511628211ULL);
  return h;
}

void refuse_existing(const fs::path& p, bool force) {
  if (!force && fs::exists(p))
    throw ConfigError(msg(p.string(), " already exists; pass --force to overwrite"));
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError(msg("cannot write ", path.string()));
  os << text;
  if (!os) throw IoError(msg("write failed for ", path.string()));
}

Json schema_versions() {
  Json j;
  j["annotation"] = kAnnotationSchemaVersion;
  j["checkpoint"] = kCheckpointVersion;
  return j;
}

struct LoadedData {
  std::vector<TrackAnnotation> tracks;
  std::string annotations_path;
  std::uint64_t annotations_hash = 0;
};

LoadedData load_data(const std::string& data_dir) {
  LoadedData d;
  d.annotations_path = (fs::path(data_dir) / "annotations.jsonl").string();
  const LoadResult lr = load_annotations(d.annotations_path);
  for (const std::string& diag : lr.diagnostics) std::cerr << "skipped track: " << diag << "\n";
  if (lr.tracks.empty()) throw ValidationError(msg(d.annotations_path, " holds no usable tracks"));
  d.tracks = lr.tracks;
  d.annotations_hash = file_hash(d.annotations_path);
  return d;
}

std::string resolve_frames_root(const ExperimentConfig& cfg) {
  return cfg.frames_root.empty() ? (fs::path(cfg.data_dir) / "frames").string() : cfg.frames_root;
}

// precedence: profile preset, then config file, then explicit flags
struct CommonTrainArgs {
  std::string data_dir, out_dir, profile = "synthetic", config_file, mask, frames_root;
  std::int64_t seed = -1;
  std::int64_t epochs = -1;
  bool force = false;

  ExperimentConfig resolve() const {
    const Profile preset = lookup_profile(profile);
    ExperimentConfig base;
    base.train = preset.train;
    base.model.mask = parse_mask(preset.default_mask);
    ExperimentConfig cfg =
        config_file.empty() ? base : load_experiment_config(config_file, base);
    if (!data_dir.empty()) cfg.data_dir = data_dir;
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (!frames_root.empty()) cfg.frames_root = frames_root;
    if (!mask.empty()) cfg.model.mask = parse_mask(mask);
    if (seed >= 0) cfg.train.seed = static_cast<std::uint64_t>(seed);
    if (epochs >= 0) cfg.train.epochs = epochs;
    if (cfg.data_dir.empty()) throw ConfigError("no data directory; pass --data or set data_dir");
    if (cfg.out_dir.empty()) throw ConfigError("no output directory; pass --out or set out_dir");
    if (cfg.model.prep.obs_len != cfg.windows.obs_len)
      throw ConfigError(msg("windows.obs_len ", cfg.windows.obs_len,
                            " disagrees with prep.obs_len ", cfg.model.prep.obs_len));
    return cfg;
  }
};

void add_common_train_flags(CLI::App* cmd, CommonTrainArgs& args) {
  cmd->add_option("--data", args.data_dir, "dataset directory (annotations.jsonl [+ frames/])");
  cmd->add_option("--out", args.out_dir, "output directory for run artifacts");
  cmd->add_option("--profile", args.profile,
                  "hyperparameter preset: pie, jaad_beh, jaad_all, synthetic")
      ->capture_default_str();
  cmd->add_option("--config", args.config_file, "JSON experiment config, overrides the profile");
  cmd->add_option("--mask", args.mask, "feature mask letters, e.g. IBPS or S");
  cmd->add_option("--seed", args.seed, "training seed");
  cmd->add_option("--epochs", args.epochs, "epoch count override");
  cmd->add_option("--frames-root", args.frames_root, "frame image root")
      ->envname("INTENT_FRAMES_ROOT");
  cmd->add_flag("--force", args.force, "overwrite existing artifacts");
}

Json split_summary(const DatasetSplit& split) {
  Json j;
  j["train_windows"] = split.train.size();
  j["val_windows"] = split.val.size();
  j["test_windows"] = split.test.size();
  return j;
}

int cmd_synth(const std::string& out_dir, std::int64_t tracks, SignalSpec spec, std::uint64_t seed,
              bool with_frames, bool force) {
  fs::create_directories(out_dir);
  const fs::path annotations = fs::path(out_dir) / "annotations.jsonl";
  const fs::path frames_dir = fs::path(out_dir) / "frames";
  const fs::path manifest_path = fs::path(out_dir) / "manifest.json";
  refuse_existing(annotations, force);
  if (with_frames) refuse_existing(frames_dir, force);

  const std::vector<TrackAnnotation> data = generate_synthetic(tracks, spec, seed);
  save_annotations(annotations.string(), data);
  if (with_frames) {
    fs::remove_all(frames_dir);
    write_synthetic_frames(frames_dir.string(), data, seed, spec.image_signal);
  }

  std::vector<ObservationWindow> windows;
  for (const TrackAnnotation& t : data) {
    const auto w = extract_windows(t, WindowParams{});
    windows.insert(windows.end(), w.begin(), w.end());
  }
  std::int64_t crossing = 0;
  for (const ObservationWindow& w : windows) crossing += w.label;
  const std::int64_t non_crossing = static_cast<std::int64_t>(windows.size()) - crossing;

  Json manifest;
  manifest["command"] = "synth";
  Json cfg;
  cfg["tracks"] = tracks;
  cfg["crossing_fraction"] = spec.crossing_fraction;
  cfg["track_len"] = spec.track_len;
  cfg["speed_signal"] = spec.speed_signal;
  cfg["box_signal"] = spec.box_signal;
  cfg["pose_signal"] = spec.pose_signal;
  cfg["image_signal"] = spec.image_signal;
  cfg["speed_noise"] = spec.speed_noise;
  cfg["frames"] = with_frames;
  manifest["config"] = cfg;
  manifest["seed"] = seed;
  manifest["schema_versions"] = schema_versions();
  Json outputs;
  outputs["annotations"] = Json{{"path", "annotations.jsonl"},
                                {"fnv1a", hex64(file_hash(annotations.string()))}};
  if (with_frames)
    outputs["frames"] = Json{{"path", "frames"}, {"fnv1a", hex64(tree_hash(frames_dir.string()))}};
  manifest["outputs"] = outputs;
  write_text(manifest_path, manifest.dump(2) + "\n");

  std::cout << "tracks: " << data.size() << "\n"
            << "windows: " << windows.size() << " (crossing " << crossing << ", non-crossing "
            << non_crossing << ")\n";
  if (crossing > 0)
    std::cout << "class_weight: " << static_cast<double>(non_crossing) / crossing << "\n";
  return 0;
}

int cmd_train(const CommonTrainArgs& args) {
  const ExperimentConfig cfg = args.resolve();
  fs::create_directories(cfg.out_dir);
  const fs::path out(cfg.out_dir);
  refuse_existing(out / "history.jsonl", args.force);
  refuse_existing(out / "timing.json", args.force);
  refuse_existing(out / "manifest.json", args.force);
  for (const auto& e : fs::directory_iterator(out))
    if (e.path().filename().string().rfind("checkpoint_", 0) == 0)
      refuse_existing(e.path(), args.force);

  const LoadedData data = load_data(cfg.data_dir);
  const DatasetSplit split = split_by_video(data.tracks, cfg.split_ratios, cfg.split_seed, cfg.windows);
  if (split.train.empty() || split.val.empty())
    throw ValidationError("the split left train or val empty; add tracks or change ratios");

  std::unique_ptr<DirectoryFrameSource> frames;
  if (cfg.model.mask.images)
    frames = std::make_unique<DirectoryFrameSource>(resolve_frames_root(cfg));

  IntentModel model(cfg.model, cfg.train.seed);
  const TrainResult result = train(model, cfg.train, split.train, split.val, frames.get());

  std::ostringstream history;
  write_history(history, result.history);
  write_text(out / "history.jsonl", history.str());

  Json timing;
  timing["train_seconds"] = result.train_seconds;
  write_text(out / "timing.json", timing.dump(2) + "\n");

  CheckpointMeta meta;
  meta.model = cfg.model;
  meta.stats = result.stats;
  meta.class_weight = result.class_weight;
  meta.profile = cfg.train.profile;
  meta.seed = cfg.train.seed;
  meta.epoch = result.best_epoch;
  meta.split_ratios = cfg.split_ratios;
  meta.split_seed = cfg.split_seed;
  meta.windows = cfg.windows;
  const std::string ckpt_name =
      msg("checkpoint_", cfg.train.profile, "_seed", cfg.train.seed, "_epoch", result.best_epoch,
          ".bin");
  save_checkpoint((out / ckpt_name).string(), meta, model.named_parameters());

  Json manifest;
  manifest["command"] = "train";
  manifest["config"] = experiment_config_to_json(cfg);
  manifest["seed"] = cfg.train.seed;
  manifest["schema_versions"] = schema_versions();
  Json inputs;
  inputs["annotations"] =
      Json{{"path", data.annotations_path}, {"fnv1a", hex64(data.annotations_hash)}};
  if (frames) {
    const std::string root = resolve_frames_root(cfg);
    inputs["frames"] = Json{{"path", root}, {"fnv1a", hex64(tree_hash(root))}};
  }
  manifest["inputs"] = inputs;
  manifest["split"] = split_summary(split);
  manifest["artifacts"] = Json::array({"history.jsonl", "timing.json", ckpt_name});
  write_text(out / "manifest.json", manifest.dump(2) + "\n");

  const EpochStats& last = result.history.back();
  std::cout << "best_epoch: " << result.best_epoch << "\n"
            << "class_weight: " << result.class_weight << "\n"
            << "final: " << history_line(last) << "\n"
            << "checkpoint: " << ckpt_name << "\n";
  return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& data_dir, const std::string& out_dir,
             const std::string& split_name, const std::string& frames_root, double threshold,
             bool force) {
  const LoadedCheckpoint ckpt = load_checkpoint(ckpt_path);
  const std::unique_ptr<IntentModel> model = model_from_checkpoint(ckpt);

  fs::create_directories(out_dir);
  const fs::path out(out_dir);
  refuse_existing(out / "metrics.json", force);
  refuse_existing(out / "perf.json", force);
  refuse_existing(out / "manifest.json", force);

  const LoadedData data = load_data(data_dir);
  const DatasetSplit split =
      split_by_video(data.tracks, ckpt.meta.split_ratios, ckpt.meta.split_seed, ckpt.meta.windows);
  const std::vector<ObservationWindow>* windows = nullptr;
  if (split_name == "train")
    windows = &split.train;
  else if (split_name == "val")
    windows = &split.val;
  else if (split_name == "test")
    windows = &split.test;
  else
    throw ConfigError(msg("unknown split '", split_name, "', expected train, val or test"));
  if (windows->empty()) throw ValidationError(msg("split '", split_name, "' holds no windows"));

  std::unique_ptr<DirectoryFrameSource> frames;
  if (ckpt.meta.model.mask.images) {
    const std::string root =
        frames_root.empty() ? (fs::path(data_dir) / "frames").string() : frames_root;
    frames = std::make_unique<DirectoryFrameSource>(root);
  }

  const auto t0 = std::chrono::steady_clock::now();
  MetricsReport report =
      evaluate(*model, *windows, ckpt.meta.stats, frames.get(), threshold);
  const double eval_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  std::vector<FeatureBundle> probe;
  for (std::size_t i = 0; i < std::min<std::size_t>(windows->size(), 8); ++i)
    probe.push_back(assemble_bundle((*windows)[i], ckpt.meta.stats, ckpt.meta.model.mask,
                                    ckpt.meta.model.prep, frames.get()));
  report.sequences_per_second = measure_throughput(*model, probe, 2, 9);

  Json metrics;
  metrics["split"] = split_name;
  metrics["threshold"] = threshold;
  metrics["accuracy"] = report.accuracy;
  metrics["auc"] = report.auc;
  metrics["f1"] = report.f1;
  metrics["tp"] = report.tp;
  metrics["fp"] = report.fp;
  metrics["tn"] = report.tn;
  metrics["fn"] = report.fn;
  metrics["n_samples"] = report.n_samples;
  metrics["parameter_count"] = report.parameter_count;
  metrics["config_fingerprint"] = hex64(report.config_fingerprint);
  write_text(out / "metrics.json", metrics.dump(2) + "\n");

  Json perf;
  perf["sequences_per_second"] = report.sequences_per_second;
  perf["eval_seconds"] = eval_seconds;
  write_text(out / "perf.json", perf.dump(2) + "\n");

  Json manifest;
  manifest["command"] = "eval";
  manifest["checkpoint"] = ckpt_path;
  manifest["split"] = split_name;
  manifest["seed"] = ckpt.meta.seed;
  manifest["schema_versions"] = schema_versions();
  Json inputs;
  inputs["annotations"] =
      Json{{"path", data.annotations_path}, {"fnv1a", hex64(data.annotations_hash)}};
  inputs["checkpoint"] = Json{{"path", ckpt_path}, {"fnv1a", hex64(file_hash(ckpt_path))}};
  manifest["inputs"] = inputs;
  manifest["artifacts"] = Json::array({"metrics.json", "perf.json"});
  write_text(out / "manifest.json", manifest.dump(2) + "\n");

  std::cout << "accuracy: " << report.accuracy << "\nauc: " << report.auc
            << "\nf1: " << report.f1 << "\nsequences_per_second: " << report.sequences_per_second
            << "\n";
  return 0;
}

int cmd_ablate(const CommonTrainArgs& args, const std::string& masks_arg, std::int64_t n_seeds) {
  ExperimentConfig cfg = args.resolve();
  if (n_seeds < 1) throw ConfigError(msg("seed count ", n_seeds, " must be positive"));
  fs::create_directories(cfg.out_dir);
  const fs::path out(cfg.out_dir);
  refuse_existing(out / "ablation.tsv", args.force);
  refuse_existing(out / "manifest.json", args.force);

  std::vector<FeatureMask> masks;
  if (masks_arg.empty()) {
    masks = default_ablation_masks();
  } else {
    std::stringstream ss(masks_arg);
    std::string token;
    while (std::getline(ss, token, ',')) {
      token.erase(0, token.find_first_not_of(" \t"));
      token.erase(token.find_last_not_of(" \t") + 1);
      if (!token.empty()) masks.push_back(parse_mask(token));
    }
    if (masks.empty()) throw ConfigError("--masks named no usable mask");
  }

  std::vector<std::uint64_t> seeds;
  for (std::int64_t i = 0; i < n_seeds; ++i) seeds.push_back(cfg.train.seed + static_cast<std::uint64_t>(i));

  const LoadedData data = load_data(cfg.data_dir);
  const DatasetSplit split = split_by_video(data.tracks, cfg.split_ratios, cfg.split_seed, cfg.windows);

  std::unique_ptr<DirectoryFrameSource> frames;
  const bool any_images =
      std::any_of(masks.begin(), masks.end(), [](const FeatureMask& m) { return m.images; });
  if (any_images) frames = std::make_unique<DirectoryFrameSource>(resolve_frames_root(cfg));

  const std::vector<AblationRow> rows =
      run_ablation(cfg.model, cfg.train, split, frames.get(), masks, seeds);

  std::ostringstream table;
  write_ablation_table(table, rows);
  write_text(out / "ablation.tsv", table.str());

  Json manifest;
  manifest["command"] = "ablate";
  manifest["config"] = experiment_config_to_json(cfg);
  Json seed_list = Json::array();
  for (std::uint64_t s : seeds) seed_list.push_back(s);
  manifest["seeds"] = seed_list;
  Json mask_list = Json::array();
  for (const FeatureMask& m : masks) mask_list.push_back(m.token());
  manifest["masks"] = mask_list;
  manifest["schema_versions"] = schema_versions();
  Json inputs;
  inputs["annotations"] =
      Json{{"path", data.annotations_path}, {"fnv1a", hex64(data.annotations_hash)}};
  if (frames) {
    const std::string root = resolve_frames_root(cfg);
    inputs["frames"] = Json{{"path", root}, {"fnv1a", hex64(tree_hash(root))}};
  }
  manifest["inputs"] = inputs;
  manifest["split"] = split_summary(split);
  manifest["artifacts"] = Json::array({"ablation.tsv"});
  write_text(out / "manifest.json", manifest.dump(2) + "\n");

  std::cout << table.str();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pedestrian crossing anticipation: data, training, evaluation, ablation"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic labelled dataset");
  std::string synth_out;
  std::int64_t synth_tracks = 40;
  std::int64_t synth_seed = 7;
  bool synth_no_frames = false, synth_force = false;
  SignalSpec spec;
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--tracks", synth_tracks, "number of tracks")->capture_default_str();
  synth->add_option("--seed", synth_seed, "generator seed")->capture_default_str();
  synth->add_option("--crossing-fraction", spec.crossing_fraction, "fraction of crossing tracks")
      ->capture_default_str();
  synth->add_option("--track-len", spec.track_len, "frames per track")->capture_default_str();
  synth->add_option("--speed-noise", spec.speed_noise, "per-frame speed jitter (km/h)")
      ->capture_default_str();
  synth->add_flag("!--no-speed-signal", spec.speed_signal, "drop the deceleration cue");
  synth->add_flag("--box-signal", spec.box_signal, "crossing boxes drift toward the center");
  synth->add_flag("--pose-signal", spec.pose_signal, "crossing poses widen over time");
  synth->add_flag("!--no-image-signal", spec.image_signal, "drop the texture-orientation cue");
  synth->add_flag("--no-frames", synth_no_frames, "skip writing frame images");
  synth->add_flag("--force", synth_force, "overwrite existing artifacts");

  // train
  auto* train_cmd = app.add_subcommand("train", "train a model and write a checkpoint");
  CommonTrainArgs train_args;
  add_common_train_flags(train_cmd, train_args);

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a data split");
  std::string eval_ckpt, eval_data, eval_out, eval_split = "test", eval_frames;
  double eval_threshold = 0.5;
  bool eval_force = false;
  eval_cmd->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
  eval_cmd->add_option("--data", eval_data, "dataset directory")->required();
  eval_cmd->add_option("--out", eval_out, "output directory")->required();
  eval_cmd->add_option("--split", eval_split, "train, val or test")->capture_default_str();
  eval_cmd->add_option("--threshold", eval_threshold, "decision threshold on the probability")
      ->capture_default_str();
  eval_cmd->add_option("--frames-root", eval_frames, "frame image root")
      ->envname("INTENT_FRAMES_ROOT");
  eval_cmd->add_flag("--force", eval_force, "overwrite existing artifacts");

  // ablate
  auto* ablate_cmd = app.add_subcommand("ablate", "input-importance sweep over feature masks");
  CommonTrainArgs ablate_args;
  std::string ablate_masks;
  std::int64_t ablate_seeds = 3;
  add_common_train_flags(ablate_cmd, ablate_args);
  ablate_cmd->add_option("--masks", ablate_masks,
                         "comma-separated mask tokens, e.g. S,P,IB (default: all 15)");
  ablate_cmd->add_option("--seeds", ablate_seeds, "number of seeds per mask")
      ->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed())
      return cmd_synth(synth_out, synth_tracks, spec, static_cast<std::uint64_t>(synth_seed),
                       !synth_no_frames, synth_force);
    if (train_cmd->parsed()) return cmd_train(train_args);
    if (eval_cmd->parsed())
      return cmd_eval(eval_ckpt, eval_data, eval_out, eval_split, eval_frames, eval_threshold,
                      eval_force);
    if (ablate_cmd->parsed()) return cmd_ablate(ablate_args, ablate_masks, ablate_seeds);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
