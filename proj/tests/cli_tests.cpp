#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

// Drives the installed binary as a subprocess; INTENT_CLI_PATH comes from
// the build system.

namespace fs = std::filesystem;

namespace {

const fs::path kBase = fs::temp_directory_path() / "intent_cli_tests";

struct RunResult {
  int status = -1;
  std::string output;  // stdout and stderr interleaved
};

RunResult run(const std::string& args) {
  static int counter = 0;
  const fs::path capture = kBase / ("capture_" + std::to_string(counter++) + ".txt");
  fs::create_directories(kBase);
  const std::string cmd =
      std::string(INTENT_CLI_PATH) + " " + args + " > " + capture.string() + " 2>&1";
  RunResult r;
  r.status = std::system(cmd.c_str());
  std::ifstream in(capture);
  r.output.assign(std::istreambuf_iterator<char>(in), {});
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

void write_file(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = kBase / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Small model and coarse window stride so subprocess training stays quick.
fs::path tiny_config(std::int64_t epochs) {
  const fs::path p = kBase / ("tiny_config_" + std::to_string(epochs) + ".json");
  write_file(p, R"({
  "model": {
    "video": {"stage_channels": [8, 12], "input_hw": 16, "feature_dim": 8},
    "seq": {"d_model": 8, "n_layers": 1, "n_heads": 2, "ffn_dim": 16, "out_dim": 8},
    "fusion": {"hidden": 16},
    "prep": {"crop_height": 16, "crop_width": 16}
  },
  "train": {"epochs": )" + std::to_string(epochs) + R"(, "batch_size": 16},
  "windows": {"stride": 3}
})");
  return p;
}

// Dataset and one finished training run, built once and reused.
struct Fixture {
  fs::path data = kBase / "shared_data";
  fs::path run = kBase / "shared_run";
  std::string checkpoint;
};

const Fixture& fixture() {
  static Fixture f = [] {
    Fixture fx;
    fs::remove_all(fx.data);
    fs::remove_all(fx.run);
    // 12 tracks so the video-level split lands both labels in every partition
    RunResult synth = run("synth --out " + fx.data.string() +
                          " --tracks 12 --track-len 60 --seed 3 --no-frames");
    REQUIRE(synth.status == 0);
    RunResult train = run("train --data " + fx.data.string() + " --out " + fx.run.string() +
                          " --config " + tiny_config(2).string() + " --mask S --seed 5");
    REQUIRE(train.status == 0);
    for (const auto& e : fs::directory_iterator(fx.run))
      if (e.path().filename().string().rfind("checkpoint_", 0) == 0)
        fx.checkpoint = e.path().string();
    REQUIRE_FALSE(fx.checkpoint.empty());
    return fx;
  }();
  return f;
}

}  // namespace

TEST_CASE("synth writes the promised artifacts and is seed-deterministic") {
  const fs::path a = fresh_dir("synth_a");
  const fs::path b = fresh_dir("synth_b");
  CHECK(run("synth --out " + a.string() + " --tracks 6 --track-len 60 --seed 9 --no-frames")
            .status == 0);
  CHECK(run("synth --out " + b.string() + " --tracks 6 --track-len 60 --seed 9 --no-frames")
            .status == 0);
  CHECK(fs::exists(a / "annotations.jsonl"));
  CHECK(fs::exists(a / "manifest.json"));
  CHECK(slurp(a / "annotations.jsonl") == slurp(b / "annotations.jsonl"));

  const fs::path c = fresh_dir("synth_c");
  CHECK(run("synth --out " + c.string() + " --tracks 6 --track-len 60 --seed 10 --no-frames")
            .status == 0);
  CHECK(slurp(a / "annotations.jsonl") != slurp(c / "annotations.jsonl"));
}

TEST_CASE("existing outputs are refused unless forced") {
  const fs::path dir = fresh_dir("synth_refuse");
  CHECK(run("synth --out " + dir.string() + " --tracks 4 --track-len 60 --no-frames").status == 0);
  const RunResult again =
      run("synth --out " + dir.string() + " --tracks 4 --track-len 60 --no-frames");
  CHECK(again.status != 0);
  CHECK(again.output.find("--force") != std::string::npos);
  CHECK(run("synth --out " + dir.string() + " --tracks 4 --track-len 60 --no-frames --force")
            .status == 0);
}

TEST_CASE("train leaves history, timing, manifest and a named checkpoint") {
  const Fixture& fx = fixture();
  CHECK(fs::exists(fx.run / "history.jsonl"));
  CHECK(fs::exists(fx.run / "timing.json"));
  CHECK(fs::exists(fx.run / "manifest.json"));
  CHECK(fx.checkpoint.find("checkpoint_synthetic_seed5_epoch") != std::string::npos);

  std::ifstream hist(fx.run / "history.jsonl");
  std::string line;
  int lines = 0;
  while (std::getline(hist, line)) {
    ++lines;
    CHECK(line.find("\"epoch\":") != std::string::npos);
    CHECK(line.find("\"train_loss\":") != std::string::npos);
  }
  CHECK(lines == 2);

  const std::string manifest = slurp(fx.run / "manifest.json");
  CHECK(manifest.find("\"command\": \"train\"") != std::string::npos);
  CHECK(manifest.find("\"mask\": \"S\"") != std::string::npos);
  CHECK(manifest.find("annotations.jsonl") != std::string::npos);
}

TEST_CASE("train fails cleanly when the dataset is missing") {
  const fs::path empty = fresh_dir("no_data");
  const fs::path out = fresh_dir("no_data_out");
  const RunResult r = run("train --data " + empty.string() + " --out " + out.string() +
                          " --config " + tiny_config(1).string() + " --mask S");
  CHECK(r.status != 0);
  CHECK(r.output.find("error:") != std::string::npos);
  CHECK_FALSE(fs::exists(out / "history.jsonl"));
}

TEST_CASE("unknown profiles and malformed masks are rejected up front") {
  const Fixture& fx = fixture();
  const fs::path out = fresh_dir("bad_args_out");
  const RunResult p = run("train --data " + fx.data.string() + " --out " + out.string() +
                          " --profile nightly");
  CHECK(p.status != 0);
  CHECK(p.output.find("unknown profile") != std::string::npos);

  const RunResult m = run("train --data " + fx.data.string() + " --out " + out.string() +
                          " --config " + tiny_config(1).string() + " --mask XYZ");
  CHECK(m.status != 0);
}

TEST_CASE("eval writes stable metrics and separate timing") {
  const Fixture& fx = fixture();
  const fs::path out1 = fresh_dir("eval_1");
  const fs::path out2 = fresh_dir("eval_2");
  const std::string common = "eval --checkpoint " + fx.checkpoint + " --data " +
                             fx.data.string() + " --split test --out ";
  CHECK(run(common + out1.string()).status == 0);
  CHECK(run(common + out2.string()).status == 0);

  const std::string metrics = slurp(out1 / "metrics.json");
  CHECK(metrics.find("\"accuracy\"") != std::string::npos);
  CHECK(metrics.find("\"auc\"") != std::string::npos);
  CHECK(metrics.find("\"f1\"") != std::string::npos);
  CHECK(metrics.find("\"config_fingerprint\"") != std::string::npos);
  CHECK(metrics == slurp(out2 / "metrics.json"));

  const std::string perf = slurp(out1 / "perf.json");
  CHECK(perf.find("sequences_per_second") != std::string::npos);
  CHECK(metrics.find("sequences_per_second") == std::string::npos);
}

TEST_CASE("a tampered checkpoint is reported, not silently read") {
  const Fixture& fx = fixture();
  const fs::path broken = kBase / "broken.bin";
  std::string bytes = slurp(fx.checkpoint);
  bytes[8] = 9;  // format version byte
  write_file(broken, bytes);
  const fs::path out = fresh_dir("eval_broken");
  const RunResult r = run("eval --checkpoint " + broken.string() + " --data " + fx.data.string() +
                          " --out " + out.string());
  CHECK(r.status != 0);
  CHECK(r.output.find("version") != std::string::npos);
}

TEST_CASE("ablate honours an explicit mask list") {
  const Fixture& fx = fixture();
  const fs::path out = fresh_dir("ablate_out");
  const RunResult r = run("ablate --data " + fx.data.string() + " --out " + out.string() +
                          " --config " + tiny_config(1).string() + " --masks S,B --seeds 2");
  CHECK(r.status == 0);
  const std::string table = slurp(out / "ablation.tsv");
  std::istringstream in(table);
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) ++lines;
  // header plus, per mask, two seed rows and the mean and range rows
  CHECK(lines == 1 + 2 * 4);
  CHECK(table.rfind("imgs\tbbs\tpose\tspeed\tseed", 0) == 0);

  const std::string manifest = slurp(out / "manifest.json");
  CHECK(manifest.find("\"S\"") != std::string::npos);
  CHECK(manifest.find("\"B\"") != std::string::npos);
}

TEST_CASE("profiles choose their own default feature mask") {
  const fs::path data = fresh_dir("frames_data");
  CHECK(run("synth --out " + data.string() + " --tracks 6 --track-len 60 --seed 4").status == 0);
  CHECK(fs::exists(data / "frames"));

  const fs::path out = fresh_dir("jaad_beh_out");
  const RunResult r = run("train --data " + data.string() + " --out " + out.string() +
                          " --profile jaad_beh --config " + tiny_config(1).string() +
                          " --epochs 1");
  CHECK(r.status == 0);
  const std::string manifest = slurp(out / "manifest.json");
  CHECK(manifest.find("\"mask\": \"IB\"") != std::string::npos);
  CHECK(manifest.find("\"profile\": \"jaad_beh\"") != std::string::npos);
}
