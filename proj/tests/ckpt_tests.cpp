#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "intent/checkpoint.hpp"
#include "intent/config_io.hpp"
#include "intent/dataset.hpp"
#include "intent/training.hpp"

using namespace intent;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  const fs::path dir = fs::temp_directory_path() / "intent_ckpt_tests";
  fs::create_directories(dir);
  return dir;
}

ModelConfig small_model(const std::string& mask_token) {
  ModelConfig mc;
  mc.mask = parse_mask(mask_token);
  mc.seq.d_model = 8;
  mc.seq.n_layers = 1;
  mc.seq.n_heads = 2;
  mc.seq.ffn_dim = 16;
  mc.seq.out_dim = 8;
  mc.fusion.hidden = 16;
  mc.video.stage_channels = {8, 12};
  mc.video.input_hw = 16;
  mc.video.feature_dim = 8;
  mc.prep.crop_height = 16;
  mc.prep.crop_width = 16;
  return mc;
}

CheckpointMeta sample_meta() {
  CheckpointMeta meta;
  meta.model = small_model("BS");
  meta.stats.speed_mean = 17.25;
  meta.stats.speed_std = 4.5;
  meta.class_weight = 2.5;
  meta.profile = "synthetic";
  meta.seed = 11;
  meta.epoch = 7;
  meta.split_ratios = {0.6, 0.2, 0.2};
  meta.split_seed = 5;
  meta.windows.stride = 2;
  return meta;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

void spit(const fs::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_CASE("model configuration survives a JSON round trip") {
  ModelConfig c = small_model("IBP");
  c.video.shift_init_range = 0.25;
  c.video.temporal_groups = 4;
  c.seq.positional_encoding = false;
  c.seq.ln_eps = 1e-6;
  c.fusion.mode = FusionMode::kAttention;
  c.fusion.dropout = 0.25;
  c.prep.sub_phase = 1;
  c.prep.pixel_max = 1.0;
  const ModelConfig back = model_config_from_json(model_config_to_json(c), "model");
  CHECK(back == c);
}

TEST_CASE("train configuration round trips including unset optionals") {
  TrainConfig pie = lookup_profile("pie").train;
  CHECK(train_config_from_json(train_config_to_json(pie), "train") == pie);

  TrainConfig uni = lookup_profile("jaad_beh").train;
  uni.shift_lr_is_multiplier = true;
  CHECK(train_config_from_json(train_config_to_json(uni), "train") == uni);

  const Json j = train_config_to_json(pie);
  CHECK(j.at("unified_lr").is_null());
  CHECK(j.at("backbone_lr").get<double>() == 1.1e-3);
}

TEST_CASE("remaining config pieces round trip") {
  NormStats s;
  s.speed_mean = -2.0;
  s.speed_std = 0.125;
  CHECK(norm_stats_from_json(norm_stats_to_json(s), "stats") == s);

  WindowParams w;
  w.obs_len = 8;
  w.tte_min = 10;
  w.tte_max = 20;
  w.stride = 4;
  CHECK(window_params_from_json(window_params_to_json(w), "windows") == w);

  ExperimentConfig e;
  e.model = small_model("S");
  e.train = lookup_profile("synthetic").train;
  e.windows = w;
  e.data_dir = "/tmp/data";
  e.frames_root = "/tmp/frames";
  e.out_dir = "/tmp/out";
  e.split_ratios = {0.5, 0.25, 0.25};
  e.split_seed = 9;
  CHECK(experiment_config_from_json(experiment_config_to_json(e), "config") == e);
}

TEST_CASE("masks serialize as token strings") {
  CHECK(mask_to_json(parse_mask("IBPS")).get<std::string>() == "IBPS");
  CHECK(mask_to_json(parse_mask("S")).get<std::string>() == "S");
  CHECK(mask_from_json(Json("IB"), "mask") == parse_mask("IB"));
  CHECK_THROWS_AS(mask_from_json(Json("XQ"), "mask"), ParseError);
  CHECK_THROWS_AS(mask_from_json(Json(3), "mask"), ParseError);
}

TEST_CASE("unknown keys are rejected with their full path") {
  Json j = model_config_to_json(small_model("S"));
  j["video"]["fov"] = 90;
  try {
    model_config_from_json(j, "model");
    FAIL("unknown key accepted");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("model.video.fov") != std::string::npos);
    CHECK(std::string(e.what()).find("unknown key") != std::string::npos);
  }

  Json top = experiment_config_to_json(ExperimentConfig{});
  top["verbose"] = true;
  try {
    experiment_config_from_json(top, "config");
    FAIL("unknown key accepted");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("config.verbose") != std::string::npos);
  }
}

TEST_CASE("wrongly typed values name the offending path") {
  Json j = train_config_to_json(TrainConfig{});
  j["epochs"] = "many";
  try {
    train_config_from_json(j, "train");
    FAIL("string epochs accepted");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("train.epochs") != std::string::npos);
  }

  Json w = window_params_to_json(WindowParams{});
  w["obs_len"] = 2.5;
  CHECK_THROWS_AS(window_params_from_json(w, "windows"), ParseError);

  CHECK_THROWS_AS(model_config_from_json(Json::array(), "model"), ParseError);
}

TEST_CASE("parsing fills unmentioned fields from the supplied base") {
  ModelConfig base = small_model("BS");
  base.seq.d_model = 48;
  const ModelConfig got = model_config_from_json(Json::parse(R"({"seq":{"n_heads":8}})"),
                                                 "model", base);
  CHECK(got.seq.n_heads == 8);
  CHECK(got.seq.d_model == 48);
  CHECK(got.mask == base.mask);
  CHECK(got.video == base.video);

  TrainConfig tbase;
  tbase.epochs = 12;
  const TrainConfig tgot =
      train_config_from_json(Json::parse(R"({"batch_size":4})"), "train", tbase);
  CHECK(tgot.batch_size == 4);
  CHECK(tgot.epochs == 12);

  // switching to split rates through JSON must clear the inherited unified rate
  const TrainConfig split = train_config_from_json(
      Json::parse(R"({"unified_lr":null,"backbone_lr":0.001,"seq_encoder_lr":0.002})"), "train",
      tbase);
  CHECK_FALSE(split.unified_lr.has_value());
  CHECK(*split.backbone_lr == 0.001);
  CHECK(*split.seq_encoder_lr == 0.002);
}

TEST_CASE("config files load over a base and bad files are reported") {
  const fs::path dir = temp_dir();
  const fs::path good = dir / "good.json";
  ExperimentConfig base;
  base.data_dir = "/tmp/d";
  base.out_dir = "/tmp/o";

  spit(good, R"({"train":{"epochs":2},"split_seed":77})");
  const ExperimentConfig got = load_experiment_config(good.string(), base);
  CHECK(got.train.epochs == 2);
  CHECK(got.split_seed == 77);
  CHECK(got.data_dir == "/tmp/d");

  const fs::path bad = dir / "bad.json";
  spit(bad, "{\"train\": nope}");
  CHECK_THROWS_AS(load_experiment_config(bad.string(), base), ParseError);
  CHECK_THROWS_AS(load_experiment_config((dir / "missing.json").string(), base), IoError);
}

TEST_CASE("fingerprints track the model configuration only") {
  const ModelConfig a = small_model("BS");
  ModelConfig b = a;
  CHECK(config_fingerprint(a) == config_fingerprint(b));
  b.seq.d_model = 16;
  CHECK(config_fingerprint(a) != config_fingerprint(b));
  ModelConfig c = a;
  c.mask = parse_mask("S");
  CHECK(config_fingerprint(a) != config_fingerprint(c));
}

TEST_CASE("checkpoints restore metadata and weights bit for bit") {
  const fs::path path = temp_dir() / "round_trip.bin";
  const CheckpointMeta meta = sample_meta();
  IntentModel model(meta.model, meta.seed);
  const auto params = model.named_parameters();
  save_checkpoint(path.string(), meta, params);

  const LoadedCheckpoint ckpt = load_checkpoint(path.string());
  CHECK(ckpt.meta == meta);
  REQUIRE(ckpt.tensors.size() == params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    CHECK(ckpt.tensors[i].first == params[i].first);
    const Tensor& a = ckpt.tensors[i].second;
    const Tensor& b = params[i].second.value();
    REQUIRE(a.shape() == b.shape());
    CHECK(std::memcmp(a.data(), b.data(), sizeof(Scalar) * a.numel()) == 0);
  }

  const auto rebuilt = model_from_checkpoint(ckpt);
  SignalSpec spec;
  spec.track_len = 60;
  const auto tracks = generate_synthetic(2, spec, 3);
  const NormStats stats = ckpt.meta.stats;
  const auto windows = extract_windows(tracks[0], ckpt.meta.windows);
  REQUIRE_FALSE(windows.empty());
  const FeatureBundle bundle =
      assemble_bundle(windows[0], stats, meta.model.mask, meta.model.prep, nullptr);
  const Var a = model.forward(bundle, Mode::kEval);
  const Var b = rebuilt->forward(bundle, Mode::kEval);
  CHECK(std::memcmp(a.value().data(), b.value().data(), sizeof(Scalar)) == 0);
}

TEST_CASE("checkpoint rejects foreign or damaged files") {
  const fs::path dir = temp_dir();
  const fs::path path = dir / "victim.bin";
  const CheckpointMeta meta = sample_meta();
  IntentModel model(meta.model, 1);
  save_checkpoint(path.string(), meta, model.named_parameters());
  const std::string bytes = slurp(path);

  SUBCASE("bad magic") {
    std::string b = bytes;
    b[0] = 'X';
    spit(path, b);
    try {
      load_checkpoint(path.string());
      FAIL("bad magic accepted");
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find("magic") != std::string::npos);
    }
  }
  SUBCASE("unsupported version") {
    std::string b = bytes;
    b[8] = 9;  // little-endian u32 version right after the magic
    spit(path, b);
    try {
      load_checkpoint(path.string());
      FAIL("future version accepted");
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find("version") != std::string::npos);
    }
  }
  SUBCASE("truncated payload") {
    spit(path, bytes.substr(0, bytes.size() - 5));
    CHECK_THROWS_AS(load_checkpoint(path.string()), ParseError);
  }
  SUBCASE("truncated header") {
    spit(path, bytes.substr(0, 30));
    CHECK_THROWS_AS(load_checkpoint(path.string()), ParseError);
  }
  SUBCASE("trailing garbage") {
    spit(path, bytes + "tail");
    CHECK_THROWS_AS(load_checkpoint(path.string()), ParseError);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_checkpoint((dir / "nope.bin").string()), IoError);
  }
}

TEST_CASE("weight restoration checks names and shapes") {
  const fs::path path = temp_dir() / "mismatch.bin";
  const CheckpointMeta meta = sample_meta();
  IntentModel model(meta.model, 1);
  auto params = model.named_parameters();

  auto renamed = params;
  renamed[0].first = "imposter.weight";
  save_checkpoint(path.string(), meta, renamed);
  CHECK_THROWS_AS(model_from_checkpoint(load_checkpoint(path.string())), ParseError);

  auto dropped = params;
  dropped.pop_back();
  save_checkpoint(path.string(), meta, dropped);
  CHECK_THROWS_AS(model_from_checkpoint(load_checkpoint(path.string())), ParseError);

  CheckpointMeta wrong = meta;
  wrong.model.seq.out_dim = 4;  // stored shapes no longer fit the rebuilt model
  save_checkpoint(path.string(), wrong, params);
  CHECK_THROWS_AS(model_from_checkpoint(load_checkpoint(path.string())), ParseError);
}
