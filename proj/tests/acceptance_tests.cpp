#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "intent/ablation.hpp"
#include "intent/autograd.hpp"
#include "intent/checkpoint.hpp"
#include "intent/dataset.hpp"
#include "intent/frames.hpp"
#include "intent/metrics.hpp"
#include "intent/preprocess.hpp"
#include "intent/rng.hpp"
#include "intent/training.hpp"

// Each case verifies one release gate and prints exactly one PASS or FAIL
// line, so the binary's output doubles as the checklist.

using namespace intent;
namespace fs = std::filesystem;

namespace {

void report(bool ok, const std::string& what) {
  std::cout << (ok ? "PASS" : "FAIL") << " \xE2\x80\x94 " << what << "\n";
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Tensor random_tensor(Shape shape, RandomStream& rng, Scalar lo = -1.0, Scalar hi = 1.0) {
  Tensor t(std::move(shape));
  for (auto& v : t.vec()) v = rng.uniform(lo, hi);
  return t;
}

// offsets whose fractional parts stay away from 0 and 1 so central
// differences do not straddle the interpolation kinks
Tensor random_offsets(std::int64_t c, RandomStream& rng, Scalar span = 1.5) {
  Tensor off({c, 3});
  for (auto& v : off.vec()) {
    Scalar o = rng.uniform(-span, span);
    const Scalar frac = o - std::floor(o);
    if (frac < 0.05) o += 0.05;
    if (frac > 0.95) o -= 0.05;
    v = o;
  }
  return off;
}

// Sequence-branch sizes small enough to train inside the suite's budget.
ModelConfig micro_model(const std::string& mask_token) {
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

std::vector<ObservationWindow> windows_from(const std::vector<TrackAnnotation>& tracks) {
  std::vector<ObservationWindow> out;
  for (const TrackAnnotation& t : tracks) {
    const auto w = extract_windows(t, WindowParams{});
    out.insert(out.end(), w.begin(), w.end());
  }
  return out;
}

std::vector<FeatureBundle> bundles_for(const std::vector<ObservationWindow>& windows,
                                       const NormStats& stats, const ModelConfig& mc) {
  std::vector<FeatureBundle> out;
  out.reserve(windows.size());
  for (const ObservationWindow& w : windows)
    out.push_back(assemble_bundle(w, stats, mc.mask, mc.prep, nullptr));
  return out;
}

TrackAnnotation random_track(RandomStream& rng) {
  TrackAnnotation t;
  t.track_id = "t0";
  t.video_id = "v0";
  t.label = rng.bernoulli(0.5) ? 1 : 0;
  const std::int64_t n = rng.uniform_int(5, 160);
  const std::int64_t first = rng.uniform_int(0, 900);
  t.event_frame = first + rng.uniform_int(0, n - 1);
  for (std::int64_t i = 0; i < n; ++i) {
    t.frames.push_back(first + i);
    t.boxes.push_back({10.0, 10.0, 20.0, 30.0});
    t.pose.push_back(Pose{});
    t.ego_speed.push_back(10.0);
  }
  return t;
}

// Every legal placement by direct enumeration, then the stride comb
// anchored at the first feasible start.
std::vector<std::int64_t> oracle_starts(const TrackAnnotation& t, const WindowParams& p) {
  std::vector<std::int64_t> feasible;
  const std::int64_t n = static_cast<std::int64_t>(t.frames.size());
  for (std::int64_t s = 0; s + p.obs_len <= n; ++s) {
    const std::int64_t tte = t.event_frame - t.frames[s + p.obs_len - 1];
    if (tte >= p.tte_min && tte <= p.tte_max) feasible.push_back(s);
  }
  std::vector<std::int64_t> expect;
  for (std::int64_t s : feasible)
    if ((s - feasible.front()) % p.stride == 0) expect.push_back(s);
  return expect;
}

double pairwise_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  double wins = 0.0;
  std::int64_t pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      ++pairs;
      if (scores[i] > scores[j])
        wins += 1.0;
      else if (scores[i] == scores[j])
        wins += 0.5;
    }
  }
  return wins / static_cast<double>(pairs);
}

}  // namespace

TEST_CASE("scope note") {
  std::cout << "INFO \xE2\x80\x94 benchmark scores on the real driving datasets are out of scope "
               "here: reproducing them needs the original videos, pretrained weights and "
               "GPU-scale training; the checks below verify the implementation instead\n";
  CHECK(true);
}

TEST_CASE("gradients: learnable shift and weighted loss match finite differences") {
  const auto t0 = std::chrono::steady_clock::now();
  RandomStream rng(314);
  double worst_shift = 0.0, worst_bce = 0.0;

  for (int c = 0; c < 100; ++c) {
    const std::int64_t tg = rng.uniform_int(1, 3);
    const std::int64_t ch = tg * rng.uniform_int(1, 3);
    const std::int64_t h = rng.uniform_int(3, 6), w = rng.uniform_int(3, 6);
    const Tensor x0 = random_tensor({ch, h, w}, rng);
    const Tensor off0 = random_offsets(ch, rng);
    const Tensor w0 = random_tensor({ch, h, w}, rng);

    Var x = Var::param(x0);
    Var off = Var::param(off0);
    weighted_sum(shift3d(x, off, tg), w0).backward();
    auto fx = [&](const Tensor& t) {
      return weighted_sum(shift3d(Var::constant(t), Var::constant(off0), tg), w0).value().item();
    };
    auto foff = [&](const Tensor& t) {
      return weighted_sum(shift3d(Var::constant(x0), Var::constant(t), tg), w0).value().item();
    };
    worst_shift = std::max(worst_shift, gradcheck::max_rel_err(fx, x0, x.grad()));
    worst_shift = std::max(worst_shift, gradcheck::max_rel_err(foff, off0, off.grad(), 1e-5, 1e-4));
  }

  for (int c = 0; c < 100; ++c) {
    const Tensor z0 = Tensor::scalar(rng.uniform(-4.0, 4.0));
    const int y = rng.bernoulli(0.5) ? 1 : 0;
    const double wc = rng.uniform(0.25, 8.0);
    Var z = Var::param(z0);
    weighted_bce(z, y, wc).backward();
    auto f = [&](const Tensor& t) {
      return weighted_bce(Var::constant(t), y, wc).value().item();
    };
    worst_bce = std::max(worst_bce, gradcheck::max_rel_err(f, z0, z.grad(), 1e-6));
  }

  const double secs = seconds_since(t0);
  const bool ok = worst_shift < 1e-4 && worst_bce < 1e-6 && secs < 30.0;
  report(ok, msg("analytic gradients of the learnable shift (worst rel err ",
                 worst_shift, ") and the weighted loss (", worst_bce,
                 ") match central differences over 100 cases each in ", secs, " s"));
  CHECK(ok);
}

TEST_CASE("loss closed forms at zero logit") {
  bool ok = std::abs(weighted_bce(Var::constant(Tensor::scalar(0.0)), 1, 4.0).value().item() -
                     4.0 * std::log(2.0)) <= 1e-12;
  for (double w : {0.25, 1.0, 4.0, 17.0, 123.0})
    ok = ok &&
         std::abs(weighted_bce(Var::constant(Tensor::scalar(0.0)), 0, w).value().item() -
                  std::log(2.0)) <= 1e-12;
  report(ok, "zero-logit loss equals 4 ln 2 for a weight-4 positive and ln 2 for negatives "
             "under any weight, to 1e-12");
  CHECK(ok);
}

TEST_CASE("preprocessing emits the contracted layouts at default settings") {
  SignalSpec spec;
  const auto tracks = generate_synthetic(2, spec, 17);
  SyntheticFrameSource frames(tracks, 17);
  const auto windows = windows_from(tracks);
  const NormStats stats = compute_norm_stats(windows);
  const ModelConfig mc;  // defaults: all channels, 112 crop, 16-step window
  const FeatureBundle b = assemble_bundle(windows.front(), stats, mc.mask, mc.prep, &frames);

  const bool ok = b.video_stack.shape() == Shape{24, 112, 112} &&
                  b.box_seq.shape() == Shape{16, 4} && b.pose_seq.shape() == Shape{16, 36} &&
                  b.speed_seq.shape() == Shape{16, 1};
  report(ok, "default preprocessing yields a 24x112x112 video stack and 16-step box, pose "
             "and speed sequences");
  CHECK(ok);
}

TEST_CASE("metrics agree with brute-force oracles") {
  const auto t0 = std::chrono::steady_clock::now();
  RandomStream rng(999);
  bool ok = true;
  for (int trial = 0; trial < 1000 && ok; ++trial) {
    const std::int64_t n = rng.uniform_int(2, 50);
    std::vector<double> scores;
    std::vector<int> preds, labels;
    bool pos = false, neg = false;
    for (std::int64_t i = 0; i < n; ++i) {
      scores.push_back(rng.uniform_int(0, 12) / 12.0);
      preds.push_back(rng.bernoulli(0.5) ? 1 : 0);
      const int y = rng.bernoulli(0.5) ? 1 : 0;
      labels.push_back(y);
      (y == 1 ? pos : neg) = true;
    }

    std::int64_t hit = 0, tp = 0, fp = 0, fn = 0;
    for (std::int64_t i = 0; i < n; ++i) {
      hit += preds[i] == labels[i];
      tp += preds[i] == 1 && labels[i] == 1;
      fp += preds[i] == 1 && labels[i] == 0;
      fn += preds[i] == 0 && labels[i] == 1;
    }
    ok = ok && binary_accuracy(preds, labels) == static_cast<double>(hit) / static_cast<double>(n);
    double f1_expect = 0.0;
    if (tp + fp > 0 && tp + fn > 0) {
      const double p = static_cast<double>(tp) / static_cast<double>(tp + fp);
      const double r = static_cast<double>(tp) / static_cast<double>(tp + fn);
      if (p + r > 0.0) f1_expect = 2.0 * p * r / (p + r);
    }
    ok = ok && std::abs(f1_score(preds, labels) - f1_expect) < 1e-15;
    if (pos && neg)
      ok = ok && std::abs(auc_roc(scores, labels) - pairwise_auc(scores, labels)) < 1e-9;
  }
  const double secs = seconds_since(t0);
  ok = ok && secs < 60.0;
  report(ok, msg("accuracy and F1 are exact and AUC is within 1e-9 of the pairwise oracle on "
                 "1000 random instances, in ", secs, " s"));
  CHECK(ok);
}

TEST_CASE("class weight is the exact negative-to-positive ratio") {
  std::vector<ObservationWindow> ws;
  for (int i = 0; i < 100; ++i) {
    ObservationWindow w;
    w.label = 0;
    ws.push_back(w);
  }
  for (int i = 0; i < 25; ++i) {
    ObservationWindow w;
    w.label = 1;
    ws.push_back(w);
  }
  const bool ok = compute_class_weight(ws) == 4.0;
  report(ok, "a 4:1 mix of non-crossing to crossing windows yields a class weight of "
             "exactly 4.0");
  CHECK(ok);
}

TEST_CASE("window extraction equals exhaustive placement enumeration") {
  RandomStream rng(271);
  bool ok = true;
  for (int trial = 0; trial < 200 && ok; ++trial) {
    const TrackAnnotation t = random_track(rng);
    WindowParams p;
    p.stride = rng.uniform_int(1, 7);
    const auto expect = oracle_starts(t, p);
    const auto got = extract_windows(t, p);
    ok = got.size() == expect.size();
    for (std::size_t i = 0; ok && i < got.size(); ++i) {
      const std::int64_t s = expect[i];
      ok = got[i].start_frame == t.frames[static_cast<std::size_t>(s)] &&
           got[i].tte == t.event_frame - got[i].frames.back() &&
           static_cast<std::int64_t>(got[i].frames.size()) == p.obs_len;
    }
  }
  report(ok, "window extraction matches brute-force enumeration of every valid placement "
             "on 200 random tracks");
  CHECK(ok);
}

TEST_CASE("a speed-only model overfits the planted deceleration cue") {
  const auto t0 = std::chrono::steady_clock::now();
  SignalSpec spec;  // speed signal on by default
  auto all = windows_from(generate_synthetic(8, spec, 55));
  std::mt19937 shuffle_rng(13);
  std::shuffle(all.begin(), all.end(), shuffle_rng);
  const std::vector<ObservationWindow> train_ws(all.begin(), all.begin() + 200);
  const std::vector<ObservationWindow> val_ws(all.begin() + 200, all.begin() + 240);

  const ModelConfig mc = micro_model("S");
  TrainConfig tc;
  tc.epochs = 30;
  tc.seed = 1;
  IntentModel model(mc, tc.seed);
  const TrainResult r = train(model, tc, train_ws, val_ws, nullptr);

  const auto tb = bundles_for(train_ws, r.stats, mc);
  const double train_acc = evaluate_bundles(model, tb).accuracy;
  const double secs = seconds_since(t0);
  const bool ok = train_acc >= 0.95 && secs < 300.0;
  report(ok, msg("a speed-only model reaches train accuracy ", train_acc,
                 " (>= 0.95) on 200 planted-signal windows within ", r.best_epoch,
                 " epochs, in ", secs, " s"));
  CHECK(ok);
}

TEST_CASE("input-importance sweep: full grid and the speed-over-pose margin") {
  const auto masks = default_ablation_masks();
  const std::vector<std::string> expected{"I",   "B",   "P",   "S",   "PS",
                                          "BS",  "IS",  "BP",  "IP",  "BPS",
                                          "IBP", "IPS", "IBS", "IB",  "IBPS"};
  bool grid_ok = masks.size() == 15;
  for (std::size_t i = 0; grid_ok && i < masks.size(); ++i)
    grid_ok = masks[i].token() == expected[i];

  // train, val and test each come from their own generator call so every
  // partition holds both labels; the pose channel carries no signal
  SignalSpec spec;
  spec.pose_signal = false;
  DatasetSplit split;
  split.train = windows_from(generate_synthetic(8, spec, 501));
  split.val = windows_from(generate_synthetic(4, spec, 502));
  split.test = windows_from(generate_synthetic(6, spec, 503));

  TrainConfig tc;
  tc.epochs = 8;
  tc.batch_size = 16;
  const auto rows = run_ablation(micro_model("IBPS"), tc, split, nullptr,
                                 {parse_mask("S"), parse_mask("P")}, {1, 2, 3});

  double speed_auc = 0.0, pose_auc = 0.0;
  bool cells_ok = rows.size() == 2;
  for (std::size_t m = 0; cells_ok && m < rows.size(); ++m) {
    for (const AblationCell& c : rows[m].cells) {
      cells_ok = cells_ok && !c.failed;
      (m == 0 ? speed_auc : pose_auc) += c.metrics.auc / 3.0;
    }
  }
  const double gap = speed_auc - pose_auc;
  const bool ok = grid_ok && cells_ok && gap >= 0.2;
  report(ok, msg("the default sweep lists all 15 channel combinations, and planted speed "
                 "signal beats signal-free pose by ", gap, " AUC (>= 0.2) over 3 seeds (speed ",
                 speed_auc, ", pose ", pose_auc, ")"));
  CHECK(ok);
}

TEST_CASE("full model stays inside the parameter budget at usable speed") {
  const ModelConfig mc;  // default full-size architecture
  IntentModel model(mc, 1);
  const std::int64_t params = model.parameter_count();

  SignalSpec spec;
  const auto tracks = generate_synthetic(1, spec, 23);
  SyntheticFrameSource frames(tracks, 23);
  const auto windows = windows_from(tracks);
  const NormStats stats = compute_norm_stats(windows);
  std::vector<FeatureBundle> batch{
      assemble_bundle(windows.front(), stats, mc.mask, mc.prep, &frames)};
  const double rate = measure_throughput(model, batch, 1, 3);

  const bool ok = params <= 5'000'000 && rate > 0.0 && std::isfinite(rate);
  report(ok, msg("the default full model holds ", params,
                 " parameters (<= 5,000,000) and sustains ", rate, " sequences/s on this host"));
  CHECK(ok);
}

TEST_CASE("training runs are byte-reproducible") {
  const fs::path dir = fs::temp_directory_path() / "intent_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);

  SignalSpec spec;
  spec.track_len = 60;
  const auto tracks = generate_synthetic(6, spec, 71);
  std::vector<ObservationWindow> train_ws, val_ws;
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    const auto w = extract_windows(tracks[i], WindowParams{});
    auto& dst = i < 4 ? train_ws : val_ws;
    dst.insert(dst.end(), w.begin(), w.end());
  }

  const ModelConfig mc = micro_model("S");
  TrainConfig tc;
  tc.epochs = 3;
  tc.seed = 9;

  auto run_once = [&](const std::string& tag) {
    IntentModel model(mc, tc.seed);
    const TrainResult r = train(model, tc, train_ws, val_ws, nullptr);
    std::ofstream hist(dir / (tag + "_history.jsonl"), std::ios::binary);
    write_history(hist, r.history);
    hist.close();
    CheckpointMeta meta;
    meta.model = mc;
    meta.stats = r.stats;
    meta.class_weight = r.class_weight;
    meta.profile = tc.profile;
    meta.seed = tc.seed;
    meta.epoch = r.best_epoch;
    save_checkpoint((dir / (tag + "_ckpt.bin")).string(), meta, model.named_parameters());
  };
  run_once("a");
  run_once("b");

  auto bytes = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  const bool hist_same = bytes(dir / "a_history.jsonl") == bytes(dir / "b_history.jsonl");
  const bool ckpt_same = bytes(dir / "a_ckpt.bin") == bytes(dir / "b_ckpt.bin");
  const bool nonempty = !bytes(dir / "a_history.jsonl").empty() &&
                        !bytes(dir / "a_ckpt.bin").empty();
  const bool ok = hist_same && ckpt_same && nonempty;
  report(ok, "two trainings under the same config and seed write byte-identical history "
             "files and checkpoints");
  CHECK(ok);
}
