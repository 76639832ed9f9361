#include "intent/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>

#include <json.hpp>

#include "intent/metrics.hpp"

namespace intent {

std::string optim_kind_name(OptimKind kind) {
  return kind == OptimKind::kAdam ? "adam" : "adamw";
}

OptimKind parse_optim_kind(const std::string& name) {
  if (name == "adam") return OptimKind::kAdam;
  if (name == "adamw") return OptimKind::kAdamW;
  throw ConfigError(msg("unknown optimizer '", name, "', expected adam or adamw"));
}

void validate_train_config(const TrainConfig& tc) {
  const bool unified = tc.unified_lr.has_value();
  const bool split = tc.backbone_lr.has_value() || tc.seq_encoder_lr.has_value();
  if (unified && split)
    throw ConfigError("unified_lr cannot be combined with backbone_lr or seq_encoder_lr");
  if (!unified && (!tc.backbone_lr || !tc.seq_encoder_lr))
    throw ConfigError("set either unified_lr or both backbone_lr and seq_encoder_lr");
  const double base = unified ? *tc.unified_lr : *tc.backbone_lr;
  if (base < 0.0 || (!unified && *tc.seq_encoder_lr < 0.0))
    throw ConfigError("learning rates must be nonnegative");
  if (tc.shift_lr < 0.0) throw ConfigError(msg("shift learning rate ", tc.shift_lr, " is negative"));
  if (tc.weight_decay < 0.0)
    throw ConfigError(msg("weight decay ", tc.weight_decay, " is negative"));
  if (tc.batch_size < 1) throw ConfigError(msg("batch size ", tc.batch_size, " must be positive"));
  if (tc.epochs < 1) throw ConfigError(msg("epoch count ", tc.epochs, " must be positive"));
  if (tc.beta1 < 0.0 || tc.beta1 >= 1.0 || tc.beta2 < 0.0 || tc.beta2 >= 1.0)
    throw ConfigError("Adam betas must lie in [0, 1)");
  if (tc.eps <= 0.0) throw ConfigError("Adam epsilon must be positive");
}

Profile lookup_profile(const std::string& name) {
  Profile p;
  TrainConfig& t = p.train;
  t.profile = name;
  if (name == "pie") {
    t.optimizer = OptimKind::kAdam;
    t.unified_lr.reset();
    t.backbone_lr = 1.1e-3;
    t.seq_encoder_lr = 4.3e-3;
    t.shift_lr = 6.5e-4;
    t.weight_decay = 0.0;
    t.epochs = 60;
  } else if (name == "jaad_beh") {
    t.optimizer = OptimKind::kAdamW;
    t.unified_lr = 1e-4;
    t.shift_lr = 1e-5;
    t.weight_decay = 1e-3;
    t.epochs = 60;
    p.default_mask = "IB";
  } else if (name == "jaad_all") {
    t.optimizer = OptimKind::kAdamW;
    t.unified_lr = 3e-4;
    t.shift_lr = 1e-5;
    t.weight_decay = 1e-4;
    t.epochs = 60;
  } else if (name == "synthetic") {
    t.optimizer = OptimKind::kAdamW;
    t.unified_lr = 3e-4;
    t.shift_lr = 1e-5;
    t.weight_decay = 1e-4;
    t.epochs = 30;
  } else {
    throw ConfigError(msg("unknown profile '", name,
                          "', expected pie, jaad_beh, jaad_all or synthetic"));
  }
  validate_train_config(t);
  return p;
}

Var weighted_bce(const Var& logit, int label, double w_c) {
  return bce_with_logits(logit, label, w_c);
}

std::vector<ParamGroup> make_param_groups(const std::vector<std::pair<std::string, Var>>& params,
                                          const TrainConfig& tc) {
  validate_train_config(tc);
  const bool unified = tc.unified_lr.has_value();
  const double base = unified ? *tc.unified_lr : *tc.backbone_lr;
  const double shift_rate = tc.shift_lr_is_multiplier ? base * tc.shift_lr : tc.shift_lr;

  std::vector<ParamGroup> groups;
  if (unified) {
    groups.push_back({"shift", shift_rate, tc.weight_decay, {}});
    groups.push_back({"rest", *tc.unified_lr, tc.weight_decay, {}});
  } else {
    groups.push_back({"backbone", *tc.backbone_lr, tc.weight_decay, {}});
    groups.push_back({"shift", shift_rate, tc.weight_decay, {}});
    groups.push_back({"head", *tc.seq_encoder_lr, tc.weight_decay, {}});
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::string& name = params[i].first;
    std::size_t g;
    if (name.find(".shift.offsets") != std::string::npos)
      g = unified ? 0 : 1;
    else if (unified)
      g = 1;
    else if (name.rfind("video.", 0) == 0)
      g = 0;
    else
      g = 2;
    groups[g].members.push_back(i);
  }
  return groups;
}

Optimizer::Optimizer(std::vector<std::pair<std::string, Var>> params, std::vector<ParamGroup> groups,
                     const TrainConfig& tc)
    : params_(std::move(params)),
      groups_(std::move(groups)),
      kind_(tc.optimizer),
      beta1_(tc.beta1),
      beta2_(tc.beta2),
      eps_(tc.eps) {
  std::vector<int> owner(params_.size(), -1);
  for (std::size_t gi = 0; gi < groups_.size(); ++gi) {
    for (std::size_t idx : groups_[gi].members) {
      if (idx >= params_.size())
        throw ConfigError(msg("group ", groups_[gi].name, " references parameter ", idx,
                              " but only ", params_.size(), " exist"));
      if (owner[idx] != -1)
        throw ConfigError(msg("parameter ", params_[idx].first, " assigned to two groups"));
      owner[idx] = static_cast<int>(gi);
    }
  }
  for (std::size_t i = 0; i < params_.size(); ++i)
    if (owner[i] == -1)
      throw ConfigError(msg("parameter ", params_[i].first, " not assigned to any group"));
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& [name, p] : params_) {
    m_.emplace_back(p.shape());
    v_.emplace_back(p.shape());
  }
}

void Optimizer::zero_grad() {
  for (auto& [name, p] : params_) p.zero_grad();
}

void Optimizer::step() {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (const ParamGroup& group : groups_) {
    for (std::size_t idx : group.members) {
      Var& p = params_[idx].second;
      Tensor& value = p.mutable_value();
      Tensor& m = m_[idx];
      Tensor& v = v_[idx];
      const Tensor* grad = p.has_grad() ? &p.grad() : nullptr;
      for (std::int64_t i = 0; i < value.numel(); ++i) {
        double g = grad ? (*grad)[i] : 0.0;
        if (kind_ == OptimKind::kAdam) g += group.weight_decay * value[i];
        m.data()[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
        v.data()[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
        const double mhat = m[i] / c1;
        const double vhat = v[i] / c2;
        double upd = group.lr * mhat / (std::sqrt(vhat) + eps_);
        if (kind_ == OptimKind::kAdamW) upd += group.lr * group.weight_decay * value[i];
        // skipping exact zeros keeps lr = 0 a bitwise no-op
        if (upd != 0.0) value.data()[i] -= upd;
      }
    }
  }
}

std::string history_line(const EpochStats& e) {
  nlohmann::ordered_json j;
  j["epoch"] = e.epoch;
  j["train_loss"] = e.train_loss;
  j["val_acc"] = e.val_accuracy;
  if (e.val_auc_defined)
    j["val_auc"] = e.val_auc;
  else
    j["val_auc"] = nullptr;
  j["val_f1"] = e.val_f1;
  return j.dump();
}

void write_history(std::ostream& os, const std::vector<EpochStats>& history) {
  for (const EpochStats& e : history) os << history_line(e) << '\n';
}

TrainResult train_on_bundles(IntentModel& model, const TrainConfig& tc,
                             const std::vector<FeatureBundle>& train_bundles,
                             const std::vector<FeatureBundle>& val_bundles, double class_weight,
                             const NormStats& stats) {
  validate_train_config(tc);
  if (train_bundles.empty()) throw ConfigError("training split is empty");
  if (val_bundles.empty()) throw ConfigError("validation split is empty");
  if (!(class_weight > 0.0)) throw ConfigError(msg("class weight ", class_weight, " must be positive"));

  auto params = model.named_parameters();
  Optimizer opt(params, make_param_groups(params, tc), tc);
  RandomStream root(tc.seed);
  RandomStream shuffle_rng = root.fork(101);
  RandomStream dropout_rng = root.fork(202);

  std::vector<int> val_labels;
  val_labels.reserve(val_bundles.size());
  for (const FeatureBundle& b : val_bundles) val_labels.push_back(b.label);
  const std::int64_t val_pos = std::count(val_labels.begin(), val_labels.end(), 1);
  const bool val_two_classes =
      val_pos > 0 && val_pos < static_cast<std::int64_t>(val_labels.size());

  TrainResult result;
  result.class_weight = class_weight;
  result.stats = stats;

  const std::size_t n = train_bundles.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<Tensor> best_values;
  double best_acc = -1.0, best_auc_key = -2.0;

  const auto t_start = std::chrono::steady_clock::now();
  for (std::int64_t epoch = 1; epoch <= tc.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng.engine());
    double loss_sum = 0.0;
    for (std::size_t b0 = 0; b0 < n; b0 += static_cast<std::size_t>(tc.batch_size)) {
      const std::size_t bn = std::min(static_cast<std::size_t>(tc.batch_size), n - b0);
      const std::size_t batch_index = b0 / static_cast<std::size_t>(tc.batch_size);
      opt.zero_grad();
      try {
        for (std::size_t k = b0; k < b0 + bn; ++k) {
          const FeatureBundle& sample = train_bundles[order[k]];
          const Var logit = model.forward(sample, Mode::kTrain, &dropout_rng);
          if (!logit.value().all_finite()) throw DivergenceError("logit is non-finite");
          const Var loss = weighted_bce(logit, sample.label, class_weight);
          const double lv = loss.value()[0];
          if (!std::isfinite(lv)) throw DivergenceError(msg("loss is ", lv));
          loss_sum += lv;
          scale(loss, 1.0 / static_cast<double>(bn)).backward();
        }
      } catch (const DivergenceError& err) {
        throw DivergenceError(
            msg("training diverged at epoch ", epoch, ", batch ", batch_index, ": ", err.what()));
      }
      opt.step();
    }

    EpochStats es;
    es.epoch = epoch;
    es.train_loss = loss_sum / static_cast<double>(n);
    const std::vector<double> scores = predict_scores(model, val_bundles);
    std::vector<int> preds;
    preds.reserve(scores.size());
    for (double s : scores) preds.push_back(s >= 0.5 ? 1 : 0);
    es.val_accuracy = binary_accuracy(preds, val_labels);
    es.val_f1 = f1_score(preds, val_labels);
    if (val_two_classes) {
      es.val_auc = auc_roc(scores, val_labels);
      es.val_auc_defined = true;
    }
    result.history.push_back(es);

    const double auc_key = es.val_auc_defined ? es.val_auc : -1.0;
    if (es.val_accuracy > best_acc || (es.val_accuracy == best_acc && auc_key > best_auc_key)) {
      best_acc = es.val_accuracy;
      best_auc_key = auc_key;
      result.best_epoch = epoch;
      best_values.clear();
      for (const auto& [name, p] : params) best_values.push_back(p.value());
    }
  }
  result.train_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();

  for (std::size_t i = 0; i < params.size(); ++i)
    params[i].second.mutable_value() = best_values[i];
  return result;
}

TrainResult train(IntentModel& model, const TrainConfig& tc,
                  const std::vector<ObservationWindow>& train_windows,
                  const std::vector<ObservationWindow>& val_windows, FrameSource* frames) {
  if (train_windows.empty()) throw ConfigError("training split is empty");
  if (val_windows.empty()) throw ConfigError("validation split is empty");
  const double class_weight = compute_class_weight(train_windows);
  const FeatureMask mask = model.config().mask;
  const NormStats stats = mask.speed ? compute_norm_stats(train_windows) : NormStats{};
  const PrepConfig& prep = model.config().prep;
  std::vector<FeatureBundle> train_bundles, val_bundles;
  train_bundles.reserve(train_windows.size());
  val_bundles.reserve(val_windows.size());
  for (const ObservationWindow& w : train_windows)
    train_bundles.push_back(assemble_bundle(w, stats, mask, prep, frames));
  for (const ObservationWindow& w : val_windows)
    val_bundles.push_back(assemble_bundle(w, stats, mask, prep, frames));
  return train_on_bundles(model, tc, train_bundles, val_bundles, class_weight, stats);
}

}  // namespace intent
