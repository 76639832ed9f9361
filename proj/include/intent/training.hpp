#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "intent/dataset.hpp"
#include "intent/fusion.hpp"
#include "intent/preprocess.hpp"

namespace intent {

enum class OptimKind { kAdam, kAdamW };

std::string optim_kind_name(OptimKind kind);
OptimKind parse_optim_kind(const std::string& name);

// Learning-rate layout: either one unified rate, or a backbone rate paired
// with a separate rate for the sequence encoder and fusion head. Shift
// offsets always get their own rate; `shift_lr_is_multiplier` switches it
// from an absolute rate to a fraction of the backbone/unified rate.
struct TrainConfig {
  std::string profile = "synthetic";
  OptimKind optimizer = OptimKind::kAdamW;
  std::int64_t batch_size = 8;
  std::int64_t epochs = 30;
  std::optional<double> unified_lr = 3e-4;
  std::optional<double> backbone_lr;
  std::optional<double> seq_encoder_lr;
  double shift_lr = 1e-5;
  bool shift_lr_is_multiplier = false;
  double weight_decay = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t seed = 0;

  bool operator==(const TrainConfig&) const = default;
};

// Throws ConfigError unless exactly one of unified_lr / (backbone_lr +
// seq_encoder_lr) is set and every numeric field is in range.
void validate_train_config(const TrainConfig& tc);

// Named hyperparameter presets: pie, jaad_beh, jaad_all, synthetic.
struct Profile {
  TrainConfig train;
  std::string default_mask = "IBPS";
};
Profile lookup_profile(const std::string& name);

// Positive-class weighted binary cross-entropy on a raw logit.
Var weighted_bce(const Var& logit, int label, double w_c);

struct ParamGroup {
  std::string name;
  double lr = 0.0;
  double weight_decay = 0.0;
  std::vector<std::size_t> members;  // indices into the named parameter list
};

// Partition of the model parameters with per-group rates. Unified profiles
// yield {shift, rest}; split profiles yield {backbone, shift, head}.
std::vector<ParamGroup> make_param_groups(const std::vector<std::pair<std::string, Var>>& params,
                                          const TrainConfig& tc);

// Adam / AdamW over a fixed parameter partition. Adam folds weight decay
// into the gradient; AdamW applies it to the weights directly.
class Optimizer {
 public:
  Optimizer(std::vector<std::pair<std::string, Var>> params, std::vector<ParamGroup> groups,
            const TrainConfig& tc);

  void zero_grad();
  void step();
  std::int64_t step_count() const { return t_; }

 private:
  std::vector<std::pair<std::string, Var>> params_;
  std::vector<ParamGroup> groups_;
  OptimKind kind_;
  double beta1_, beta2_, eps_;
  std::vector<Tensor> m_, v_;
  std::int64_t t_ = 0;
};

struct EpochStats {
  std::int64_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_accuracy = 0.0;
  double val_auc = 0.0;
  bool val_auc_defined = false;  // false when validation has one class only
  double val_f1 = 0.0;
};

// One line per epoch, deterministic bytes; wall time goes elsewhere.
std::string history_line(const EpochStats& e);
void write_history(std::ostream& os, const std::vector<EpochStats>& history);

struct TrainResult {
  std::vector<EpochStats> history;
  std::int64_t best_epoch = 0;  // 1-based epoch the kept weights come from
  double class_weight = 1.0;
  NormStats stats;
  double train_seconds = 0.0;  // never serialized next to deterministic output
};

// Assembles feature bundles from the windows, then runs the epoch loop.
// On return the model carries the weights of the best validation epoch
// (highest accuracy, AUC as tiebreak, earlier epoch wins).
TrainResult train(IntentModel& model, const TrainConfig& tc,
                  const std::vector<ObservationWindow>& train_windows,
                  const std::vector<ObservationWindow>& val_windows, FrameSource* frames);

// Same loop over pre-assembled bundles; reusable across seeds in ablation.
TrainResult train_on_bundles(IntentModel& model, const TrainConfig& tc,
                             const std::vector<FeatureBundle>& train_bundles,
                             const std::vector<FeatureBundle>& val_bundles, double class_weight,
                             const NormStats& stats);

}  // namespace intent
