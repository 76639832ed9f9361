#pragma once

#include <cstdint>
#include <vector>

#include "intent/dataset.hpp"
#include "intent/fusion.hpp"
#include "intent/preprocess.hpp"

namespace intent {

struct MetricsReport {
  double accuracy = 0.0;
  double auc = 0.0;
  double f1 = 0.0;
  std::int64_t tp = 0, fp = 0, tn = 0, fn = 0;
  std::int64_t n_samples = 0;
  std::int64_t parameter_count = 0;
  double sequences_per_second = 0.0;  // filled by measure_throughput, else 0
  std::uint64_t config_fingerprint = 0;
};

// Inputs are {0,1} vectors of equal nonzero length.
double binary_accuracy(const std::vector<int>& preds, const std::vector<int>& labels);

// Positive class = crossing. Returns 0.0 when precision or recall is
// undefined (no predicted or no actual positives).
double f1_score(const std::vector<int>& preds, const std::vector<int>& labels);

// Rank-statistic area under the ROC curve; tied scores count 1/2.
// Requires both classes present.
double auc_roc(const std::vector<double>& scores, const std::vector<int>& labels);

// Crossing probabilities, one eval-mode forward per bundle.
std::vector<double> predict_scores(const IntentModel& model,
                                   const std::vector<FeatureBundle>& bundles);

MetricsReport metrics_from_scores(const std::vector<double>& scores, const std::vector<int>& labels,
                                  double threshold = 0.5);

MetricsReport evaluate_bundles(const IntentModel& model, const std::vector<FeatureBundle>& bundles,
                               double threshold = 0.5);

// Full pipeline: preprocess the windows with the model's own mask and
// normalization stats, score, threshold, report.
MetricsReport evaluate(const IntentModel& model, const std::vector<ObservationWindow>& windows,
                       const NormStats& stats, FrameSource* frames, double threshold = 0.5);

// Median over timed trials of batch-size / forward wall time.
double measure_throughput(const IntentModel& model, const std::vector<FeatureBundle>& batch,
                          int n_warmup = 10, int n_trials = 50);

}  // namespace intent
