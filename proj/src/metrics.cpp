#include "intent/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "intent/config_io.hpp"

namespace intent {

namespace {

void check_binary(const std::vector<int>& v, const char* what) {
  for (int x : v)
    if (x != 0 && x != 1) throw ValidationError(msg(what, " must be 0 or 1, got ", x));
}

void check_pair(std::size_t a, std::size_t b) {
  if (a != b) throw ValidationError(msg("prediction/label length mismatch: ", a, " vs ", b));
  if (a == 0) throw ValidationError("metrics need at least one sample");
}

}  // namespace

double binary_accuracy(const std::vector<int>& preds, const std::vector<int>& labels) {
  check_pair(preds.size(), labels.size());
  check_binary(preds, "prediction");
  check_binary(labels, "label");
  std::int64_t hits = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) hits += preds[i] == labels[i];
  return static_cast<double>(hits) / static_cast<double>(preds.size());
}

double f1_score(const std::vector<int>& preds, const std::vector<int>& labels) {
  check_pair(preds.size(), labels.size());
  check_binary(preds, "prediction");
  check_binary(labels, "label");
  std::int64_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    tp += preds[i] == 1 && labels[i] == 1;
    fp += preds[i] == 1 && labels[i] == 0;
    fn += preds[i] == 0 && labels[i] == 1;
  }
  if (tp + fp == 0 || tp + fn == 0) return 0.0;
  const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  const double recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

double auc_roc(const std::vector<double>& scores, const std::vector<int>& labels) {
  check_pair(scores.size(), labels.size());
  check_binary(labels, "label");
  for (double s : scores)
    if (!std::isfinite(s)) throw ValidationError(msg("non-finite score ", s));
  const std::int64_t n_pos = std::count(labels.begin(), labels.end(), 1);
  const std::int64_t n_neg = static_cast<std::int64_t>(labels.size()) - n_pos;
  if (n_pos == 0 || n_neg == 0)
    throw ValidationError("AUC needs both classes in the labels");

  // midrank Mann-Whitney: average 1-based ranks within tied score runs
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double pos_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double mid = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
    for (std::size_t k = i; k < j; ++k)
      if (labels[order[k]] == 1) pos_rank_sum += mid;
    i = j;
  }
  const double u = pos_rank_sum - 0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1);
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

std::vector<double> predict_scores(const IntentModel& model,
                                   const std::vector<FeatureBundle>& bundles) {
  std::vector<double> scores;
  scores.reserve(bundles.size());
  for (const FeatureBundle& b : bundles)
    scores.push_back(sigmoid(model.forward(b, Mode::kEval).value()[0]));
  return scores;
}

MetricsReport metrics_from_scores(const std::vector<double>& scores, const std::vector<int>& labels,
                                  double threshold) {
  check_pair(scores.size(), labels.size());
  MetricsReport r;
  std::vector<int> preds;
  preds.reserve(scores.size());
  for (double s : scores) preds.push_back(s >= threshold ? 1 : 0);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    r.tp += preds[i] == 1 && labels[i] == 1;
    r.fp += preds[i] == 1 && labels[i] == 0;
    r.tn += preds[i] == 0 && labels[i] == 0;
    r.fn += preds[i] == 0 && labels[i] == 1;
  }
  r.n_samples = static_cast<std::int64_t>(preds.size());
  r.accuracy = binary_accuracy(preds, labels);
  r.f1 = f1_score(preds, labels);
  r.auc = auc_roc(scores, labels);
  return r;
}

MetricsReport evaluate_bundles(const IntentModel& model, const std::vector<FeatureBundle>& bundles,
                               double threshold) {
  if (bundles.empty()) throw ConfigError("evaluation needs at least one window");
  std::vector<int> labels;
  labels.reserve(bundles.size());
  for (const FeatureBundle& b : bundles) labels.push_back(b.label);
  MetricsReport r = metrics_from_scores(predict_scores(model, bundles), labels, threshold);
  r.parameter_count = model.parameter_count();
  r.config_fingerprint = config_fingerprint(model.config());
  return r;
}

MetricsReport evaluate(const IntentModel& model, const std::vector<ObservationWindow>& windows,
                       const NormStats& stats, FrameSource* frames, double threshold) {
  if (windows.empty()) throw ConfigError("evaluation needs at least one window");
  std::vector<FeatureBundle> bundles;
  bundles.reserve(windows.size());
  for (const ObservationWindow& w : windows)
    bundles.push_back(assemble_bundle(w, stats, model.config().mask, model.config().prep, frames));
  return evaluate_bundles(model, bundles, threshold);
}

double measure_throughput(const IntentModel& model, const std::vector<FeatureBundle>& batch,
                          int n_warmup, int n_trials) {
  if (batch.empty()) throw ConfigError("throughput needs at least one bundle");
  if (n_trials < 1) throw ConfigError("throughput needs at least one trial");
  using clock = std::chrono::steady_clock;
  const auto run_batch = [&] {
    for (const FeatureBundle& b : batch) model.forward(b, Mode::kEval);
  };
  for (int i = 0; i < n_warmup; ++i) run_batch();
  std::vector<double> rates;
  rates.reserve(static_cast<std::size_t>(n_trials));
  for (int i = 0; i < n_trials; ++i) {
    const auto t0 = clock::now();
    run_batch();
    const double dt = std::chrono::duration<double>(clock::now() - t0).count();
    rates.push_back(static_cast<double>(batch.size()) / std::max(dt, 1e-12));
  }
  std::sort(rates.begin(), rates.end());
  const std::size_t mid = rates.size() / 2;
  return rates.size() % 2 == 1 ? rates[mid] : 0.5 * (rates[mid - 1] + rates[mid]);
}

}  // namespace intent
