#include "intent/ablation.hpp"

#include <algorithm>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace intent {

std::vector<FeatureMask> default_ablation_masks() {
  const char* tokens[] = {"I",  "B",   "P",   "S",   "PS",  "BS",  "IS", "BP",
                          "IP", "BPS", "IBP", "IPS", "IBS", "IB",  "IBPS"};
  std::vector<FeatureMask> masks;
  masks.reserve(15);
  for (const char* t : tokens) masks.push_back(parse_mask(t));
  return masks;
}

namespace {

std::string fmt3(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(3) << v;
  return os.str();
}

std::string one_line(std::string s) {
  for (char& c : s)
    if (c == '\t' || c == '\n' || c == '\r') c = ' ';
  return s;
}

}  // namespace

std::vector<AblationRow> run_ablation(const ModelConfig& base, const TrainConfig& tc,
                                      const DatasetSplit& split, FrameSource* frames,
                                      const std::vector<FeatureMask>& masks,
                                      const std::vector<std::uint64_t>& seeds) {
  if (masks.empty()) throw ConfigError("ablation needs at least one mask");
  if (seeds.empty()) throw ConfigError("ablation needs at least one seed");
  if (split.train.empty() || split.val.empty() || split.test.empty())
    throw ConfigError("ablation needs non-empty train, val and test splits");
  for (const FeatureMask& m : masks)
    if (!m.any()) throw ConfigError("ablation mask enables no channel");

  const double class_weight = compute_class_weight(split.train);
  const bool any_speed = std::any_of(masks.begin(), masks.end(),
                                     [](const FeatureMask& m) { return m.speed; });
  const NormStats stats = any_speed ? compute_norm_stats(split.train) : NormStats{};

  std::vector<AblationRow> rows;
  rows.reserve(masks.size());
  for (const FeatureMask& mask : masks) {
    AblationRow row;
    row.mask = mask;
    try {
      ModelConfig cfg = base;
      cfg.mask = mask;
      std::vector<FeatureBundle> tb, vb, eb;
      tb.reserve(split.train.size());
      vb.reserve(split.val.size());
      eb.reserve(split.test.size());
      for (const ObservationWindow& w : split.train)
        tb.push_back(assemble_bundle(w, stats, mask, cfg.prep, frames));
      for (const ObservationWindow& w : split.val)
        vb.push_back(assemble_bundle(w, stats, mask, cfg.prep, frames));
      for (const ObservationWindow& w : split.test)
        eb.push_back(assemble_bundle(w, stats, mask, cfg.prep, frames));

      for (std::uint64_t seed : seeds) {
        AblationCell cell;
        cell.seed = seed;
        try {
          IntentModel model(cfg, seed);
          TrainConfig run_tc = tc;
          run_tc.seed = seed;
          train_on_bundles(model, run_tc, tb, vb, class_weight, stats);
          cell.metrics = evaluate_bundles(model, eb);
        } catch (const Error& e) {
          cell.failed = true;
          cell.error = e.what();
        }
        row.cells.push_back(std::move(cell));
      }
    } catch (const Error& e) {
      // setup for this mask failed; every seed inherits the reason
      row.cells.clear();
      for (std::uint64_t seed : seeds) row.cells.push_back({seed, true, e.what(), {}});
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_ablation_table(std::ostream& os, const std::vector<AblationRow>& rows) {
  os << "imgs\tbbs\tpose\tspeed\tseed\tacc\tauc\tf1\tnote\n";
  for (const AblationRow& row : rows) {
    const std::string flags = msg(row.mask.images ? 1 : 0, '\t', row.mask.boxes ? 1 : 0, '\t',
                                  row.mask.pose ? 1 : 0, '\t', row.mask.speed ? 1 : 0, '\t');
    double sum_acc = 0, sum_auc = 0, sum_f1 = 0;
    double min_acc = 1e300, max_acc = -1e300, min_auc = 1e300, max_auc = -1e300;
    double min_f1 = 1e300, max_f1 = -1e300;
    int ok = 0;
    for (const AblationCell& c : row.cells) {
      os << flags << c.seed << '\t';
      if (c.failed) {
        os << "-\t-\t-\t" << one_line(c.error) << '\n';
        continue;
      }
      os << fmt3(c.metrics.accuracy) << '\t' << fmt3(c.metrics.auc) << '\t' << fmt3(c.metrics.f1)
         << "\t\n";
      ++ok;
      sum_acc += c.metrics.accuracy;
      sum_auc += c.metrics.auc;
      sum_f1 += c.metrics.f1;
      min_acc = std::min(min_acc, c.metrics.accuracy);
      max_acc = std::max(max_acc, c.metrics.accuracy);
      min_auc = std::min(min_auc, c.metrics.auc);
      max_auc = std::max(max_auc, c.metrics.auc);
      min_f1 = std::min(min_f1, c.metrics.f1);
      max_f1 = std::max(max_f1, c.metrics.f1);
    }
    if (ok == 0) {
      os << flags << "mean\t-\t-\t-\tall seeds failed\n";
      os << flags << "range\t-\t-\t-\t\n";
      continue;
    }
    os << flags << "mean\t" << fmt3(sum_acc / ok) << '\t' << fmt3(sum_auc / ok) << '\t'
       << fmt3(sum_f1 / ok) << "\t\n";
    os << flags << "range\t" << fmt3(max_acc - min_acc) << '\t' << fmt3(max_auc - min_auc) << '\t'
       << fmt3(max_f1 - min_f1) << "\t\n";
  }
}

}  // namespace intent
