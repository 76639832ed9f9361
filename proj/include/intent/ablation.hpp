#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "intent/dataset.hpp"
#include "intent/frames.hpp"
#include "intent/mask.hpp"
#include "intent/metrics.hpp"
#include "intent/training.hpp"

namespace intent {

// The 15 non-empty channel combinations of the input-importance study, in
// a fixed row order: single channels first, then pairs, triples, and the
// full set.
std::vector<FeatureMask> default_ablation_masks();

struct AblationCell {
  std::uint64_t seed = 0;
  bool failed = false;
  std::string error;
  MetricsReport metrics;
};

struct AblationRow {
  FeatureMask mask;
  std::vector<AblationCell> cells;  // one per seed, in seed order
};

// Trains one model per (mask, seed) under otherwise identical settings and
// evaluates it on the test windows. A failing run marks its cell and the
// sweep continues.
std::vector<AblationRow> run_ablation(const ModelConfig& base, const TrainConfig& tc,
                                      const DatasetSplit& split, FrameSource* frames,
                                      const std::vector<FeatureMask>& masks,
                                      const std::vector<std::uint64_t>& seeds);

// Tab-separated table: mask flags as 1/0, metrics to three decimals, one
// line per seed plus mean and range lines per mask.
void write_ablation_table(std::ostream& os, const std::vector<AblationRow>& rows);

}  // namespace intent
