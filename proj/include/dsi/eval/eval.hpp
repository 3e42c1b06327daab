#pragma once

#include <functional>
#include <map>

#include "dsi/grid/rollout.hpp"
#include "dsi/nn/model.hpp"
#include "dsi/train/trainer.hpp"

namespace dsi::eval {

// 1 where confidence >= tau; requires 0 < tau < 1.
std::vector<uint8_t> binarize_mask(const core::Mask& m, float tau);

// Indices of the k largest confidences, ascending; ties go to the earlier
// index.
std::vector<int> top_k_steps(const core::Mask& m, int k);

// Positive-class F1. Degenerate conventions: no predicted and no actual
// positives -> 1; predicted positives but none actual -> 0.
double f1_score(const std::vector<uint8_t>& pred,
                const std::vector<uint8_t>& gt);

struct EvalReport {
  double clean_acc = 0, masked_acc = 0, rmasked_acc = 0;  // percentages
  double l1_mask = 0;   // mean per-episode mask sum
  double var_mask = 0;  // mean per-episode mask variance
  std::optional<double> f1;
  nlohmann::json per_seed = nlohmann::json::array();

  nlohmann::json to_json() const;
};

using MaskFn = std::function<core::Mask(const core::Episode&)>;

// Clean / masked / reverse-masked predictor accuracy plus mask statistics.
// F1 is measured against event-derived critical-state annotations at
// threshold tau. mask_override substitutes the detector (e.g. a forced
// all-ones mask for calibration checks).
EvalReport eval_suite(nn::Model<float>& g, nn::Model<float>& d,
                      const core::Dataset& data, float tau = 0.5f,
                      const MaskFn* mask_override = nullptr);

struct CategoryStat {
  double mean = 0, stddev = 0;
  int64_t n = 0;
};

struct CategoryReport {
  // Keyed by category name; absent categories are simply missing.
  std::map<std::string, CategoryStat> categories;

  nlohmann::json to_json() const;
};

// Mean +/- std of x100-scaled detector confidences pooled over steps, per
// event category ("immediately before action" steps) plus "normal" states:
// steps whose agent position is more than 2 shortest-path moves from any
// actionable cell (next to the key or a door). Needs a replayable dataset
// (gen_config in the manifest).
CategoryReport category_report(nn::Model<float>& d, const core::Dataset& data);

struct AblationRow {
  std::string flags;
  uint64_t seed = 0;
  double f1 = 0;
  EvalReport report;
};

// Trains one detector (and predictor) per loss-flag combination per seed.
// Flags are '+'-joined subsets of {imp, com, rev}; the empty set is
// rejected. Writes confidence traces under out_dir when given.
std::vector<AblationRow> ablation_run(
    const core::Dataset& train_data, const core::Dataset& test_data,
    const std::vector<std::string>& combos, const std::vector<uint64_t>& seeds,
    const train::TrainConfig& base_cfg, const train::LossWeights& base_w,
    const std::string& out_dir = "",
    const nn::ArchitectureSpec& g_spec = nn::ArchitectureSpec::predictor_default(),
    const nn::ArchitectureSpec& d_spec = nn::ArchitectureSpec::detector_default());

}  // namespace dsi::eval
