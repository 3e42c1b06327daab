#pragma once

#include "dsi/nn/checkpoint.hpp"
#include "dsi/train/losses.hpp"

namespace dsi::train {

struct LossWeights {
  double lambda_s = 1.0;
  double lambda_r = 5e-3;
  double lambda_v = 2.0;
  double lambda_orth = 0.0;

  void validate() const {
    if (lambda_s < 0 || lambda_r < 0 || lambda_v < 0 || lambda_orth < 0)
      throw std::invalid_argument("loss weights must be nonnegative");
  }
  nlohmann::json to_json() const;
  static LossWeights from_json(const nlohmann::json& j);
};

enum class ReverseMode { kConfusedTarget, kNegatedLoss };

struct TrainConfig {
  double learning_rate = 1e-4;
  double weight_decay = 1e-4;
  double beta1 = 0.9, beta2 = 0.999;
  int batch_size = 16;
  int epochs = 6;
  uint64_t seed = 0;
  // confused_target needs discrete labels; negated_loss clamps at the bound
  // below and clips detector grads by global norm.
  ReverseMode reverse_mode = ReverseMode::kConfusedTarget;
  double negated_clamp = -10.0;
  double clip_norm = 10.0;
  // Predictor-phase frame dropout. Forces the predictor to learn redundant
  // evidence, so the detector cannot win by masking a single giveaway frame.
  double frame_dropout = 0.0;

  void validate() const {
    if (learning_rate <= 0 || batch_size < 1 || epochs < 1)
      throw std::invalid_argument("bad train config");
    if (frame_dropout < 0.0 || frame_dropout >= 1.0)
      throw std::invalid_argument("frame_dropout must be in [0, 1)");
  }
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

struct LossParts {
  double imp = 0, com = 0, rev = 0, orth = 0;
  double total(const LossWeights& w) const {
    return w.lambda_s * imp + w.lambda_r * com + w.lambda_v * rev +
           w.lambda_orth * orth;
  }
};

struct HistoryRow {
  int64_t step = 0;
  int epoch = 0;
  LossParts detector;
  double detector_total = 0;
  double predictor_loss = 0;
  double mask_mean = 0, mask_var = 0;
};

// Joint trainer: per batch, a detector phase (only D's weights move;
// gradients flow through G's graph) followed by a predictor phase on the
// raw unmasked episodes.
class Trainer {
 public:
  Trainer(const nn::ArchitectureSpec& g_spec, const nn::ArchitectureSpec& d_spec,
          const TrainConfig& cfg, const LossWeights& weights);

  // Batch entries are indices into `data`.
  LossParts detector_step(const core::Dataset& data,
                          const std::vector<int>& batch);
  double predictor_step(const core::Dataset& data,
                        const std::vector<int>& batch);

  // Full loop with shuffled batches, per-epoch atomic checkpoints under
  // out_dir (empty = no checkpoints), and resume from an existing state.
  std::vector<HistoryRow> train(const core::Dataset& data,
                                const std::string& out_dir);

  nn::Model<float>& predictor() { return g_; }
  nn::Model<float>& detector() { return d_; }
  const TrainConfig& config() const { return cfg_; }

  // Mask statistics of the last detector_step batch.
  double last_mask_mean() const { return mask_mean_; }
  double last_mask_var() const { return mask_var_; }

 private:
  int label_of(const core::Episode& e) const;

  TrainConfig cfg_;
  LossWeights w_;
  nn::Model<float> g_, d_;
  nn::AdamW<float> opt_g_, opt_d_;
  core::LabelKind label_kind_ = core::LabelKind::kDiscrete;
  Rng drop_rng_;
  double mask_mean_ = 0, mask_var_ = 0;
};

void save_history_csv(const std::vector<HistoryRow>& h, const std::string& path);
nlohmann::json history_to_json(const std::vector<HistoryRow>& h);

}  // namespace dsi::train
