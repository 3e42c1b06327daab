#pragma once

#include "dsi/grid/planner.hpp"
#include "dsi/grid/rollout.hpp"
#include "dsi/nn/model.hpp"

namespace dsi::apps {

// 1-based offset of the maximum confidence in the window (detector
// confidences at offsets 1..n_max ahead); ties go to the smallest offset;
// an empty window (terminal next) gives 1.
int adaptive_lookahead(const std::vector<float>& window);

// n-step return target: sum_{i=0}^{n-1} gamma^i r_{j+i} + gamma^n
// bootstrap_q; n truncates at the episode end and the bootstrap term is
// dropped there.
double nstep_target(const std::vector<float>& rewards, size_t j, int n,
                    double gamma, double bootstrap_q);

enum class LookaheadMode { kAdaptive, kFixed, kRandom };

struct DqnConfig {
  grid::EnvConfig env;
  int n_max = 5;
  LookaheadMode mode = LookaheadMode::kAdaptive;
  int fixed_n = 5;  // for kFixed
  double gamma = 0.99;
  int replay_capacity = 400;  // episodes
  int batch_size = 32;
  int target_sync = 500;  // optimizer steps between target copies
  double eps_start = 1.0, eps_end = 0.05;
  int eps_decay_steps = 25000;
  int total_steps = 50000;
  int warmup_episodes = 5;
  double learning_rate = 1e-3;
  // Planner-demonstration injection: exploration actions are replaced by
  // the planner's with this linearly decaying probability. The sparse
  // single-reward task is not learnable at desk scale from uniform
  // exploration alone.
  double demo_start = 0.5, demo_end = 0.0;
  int demo_decay_steps = 25000;
  int eval_every = 5000;  // env steps
  int eval_episodes = 20;

  void validate() const;
  nlohmann::json to_json() const;
  static DqnConfig from_json(const nlohmann::json& j);
};

struct DqnResult {
  std::vector<double> episode_returns;            // training episodes
  std::vector<std::pair<int, double>> eval_curve; // (env step, greedy return)
  double final_return = 0;                        // last eval point
};

// Multi-step DQN over egocentric observations with the lookahead-n strategy
// picked per transition. Adaptive mode runs the detector once per stored
// episode and caches per-step confidences. Single-threaded; deterministic
// given seed.
DqnResult dqn_train(const DqnConfig& cfg, nn::Model<float>* detector,
                    uint64_t seed);

}  // namespace dsi::apps
