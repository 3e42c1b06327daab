#pragma once

#include <functional>

#include "dsi/eval/eval.hpp"

namespace dsi::apps {

// Fresh policy per rollout pass so stateful policies replay deterministically.
using PolicyFactory =
    std::function<std::unique_ptr<grid::Policy>(uint64_t episode_seed)>;

struct AttackOutcome {
  bool success = false;
  double ret = 0;
  core::Episode episode;
};

// Rolls out with the fixed env seed, replacing the policy's action at each
// step index in attack_steps by a uniformly random different action. An
// empty attack set reproduces the clean rollout exactly.
AttackOutcome attack_episode(grid::Policy& policy, const grid::EnvConfig& cfg,
                             uint64_t seed, const std::vector<int>& attack_steps,
                             Rng& rng);

enum class AttackMode { kCritical, kRandom };

struct AttackConfig {
  grid::EnvConfig env;
  int n_episodes = 100;
  int k = 3;  // states attacked per episode
  // Pass-2 step budget: clean episode length plus this margin, so detours
  // cost the attacked agent the episode.
  int margin = 4;
  int n_seeds = 3;
  uint64_t seed = 0;
  AttackMode mode = AttackMode::kCritical;

  nlohmann::json to_json() const;
};

struct AttackReport {
  int n_episodes = 0;
  double success_rate_clean = 0, success_rate_attacked = 0;  // percentages
  double drop = 0;      // clean - attacked, mean over seeds
  double drop_std = 0;  // across seeds
  int k = 0;
  std::string mode;
  std::string policy_desc;

  nlohmann::json to_json() const;
};

// Two-pass attack evaluation: pass 1 records the clean trajectory, the
// detector's top-k steps (or k uniform steps in random mode) become the
// attack set, pass 2 replays the seed with perturbed actions. Aggregated
// over cfg.n_seeds rng streams.
AttackReport attack_eval(nn::Model<float>* detector, const PolicyFactory& make_policy,
                         const AttackConfig& cfg,
                         const std::string& policy_desc = "");

}  // namespace dsi::apps
