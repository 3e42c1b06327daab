#pragma once

#include "dsi/core/ops.hpp"
#include "dsi/grid/policies.hpp"

namespace dsi::grid {

// Runs one episode: frames are stacked observe() outputs; discrete mode
// labels 1 on reach_goal else 0, continuous mode labels the discounted
// return.
core::Episode rollout(Policy& policy, const EnvConfig& cfg, uint64_t seed,
                      double gamma,
                      core::LabelKind label_kind = core::LabelKind::kDiscrete);

// Marks 1 at t in [t_e - window, t_e] for every pickup-key,
// open-door-with-key, and open-locked-door event.
std::vector<uint8_t> annotate_critical(const core::Episode& e, int window = 1);

struct GenConfig {
  EnvConfig env;
  int n_success = 1200;
  int n_fail = 1200;
  uint64_t seed = 0;
  double gamma = 0.99;
  // Mixture of optimal vs exploratory trajectories among successes.
  double optimal_fraction = 0.5;
  double exploratory_eps = 0.2;
  // Fail episodes: truncated at a seeded step budget; a decoy_fraction of
  // them walk purposefully into a wrong room, the rest near-randomly.
  double fail_eps = 0.9;
  double decoy_fraction = 0.5;
  int fail_min_steps = 20;
  int fail_max_steps = 40;

  nlohmann::json to_json() const;
  static GenConfig from_json(const nlohmann::json& j);
};

// Grid World-S analogue: success/fail episodes with discrete labels.
core::Dataset generate_dataset(const GenConfig& gen);

// Grid World-M analogue: episodes from the optimal policy (label 0) and
// PolicyB (label 1); labels are policy ids.
core::Dataset generate_policy_dataset(const GenConfig& gen, int per_policy);

// Reconstructs the per-step (pre-action) environment states of a generated
// episode by re-running its policy with the generator's seeding conventions;
// verified against the stored frames. Fails with a contract violation when
// the episode did not come from this generator/config.
std::vector<GridState> replay_states(const GenConfig& gen,
                                     const core::Episode& e);

}  // namespace dsi::grid
