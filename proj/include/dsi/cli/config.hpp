#pragma once

#include "dsi/apps/attack.hpp"
#include "dsi/apps/dqn.hpp"
#include "dsi/train/trainer.hpp"

namespace dsi::cli {

// Configuration problems carry the offending key path; the CLI maps these
// to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  // dataset (includes env)
  grid::GenConfig dataset;
  std::string dataset_kind = "success_fail";  // or "policy_pair"
  int per_policy = 600;
  double test_fraction = 1.0 / 6.0;

  // model
  nn::ArchitectureSpec predictor_arch = nn::ArchitectureSpec::predictor_default();
  nn::ArchitectureSpec detector_arch = nn::ArchitectureSpec::detector_default();

  // train
  train::TrainConfig train_cfg;
  train::LossWeights weights;

  // eval
  float tau = 0.5f;

  // ablation
  std::vector<std::string> ablate_combos = {"imp", "imp+com", "imp+rev",
                                            "imp+com+rev"};
  std::vector<uint64_t> ablate_seeds = {1, 2, 3};

  // sweep
  std::string sweep_param = "lambda_r";
  std::vector<double> sweep_values;

  // attack (env comes from the dataset section)
  apps::AttackConfig attack;

  // dqn (env comes from the dataset section)
  apps::DqnConfig dqn;

  struct Io {
    std::string data, out, ckpt;
  } io;

  uint64_t seed = 0;

  // Fully-resolved document; itself a valid input reproducing the run.
  nlohmann::json to_json() const;

  // Strict: unknown keys anywhere are a ConfigError with the key path.
  static RunConfig from_json(const nlohmann::json& j);

  // gridworld-s, gridworld-m, ablation, attack, dqn.
  static RunConfig preset(const std::string& name);
  static std::vector<std::string> preset_names();
};

// Loads (preset | file | {}), applies DSI_-prefixed environment overrides
// (path separator "__", values parsed as JSON when possible), then any
// overriding file keys.
RunConfig load_config(const std::string& preset_name,
                      const std::string& config_path);

// Deep-merges b into a (b wins).
nlohmann::json merge_json(nlohmann::json a, const nlohmann::json& b);

// DSI_a__b=5 -> {"a": {"b": 5}} applied over j.
nlohmann::json apply_env_overrides(nlohmann::json j);

}  // namespace dsi::cli
