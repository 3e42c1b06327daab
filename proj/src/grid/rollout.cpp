#include "dsi/grid/rollout.hpp"

#include <algorithm>
#include <cstring>
#include <memory>

namespace dsi::grid {

core::Episode rollout(Policy& policy, const EnvConfig& cfg, uint64_t seed,
                      double gamma, core::LabelKind label_kind) {
  GridState state = reset(cfg, seed);
  policy.begin_episode(state);

  core::Episode e;
  e.gamma = static_cast<float>(gamma);
  e.seed = seed;
  e.policy_id = policy.id();
  e.frames.h = kViewSize;
  e.frames.w = kViewSize;
  e.frames.c = 3;

  bool reached_goal = false;
  int t = 0;
  while (!state.done) {
    const core::FrameTensor obs = observe(state);
    e.frames.data.insert(e.frames.data.end(), obs.data.begin(), obs.data.end());
    const Action a = policy.act(state);
    StepResult res = step(state, a);
    e.rewards.push_back(res.reward);
    if (res.event) {
      e.events.push_back({t, *res.event});
      if (*res.event == EventKind::kReachGoal) reached_goal = true;
    }
    state = std::move(res.state);
    ++t;
  }
  e.frames.t = t;
  e.validity.assign(t, 1);
  e.return_label = label_kind == core::LabelKind::kDiscrete
                       ? (reached_goal ? 1.0f : 0.0f)
                       : static_cast<float>(core::compute_return(e.rewards, gamma));
  return e;
}

std::vector<uint8_t> annotate_critical(const core::Episode& e, int window) {
  std::vector<uint8_t> gt(e.length(), 0);
  for (const auto& ev : e.events) {
    switch (ev.kind) {
      case EventKind::kPickupKey:
      case EventKind::kOpenDoorWithKey:
      case EventKind::kOpenLockedDoor: {
        const int lo = std::max(0, ev.time_index - window);
        for (int t = lo; t <= ev.time_index; ++t) gt[t] = 1;
        break;
      }
      default:
        break;
    }
  }
  return gt;
}

std::vector<GridState> replay_states(const GenConfig& gen,
                                     const core::Episode& e) {
  EnvConfig cfg = gen.env;
  std::unique_ptr<Policy> policy;
  switch (e.policy_id) {
    case 0:
      policy = std::make_unique<OptimalPolicy>();
      break;
    case 1:
      policy = std::make_unique<PolicyB>();
      break;
    case 2:
      if (e.return_label == 1.0f) {
        policy = std::make_unique<ExploratoryPolicy>(gen.exploratory_eps,
                                                     mix_seed(e.seed, 1));
      } else {
        cfg.max_steps = gen.fail_min_steps +
                        static_cast<int>(mix_seed(e.seed, 2) %
                                         uint64_t(gen.fail_max_steps -
                                                  gen.fail_min_steps + 1));
        policy = std::make_unique<ExploratoryPolicy>(gen.fail_eps,
                                                     mix_seed(e.seed, 3));
      }
      break;
    case 3:
      cfg.max_steps = gen.fail_min_steps +
                      static_cast<int>(mix_seed(e.seed, 2) %
                                       uint64_t(gen.fail_max_steps -
                                                gen.fail_min_steps + 1));
      policy = std::make_unique<DecoyPolicy>(gen.exploratory_eps,
                                             mix_seed(e.seed, 4));
      break;
    default:
      throw ContractViolation("unknown policy id " +
                              std::to_string(e.policy_id));
  }

  int t_valid = 0;
  while (t_valid < static_cast<int>(e.validity.size()) && e.validity[t_valid])
    ++t_valid;

  GridState state = reset(cfg, e.seed);
  policy->begin_episode(state);
  std::vector<GridState> states;
  int t = 0;
  while (!state.done) {
    if (t >= t_valid) throw ContractViolation("replay overruns episode");
    const core::FrameTensor obs = observe(state);
    if (std::memcmp(obs.data.data(), e.frames.frame(t), obs.data.size()) != 0)
      throw ContractViolation("episode does not replay at step " +
                              std::to_string(t));
    states.push_back(state);
    StepResult res = step(state, policy->act(state));
    state = std::move(res.state);
    ++t;
  }
  if (t != t_valid) throw ContractViolation("replay stops short");
  return states;
}

nlohmann::json GenConfig::to_json() const {
  return {{"env", env.to_json()},
          {"n_success", n_success},
          {"n_fail", n_fail},
          {"seed", seed},
          {"gamma", gamma},
          {"optimal_fraction", optimal_fraction},
          {"exploratory_eps", exploratory_eps},
          {"fail_eps", fail_eps},
          {"decoy_fraction", decoy_fraction},
          {"fail_min_steps", fail_min_steps},
          {"fail_max_steps", fail_max_steps}};
}

GenConfig GenConfig::from_json(const nlohmann::json& j) {
  GenConfig g;
  if (j.contains("env")) g.env = EnvConfig::from_json(j.at("env"));
  if (j.contains("n_success")) g.n_success = j.at("n_success");
  if (j.contains("n_fail")) g.n_fail = j.at("n_fail");
  if (j.contains("seed")) g.seed = j.at("seed");
  if (j.contains("gamma")) g.gamma = j.at("gamma");
  if (j.contains("optimal_fraction")) g.optimal_fraction = j.at("optimal_fraction");
  if (j.contains("exploratory_eps")) g.exploratory_eps = j.at("exploratory_eps");
  if (j.contains("fail_eps")) g.fail_eps = j.at("fail_eps");
  if (j.contains("decoy_fraction")) g.decoy_fraction = j.at("decoy_fraction");
  if (j.contains("fail_min_steps")) g.fail_min_steps = j.at("fail_min_steps");
  if (j.contains("fail_max_steps")) g.fail_max_steps = j.at("fail_max_steps");
  return g;
}

namespace {

uint64_t config_hash(const nlohmann::json& j) {
  // FNV-1a over the canonical JSON text.
  uint64_t h = 1469598103934665603ull;
  for (char c : j.dump()) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  return h;
}

void fill_manifest(core::Dataset& d, const GenConfig& gen) {
  std::map<std::string, int> counts;
  for (const auto& e : d.episodes)
    counts[std::to_string(static_cast<int>(e.return_label))]++;
  d.manifest["counts"] = counts;
  d.manifest["generator_seed"] = gen.seed;
  d.manifest["env_config_hash"] = config_hash(gen.env.to_json());
  d.manifest["gen_config"] = gen.to_json();
}

}  // namespace

core::Dataset generate_dataset(const GenConfig& gen) {
  if (gen.n_success < 1 || gen.n_fail < 0)
    throw std::invalid_argument("episode counts must be positive");
  core::Dataset d;
  d.label_kind = core::LabelKind::kDiscrete;

  constexpr int kMaxAttempts = 64;
  for (int i = 0; i < gen.n_success; ++i) {
    const bool use_optimal =
        static_cast<double>(i) < gen.optimal_fraction * gen.n_success;
    core::Episode e;
    bool ok = false;
    for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
      const uint64_t ep_seed = mix_seed(gen.seed, (uint64_t(i) << 8) | attempt);
      if (use_optimal) {
        OptimalPolicy p;
        e = rollout(p, gen.env, ep_seed, gen.gamma);
      } else {
        ExploratoryPolicy p(gen.exploratory_eps, mix_seed(ep_seed, 1));
        e = rollout(p, gen.env, ep_seed, gen.gamma);
      }
      if (e.return_label == 1.0f) {
        ok = true;
        break;
      }
    }
    if (!ok)
      throw GenerationError("could not generate a successful episode " +
                            std::to_string(i));
    d.episodes.push_back(std::move(e));
  }

  for (int i = 0; i < gen.n_fail; ++i) {
    core::Episode e;
    bool ok = false;
    for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
      const uint64_t ep_seed =
          mix_seed(gen.seed ^ 0x5afe5afeull, (uint64_t(i) << 8) | attempt);
      EnvConfig cfg = gen.env;
      cfg.max_steps =
          gen.fail_min_steps +
          static_cast<int>(mix_seed(ep_seed, 2) %
                           uint64_t(gen.fail_max_steps - gen.fail_min_steps + 1));
      const bool use_decoy =
          static_cast<double>(i) < gen.decoy_fraction * gen.n_fail;
      if (use_decoy) {
        DecoyPolicy p(gen.exploratory_eps, mix_seed(ep_seed, 4));
        e = rollout(p, cfg, ep_seed, gen.gamma);
      } else {
        ExploratoryPolicy p(gen.fail_eps, mix_seed(ep_seed, 3));
        e = rollout(p, cfg, ep_seed, gen.gamma);
      }
      if (e.return_label == 0.0f) {
        ok = true;
        break;
      }
    }
    if (!ok)
      throw GenerationError("could not generate a failing episode " +
                            std::to_string(i));
    d.episodes.push_back(std::move(e));
  }

  fill_manifest(d, gen);
  return d;
}

core::Dataset generate_policy_dataset(const GenConfig& gen, int per_policy) {
  if (per_policy < 1)
    throw std::invalid_argument("per_policy must be positive");
  core::Dataset d;
  d.label_kind = core::LabelKind::kDiscrete;

  for (int policy_id = 0; policy_id < 2; ++policy_id) {
    for (int i = 0; i < per_policy; ++i) {
      const uint64_t ep_seed =
          mix_seed(gen.seed ^ (policy_id ? 0xb0b0ull : 0), i);
      core::Episode e;
      if (policy_id == 0) {
        OptimalPolicy p;
        e = rollout(p, gen.env, ep_seed, gen.gamma);
      } else {
        PolicyB p;
        e = rollout(p, gen.env, ep_seed, gen.gamma);
      }
      e.return_label = static_cast<float>(policy_id);
      d.episodes.push_back(std::move(e));
    }
  }
  fill_manifest(d, gen);
  return d;
}

}  // namespace dsi::grid
