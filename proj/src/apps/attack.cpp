#include "dsi/apps/attack.hpp"

#include <algorithm>
#include <iostream>
#include <numeric>

namespace dsi::apps {

AttackOutcome attack_episode(grid::Policy& policy, const grid::EnvConfig& cfg,
                             uint64_t seed,
                             const std::vector<int>& attack_steps, Rng& rng) {
  grid::GridState state = grid::reset(cfg, seed);
  policy.begin_episode(state);

  AttackOutcome out;
  core::Episode& e = out.episode;
  e.seed = seed;
  e.policy_id = policy.id();
  e.frames.h = grid::kViewSize;
  e.frames.w = grid::kViewSize;
  e.frames.c = 3;

  int t = 0;
  while (!state.done) {
    const core::FrameTensor obs = grid::observe(state);
    e.frames.data.insert(e.frames.data.end(), obs.data.begin(), obs.data.end());
    grid::Action a = policy.act(state);
    if (std::find(attack_steps.begin(), attack_steps.end(), t) !=
        attack_steps.end()) {
      // Uniform over the other actions; never the original.
      int r = static_cast<int>(rng.below(grid::kNumActions - 1));
      if (r >= static_cast<int>(a)) ++r;
      a = static_cast<grid::Action>(r);
    }
    grid::StepResult res = grid::step(state, a);
    e.rewards.push_back(res.reward);
    if (res.event) {
      e.events.push_back({t, *res.event});
      if (*res.event == core::EventKind::kReachGoal) out.success = true;
    }
    state = std::move(res.state);
    ++t;
  }
  e.frames.t = t;
  e.validity.assign(t, 1);
  e.return_label = out.success ? 1.0f : 0.0f;
  out.ret = core::compute_return(e.rewards, e.gamma);
  return out;
}

nlohmann::json AttackConfig::to_json() const {
  return {{"env", env.to_json()},
          {"n_episodes", n_episodes},
          {"k", k},
          {"margin", margin},
          {"n_seeds", n_seeds},
          {"seed", seed},
          {"mode", mode == AttackMode::kCritical ? "critical" : "random"}};
}

nlohmann::json AttackReport::to_json() const {
  return {{"n_episodes", n_episodes},
          {"success_rate_clean", success_rate_clean},
          {"success_rate_attacked", success_rate_attacked},
          {"drop", drop},
          {"drop_std", drop_std},
          {"k", k},
          {"mode", mode},
          {"policy", policy_desc}};
}

AttackReport attack_eval(nn::Model<float>* detector,
                         const PolicyFactory& make_policy,
                         const AttackConfig& cfg,
                         const std::string& policy_desc) {
  if (cfg.mode == AttackMode::kCritical && !detector)
    throw std::invalid_argument("critical mode needs a detector");
  if (cfg.n_episodes < 1 || cfg.n_seeds < 1 || cfg.k < 0)
    throw std::invalid_argument("bad attack config");

  bool warned_clip = false;
  std::vector<double> clean_rates, att_rates, drops;
  for (int si = 0; si < cfg.n_seeds; ++si) {
    const uint64_t master = mix_seed(cfg.seed, si);
    int clean_ok = 0, att_ok = 0;
    for (int ep = 0; ep < cfg.n_episodes; ++ep) {
      const uint64_t ep_seed = mix_seed(master, ep);
      Rng no_rng(0);
      auto p1 = make_policy(ep_seed);
      const AttackOutcome clean =
          attack_episode(*p1, cfg.env, ep_seed, {}, no_rng);
      clean_ok += clean.success;

      if (cfg.k == 0) {
        att_ok += clean.success;
        continue;
      }
      const int t = static_cast<int>(clean.episode.length());
      const int k = std::min(cfg.k, t);
      if (k < cfg.k && !warned_clip) {
        std::cerr << "warning: k clipped to episode length " << t << "\n";
        warned_clip = true;
      }
      std::vector<int> steps;
      if (cfg.mode == AttackMode::kCritical) {
        const core::Mask m = nn::detector_forward(*detector, clean.episode);
        steps = eval::top_k_steps(m, k);
      } else {
        std::vector<int> all(t);
        std::iota(all.begin(), all.end(), 0);
        Rng pick(mix_seed(ep_seed, 0xa77ac4));
        for (int i = 0; i < k; ++i)
          std::swap(all[i], all[i + pick.below(t - i)]);
        steps.assign(all.begin(), all.begin() + k);
      }
      grid::EnvConfig tight = cfg.env;
      tight.max_steps = t + cfg.margin;
      Rng perturb_rng(mix_seed(ep_seed, 0x9e2));
      auto p2 = make_policy(ep_seed);
      const AttackOutcome att =
          attack_episode(*p2, tight, ep_seed, steps, perturb_rng);
      att_ok += att.success;
    }
    const double cr = 100.0 * clean_ok / cfg.n_episodes;
    const double ar = 100.0 * att_ok / cfg.n_episodes;
    clean_rates.push_back(cr);
    att_rates.push_back(ar);
    drops.push_back(cr - ar);
  }

  auto mean = [](const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / v.size();
  };
  AttackReport r;
  r.n_episodes = cfg.n_episodes * cfg.n_seeds;
  r.success_rate_clean = mean(clean_rates);
  r.success_rate_attacked = mean(att_rates);
  r.drop = mean(drops);
  double var = 0;
  for (double d : drops) var += (d - r.drop) * (d - r.drop);
  r.drop_std = std::sqrt(var / drops.size());
  r.k = cfg.k;
  r.mode = cfg.mode == AttackMode::kCritical ? "critical" : "random";
  r.policy_desc = policy_desc;
  return r;
}

}  // namespace dsi::apps
