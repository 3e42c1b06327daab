#include "dsi/apps/dqn.hpp"

#include <deque>

#include "dsi/grid/policies.hpp"
#include "dsi/nn/adam.hpp"
#include "dsi/nn/layers.hpp"

namespace dsi::apps {

int adaptive_lookahead(const std::vector<float>& window) {
  if (window.empty()) return 1;
  int best = 0;
  for (int i = 1; i < static_cast<int>(window.size()); ++i)
    if (window[i] > window[best]) best = i;
  return best + 1;
}

double nstep_target(const std::vector<float>& rewards, size_t j, int n,
                    double gamma, double bootstrap_q) {
  if (j >= rewards.size()) throw ContractViolation("transition index past end");
  if (n < 1) throw ContractViolation("lookahead must be >= 1");
  const size_t len = rewards.size();
  const int n_eff = static_cast<int>(std::min<size_t>(n, len - j));
  double target = 0, g = 1;
  for (int i = 0; i < n_eff; ++i) {
    target += g * rewards[j + i];
    g *= gamma;
  }
  if (j + n_eff < len) target += g * bootstrap_q;  // else terminal: no bootstrap
  return target;
}

void DqnConfig::validate() const {
  if (n_max < 1 || fixed_n < 1 || fixed_n > n_max)
    throw std::invalid_argument("lookahead out of [1, n_max]");
  if (batch_size < 1 || replay_capacity < 1 || total_steps < 1 ||
      target_sync < 1 || learning_rate <= 0)
    throw std::invalid_argument("bad dqn config");
  env.validate();
}

nlohmann::json DqnConfig::to_json() const {
  return {{"env", env.to_json()},
          {"n_max", n_max},
          {"mode", mode == LookaheadMode::kAdaptive
                       ? "adaptive"
                       : (mode == LookaheadMode::kFixed ? "fixed" : "random")},
          {"fixed_n", fixed_n},
          {"gamma", gamma},
          {"replay_capacity", replay_capacity},
          {"batch_size", batch_size},
          {"target_sync", target_sync},
          {"eps_start", eps_start},
          {"eps_end", eps_end},
          {"eps_decay_steps", eps_decay_steps},
          {"total_steps", total_steps},
          {"warmup_episodes", warmup_episodes},
          {"learning_rate", learning_rate},
          {"demo_start", demo_start},
          {"demo_end", demo_end},
          {"demo_decay_steps", demo_decay_steps},
          {"eval_every", eval_every},
          {"eval_episodes", eval_episodes}};
}

DqnConfig DqnConfig::from_json(const nlohmann::json& j) {
  DqnConfig c;
  if (j.contains("env")) c.env = grid::EnvConfig::from_json(j.at("env"));
  c.n_max = j.value("n_max", c.n_max);
  if (j.contains("mode")) {
    const std::string m = j.at("mode");
    if (m == "adaptive")
      c.mode = LookaheadMode::kAdaptive;
    else if (m == "fixed")
      c.mode = LookaheadMode::kFixed;
    else if (m == "random")
      c.mode = LookaheadMode::kRandom;
    else
      throw std::invalid_argument("unknown lookahead mode: " + m);
  }
  c.fixed_n = j.value("fixed_n", c.fixed_n);
  c.gamma = j.value("gamma", c.gamma);
  c.replay_capacity = j.value("replay_capacity", c.replay_capacity);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.target_sync = j.value("target_sync", c.target_sync);
  c.eps_start = j.value("eps_start", c.eps_start);
  c.eps_end = j.value("eps_end", c.eps_end);
  c.eps_decay_steps = j.value("eps_decay_steps", c.eps_decay_steps);
  c.total_steps = j.value("total_steps", c.total_steps);
  c.warmup_episodes = j.value("warmup_episodes", c.warmup_episodes);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.demo_start = j.value("demo_start", c.demo_start);
  c.demo_end = j.value("demo_end", c.demo_end);
  c.demo_decay_steps = j.value("demo_decay_steps", c.demo_decay_steps);
  c.eval_every = j.value("eval_every", c.eval_every);
  c.eval_episodes = j.value("eval_episodes", c.eval_episodes);
  c.validate();
  return c;
}

namespace {

// Small conv encoder + plain Q head over a single 7x7x3 observation.
class QNet {
 public:
  explicit QNet(uint64_t seed) {
    Rng rng(seed);
    conv1_.init({3, 16, 1, 3, 3, 1, 2, 2, 0, 1, 1}, "q.conv1", rng);
    conv2_.init({16, 32, 1, 3, 3, 1, 2, 2, 0, 1, 1}, "q.conv2", rng);
    fc1_.init(32 * 2 * 2, 64, "q.fc1", rng);
    fc2_.init(64, grid::kNumActions, "q.fc2", rng);
  }

  struct Cache {
    nn::ConvNd<float>::Cache c1, c2;
    std::vector<uint8_t> r1, r2, r3;
    nn::Linear<float>::Cache f1, f2;
  };

  std::vector<float> forward(const std::vector<float>& x, Cache* cache) const {
    std::vector<float> y = conv1_.forward(x, 1, 7, 7, &cache->c1);
    nn::relu_forward(y, &cache->r1);
    y = conv2_.forward(y, 1, 4, 4, &cache->c2);
    nn::relu_forward(y, &cache->r2);
    y = fc1_.forward(y, 1, &cache->f1);
    nn::relu_forward(y, &cache->r3);
    return fc2_.forward(y, 1, &cache->f2);
  }

  void backward(const std::vector<float>& dq, const Cache& cache) {
    std::vector<float> d = fc2_.backward(dq, cache.f2, true);
    nn::relu_backward(d, cache.r3);
    d = fc1_.backward(d, cache.f1, true);
    nn::relu_backward(d, cache.r2);
    d = conv2_.backward(d, cache.c2, true);
    nn::relu_backward(d, cache.r1);
    conv1_.backward(d, cache.c1, true);
  }

  nn::ParamRefs<float> params() {
    nn::ParamRefs<float> out;
    for (auto* p : conv1_.params()) out.push_back(p);
    for (auto* p : conv2_.params()) out.push_back(p);
    for (auto* p : fc1_.params()) out.push_back(p);
    for (auto* p : fc2_.params()) out.push_back(p);
    return out;
  }

  void copy_from(QNet& other) {
    auto dst = params();
    auto src = other.params();
    for (size_t i = 0; i < dst.size(); ++i) dst[i]->value = src[i]->value;
  }

 private:
  nn::ConvNd<float> conv1_, conv2_;
  nn::Linear<float> fc1_, fc2_;
};

std::vector<float> obs_input(const core::FrameTensor& obs) {
  // [h, w, c] bytes -> [c, 1, h, w] floats.
  std::vector<float> x(obs.data.size());
  const int hw = static_cast<int>(obs.h * obs.w);
  for (int i = 0; i < hw; ++i)
    for (int c = 0; c < obs.c; ++c)
      x[c * hw + i] = obs.data[i * obs.c + c] / 255.0f;
  return x;
}

struct StoredEpisode {
  std::vector<std::vector<float>> obs;  // model inputs per step
  std::vector<std::vector<uint8_t>> raw;  // raw frames for the detector
  std::vector<int> actions;
  std::vector<float> rewards;
  std::vector<float> confidence;  // detector, adaptive mode
};

int greedy_action(QNet& q, const std::vector<float>& x) {
  QNet::Cache c;
  const std::vector<float> qv = q.forward(x, &c);
  int best = 0;
  for (int a = 1; a < grid::kNumActions; ++a)
    if (qv[a] > qv[best]) best = a;
  return best;
}

double run_greedy(QNet& q, const grid::EnvConfig& env, uint64_t seed) {
  grid::GridState s = grid::reset(env, seed);
  double ret = 0;
  while (!s.done) {
    const int a = greedy_action(q, obs_input(grid::observe(s)));
    grid::StepResult res = grid::step(s, static_cast<grid::Action>(a));
    ret += res.reward;
    s = std::move(res.state);
  }
  return ret;
}

}  // namespace

DqnResult dqn_train(const DqnConfig& cfg, nn::Model<float>* detector,
                    uint64_t seed) {
  cfg.validate();
  if (cfg.mode == LookaheadMode::kAdaptive && !detector)
    throw std::invalid_argument("adaptive mode needs a detector");

  QNet q(mix_seed(seed, 0x9a));
  QNet target(mix_seed(seed, 0x9a));
  target.copy_from(q);
  nn::AdamW<float> opt;
  nn::AdamW<float>::Config oc;
  oc.lr = cfg.learning_rate;
  oc.weight_decay = 0;
  opt.init(q.params(), oc);

  Rng rng(mix_seed(seed, 0xd9));
  std::deque<StoredEpisode> replay;
  int64_t n_transitions = 0;

  DqnResult result;
  int env_step = 0, opt_step = 0, episode_index = 0;

  auto store_episode = [&](StoredEpisode ep) {
    if (cfg.mode == LookaheadMode::kAdaptive && !ep.obs.empty()) {
      core::Episode e;
      e.frames.t = static_cast<int64_t>(ep.raw.size());
      e.frames.h = grid::kViewSize;
      e.frames.w = grid::kViewSize;
      e.frames.c = 3;
      for (const auto& f : ep.raw)
        e.frames.data.insert(e.frames.data.end(), f.begin(), f.end());
      e.validity.assign(ep.raw.size(), 1);
      e.rewards = ep.rewards;
      const core::Mask m = nn::detector_forward(*detector, e);
      ep.confidence = m.values;
    }
    n_transitions += static_cast<int64_t>(ep.actions.size());
    replay.push_back(std::move(ep));
    while (static_cast<int>(replay.size()) > cfg.replay_capacity) {
      n_transitions -= static_cast<int64_t>(replay.front().actions.size());
      replay.pop_front();
    }
  };

  auto learn_step = [&]() {
    if (replay.empty() || n_transitions < cfg.batch_size) return;
    opt.zero_grad();
    for (int b = 0; b < cfg.batch_size; ++b) {
      // Uniform over stored transitions.
      int64_t pick = static_cast<int64_t>(rng.below(n_transitions));
      size_t ei = 0;
      while (pick >= static_cast<int64_t>(replay[ei].actions.size())) {
        pick -= static_cast<int64_t>(replay[ei].actions.size());
        ++ei;
      }
      const StoredEpisode& ep = replay[ei];
      const size_t j = static_cast<size_t>(pick);
      const size_t len = ep.actions.size();

      int n = 1;
      switch (cfg.mode) {
        case LookaheadMode::kFixed:
          n = cfg.fixed_n;
          break;
        case LookaheadMode::kRandom:
          n = 1 + static_cast<int>(rng.below(cfg.n_max));
          break;
        case LookaheadMode::kAdaptive: {
          const int avail =
              std::min<int>(cfg.n_max, static_cast<int>(len - 1 - j));
          std::vector<float> window;
          for (int o = 1; o <= avail; ++o)
            window.push_back(ep.confidence[j + o]);
          n = adaptive_lookahead(window);
          break;
        }
      }
      const int n_eff = static_cast<int>(std::min<size_t>(n, len - j));
      double bootstrap = 0;
      if (j + n_eff < len) {
        QNet::Cache tc;
        const std::vector<float> tq = target.forward(ep.obs[j + n_eff], &tc);
        bootstrap = *std::max_element(tq.begin(), tq.end());
      }
      const double y = nstep_target(ep.rewards, j, n, cfg.gamma, bootstrap);

      QNet::Cache qc;
      const std::vector<float> qv = q.forward(ep.obs[j], &qc);
      const double td = qv[ep.actions[j]] - y;
      std::vector<float> dq(grid::kNumActions, 0.0f);
      dq[ep.actions[j]] =
          static_cast<float>(2.0 * td / cfg.batch_size);
      q.backward(dq, qc);
    }
    opt.step();
    ++opt_step;
    if (opt_step % cfg.target_sync == 0) target.copy_from(q);
  };

  while (env_step < cfg.total_steps) {
    const uint64_t ep_seed = mix_seed(seed, 0xe90000 + episode_index);
    grid::GridState s = grid::reset(cfg.env, ep_seed);
    grid::OptimalPolicy demo;
    demo.begin_episode(s);
    StoredEpisode ep;
    double ep_return = 0;
    while (!s.done && env_step < cfg.total_steps) {
      const core::FrameTensor obs = grid::observe(s);
      ep.raw.push_back(obs.data);
      ep.obs.push_back(obs_input(obs));

      const double frac_eps =
          std::min(1.0, static_cast<double>(env_step) / cfg.eps_decay_steps);
      const double eps =
          cfg.eps_start + frac_eps * (cfg.eps_end - cfg.eps_start);
      const double frac_demo =
          std::min(1.0, static_cast<double>(env_step) / cfg.demo_decay_steps);
      const double demo_p =
          cfg.demo_start + frac_demo * (cfg.demo_end - cfg.demo_start);

      int a;
      if (rng.uniform() < eps) {
        a = rng.uniform() < demo_p
                ? static_cast<int>(demo.act(s))
                : static_cast<int>(rng.below(grid::kNumActions));
      } else {
        a = greedy_action(q, ep.obs.back());
      }
      grid::StepResult res = grid::step(s, static_cast<grid::Action>(a));
      ep.actions.push_back(a);
      ep.rewards.push_back(res.reward);
      ep_return += res.reward;
      s = std::move(res.state);
      ++env_step;

      if (episode_index >= cfg.warmup_episodes) learn_step();
      if (env_step % cfg.eval_every == 0) {
        double acc = 0;
        for (int i = 0; i < cfg.eval_episodes; ++i)
          acc += run_greedy(q, cfg.env,
                            mix_seed(seed, 0xe7a000 + env_step + i));
        result.eval_curve.emplace_back(env_step, acc / cfg.eval_episodes);
      }
    }
    if (!ep.actions.empty()) store_episode(std::move(ep));
    result.episode_returns.push_back(ep_return);
    ++episode_index;
  }

  if (result.eval_curve.empty()) {
    double acc = 0;
    for (int i = 0; i < cfg.eval_episodes; ++i)
      acc += run_greedy(q, cfg.env, mix_seed(seed, 0xe7a000 + i));
    result.eval_curve.emplace_back(env_step, acc / cfg.eval_episodes);
  }
  result.final_return = result.eval_curve.back().second;
  return result;
}

}  // namespace dsi::apps
