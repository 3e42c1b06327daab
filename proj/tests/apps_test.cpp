#include <doctest.h>

#include "dsi/apps/attack.hpp"
#include "dsi/apps/compare.hpp"
#include "dsi/apps/dqn.hpp"

using namespace dsi;
using namespace dsi::apps;

namespace {

grid::EnvConfig small_env() {
  grid::EnvConfig cfg;
  cfg.grid_size = 13;
  cfg.max_steps = 60;
  return cfg;
}

core::Dataset policy_set(int per_policy, uint64_t seed) {
  grid::GenConfig gen;
  gen.env = small_env();
  gen.seed = seed;
  return grid::generate_policy_dataset(gen, per_policy);
}

}  // namespace

TEST_CASE("nstep_target arithmetic") {
  // One-step: r + gamma * maxQ.
  CHECK(nstep_target({1.0f, 2.0f, 3.0f}, 0, 1, 0.9, 5.0) ==
        doctest::Approx(1.0 + 0.9 * 5.0));
  // n = 2, gamma = 0.5, rewards (1,1,...), bootstrap 4 -> 1 + 0.5 + 0.25*4.
  CHECK(nstep_target({1.0f, 1.0f, 7.0f}, 0, 2, 0.5, 4.0) ==
        doctest::Approx(2.5));
  // Truncation at episode end drops the bootstrap term.
  CHECK(nstep_target({1.0f, 1.0f}, 0, 5, 0.5, 100.0) == doctest::Approx(1.5));
  CHECK(nstep_target({0.0f, 0.0f, 2.0f}, 2, 3, 0.9, 100.0) ==
        doctest::Approx(2.0));
}

TEST_CASE("nstep_target matches a scalar loop oracle") {
  Rng rng(5);
  for (int trial = 0; trial < 1000; ++trial) {
    const int t = 1 + static_cast<int>(rng.below(10));
    std::vector<float> r(t);
    for (auto& v : r) v = static_cast<float>(rng.uniform() * 2 - 1);
    const size_t j = rng.below(t);
    const int n = 1 + static_cast<int>(rng.below(5));
    const double gamma = rng.uniform();
    const double q = rng.uniform() * 10 - 5;

    double oracle = 0, g = 1;
    size_t i = j;
    for (int step = 0; step < n && i < r.size(); ++step, ++i) {
      oracle += g * r[i];
      g *= gamma;
    }
    if (i < r.size()) oracle += g * q;  // bootstrap only when not terminal

    CHECK(nstep_target(r, j, n, gamma, q) ==
          doctest::Approx(oracle).epsilon(1e-9));
  }
}

TEST_CASE("adaptive_lookahead picks the most critical upcoming state") {
  CHECK(adaptive_lookahead({0.1f, 0.2f, 0.9f}) == 3);
  CHECK(adaptive_lookahead({0.5f, 0.5f, 0.5f}) == 1);
  CHECK(adaptive_lookahead({0.1f, 0.2f, 0.3f, 0.4f, 0.5f}) == 5);
  CHECK(adaptive_lookahead({}) == 1);
  CHECK(adaptive_lookahead({0.7f}) == 1);

  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<float> w(rng.below(6));
    for (auto& v : w) v = static_cast<float>(rng.uniform());
    const int n = adaptive_lookahead(w);
    CHECK(n >= 1);
    CHECK(n <= 5);
    if (!w.empty()) CHECK(n <= static_cast<int>(w.size()));
  }
}

TEST_CASE("empty attack set replays the clean rollout bitwise") {
  const grid::EnvConfig cfg = small_env();
  grid::OptimalPolicy clean_policy;
  const core::Episode clean = grid::rollout(clean_policy, cfg, 12, 0.99);

  grid::OptimalPolicy attacked_policy;
  Rng rng(1);
  const AttackOutcome out = attack_episode(attacked_policy, cfg, 12, {}, rng);
  CHECK(out.success);
  CHECK(out.episode == clean);
}

TEST_CASE("attack_eval: k = 0 gives drop 0; drop grows with k") {
  nn::Model<float> d(nn::ArchitectureSpec::tiny(nn::HeadKind::kPerStepSigmoid),
                     3);
  PolicyFactory optimal = [](uint64_t) {
    return std::make_unique<grid::OptimalPolicy>();
  };
  AttackConfig cfg;
  cfg.env = small_env();
  cfg.n_episodes = 25;
  cfg.n_seeds = 2;
  cfg.seed = 5;
  cfg.mode = AttackMode::kCritical;

  cfg.k = 0;
  const AttackReport none = attack_eval(&d, optimal, cfg);
  CHECK(none.success_rate_clean == doctest::Approx(100.0));
  CHECK(none.drop == doctest::Approx(0.0));

  cfg.n_episodes = 100;
  cfg.k = 2;
  const AttackReport k2 = attack_eval(&d, optimal, cfg);
  cfg.k = 8;
  const AttackReport k8 = attack_eval(&d, optimal, cfg);
  CHECK(k8.drop >= k2.drop);
  CHECK(k2.mode == "critical");

  // Random mode needs no detector.
  cfg.k = 3;
  cfg.mode = AttackMode::kRandom;
  const AttackReport rnd = attack_eval(nullptr, optimal, cfg);
  CHECK(rnd.mode == "random");
  CHECK(rnd.n_episodes == cfg.n_episodes * cfg.n_seeds);
  CHECK(rnd.drop == doctest::Approx(rnd.success_rate_clean -
                                    rnd.success_rate_attacked));
}

TEST_CASE("merge_policy_datasets relabels by origin") {
  const core::Dataset pool = policy_set(3, 9);
  core::Dataset a, b;
  a.manifest = pool.manifest;
  b.manifest = pool.manifest;
  for (const auto& e : pool.episodes)
    (e.policy_id == 0 ? a : b).episodes.push_back(e);

  const core::Dataset merged = merge_policy_datasets(a, b);
  REQUIRE(merged.episodes.size() == 6);
  for (int i = 0; i < 3; ++i) CHECK(merged.episodes[i].return_label == 0.0f);
  for (int i = 3; i < 6; ++i) CHECK(merged.episodes[i].return_label == 1.0f);

  CHECK_THROWS(merge_policy_datasets(a, a));  // same policy on both sides
  core::Dataset empty;
  CHECK_THROWS(merge_policy_datasets(a, empty));
}

TEST_CASE("train_policy_classifier wires the merged set into the pipeline") {
  const core::Dataset pool = policy_set(4, 15);
  core::Dataset a, b;
  a.manifest = pool.manifest;
  b.manifest = pool.manifest;
  for (const auto& e : pool.episodes)
    (e.policy_id == 0 ? a : b).episodes.push_back(e);

  train::TrainConfig cfg;
  cfg.batch_size = 4;
  cfg.epochs = 1;
  cfg.seed = 3;
  const auto g_spec = nn::ArchitectureSpec::tiny(nn::HeadKind::kClassifier);
  const auto d_spec = nn::ArchitectureSpec::tiny(nn::HeadKind::kPerStepSigmoid);

  auto tr = train_policy_classifier(a, b, g_spec, d_spec, cfg,
                                    train::LossWeights{});
  REQUIRE(tr != nullptr);
  const core::Dataset merged = merge_policy_datasets(a, b);
  const eval::EvalReport rep =
      eval::eval_suite(tr->predictor(), tr->detector(), merged);
  CHECK(rep.clean_acc >= 0);
  CHECK(rep.clean_acc <= 100);
  CHECK(rep.l1_mask > 0);

  // Same seed, same inputs: the pipeline is deterministic.
  auto tr2 = train_policy_classifier(a, b, g_spec, d_spec, cfg,
                                     train::LossWeights{});
  const eval::EvalReport rep2 =
      eval::eval_suite(tr2->predictor(), tr2->detector(), merged);
  CHECK(rep2.clean_acc == rep.clean_acc);
}

TEST_CASE("dqn_train is deterministic and validates its inputs") {
  DqnConfig cfg;
  cfg.env = small_env();
  cfg.total_steps = 400;
  cfg.eval_every = 200;
  cfg.eval_episodes = 2;
  cfg.warmup_episodes = 1;
  cfg.replay_capacity = 16;
  cfg.target_sync = 50;
  cfg.eps_decay_steps = 200;
  cfg.demo_decay_steps = 200;

  cfg.mode = LookaheadMode::kAdaptive;
  CHECK_THROWS_AS(dqn_train(cfg, nullptr, 1), std::invalid_argument);

  cfg.mode = LookaheadMode::kFixed;
  const DqnResult a = dqn_train(cfg, nullptr, 1);
  const DqnResult b = dqn_train(cfg, nullptr, 1);
  CHECK(!a.episode_returns.empty());
  REQUIRE(!a.eval_curve.empty());
  CHECK(a.eval_curve == b.eval_curve);
  CHECK(a.final_return == a.eval_curve.back().second);

  nn::Model<float> d(nn::ArchitectureSpec::tiny(nn::HeadKind::kPerStepSigmoid),
                     4);
  cfg.mode = LookaheadMode::kAdaptive;
  const DqnResult c = dqn_train(cfg, &d, 1);
  CHECK(!c.eval_curve.empty());

  DqnConfig bad = cfg;
  bad.n_max = 0;
  CHECK_THROWS(dqn_train(bad, &d, 1));
}
