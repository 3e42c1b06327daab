#include <doctest.h>

#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "dsi/grid/rollout.hpp"

using namespace dsi;
using namespace dsi::grid;

namespace {

EnvConfig small_env() {
  EnvConfig cfg;
  cfg.grid_size = 13;
  cfg.max_steps = 80;
  return cfg;
}

// Compact key for the dynamic part of a state: agent pose, carrying flag,
// door states. The static layout is fixed per seed.
std::string state_key(const GridState& s) {
  std::string k = std::to_string(s.agent.x) + "," + std::to_string(s.agent.y) +
                  "," + std::to_string(s.heading) + "," +
                  std::to_string(int(s.carrying_key));
  for (const Pos& d : s.door_cells)
    k += "," + std::to_string(int(s.at(d.x, d.y).door));
  return k;
}

// Independent brute-force BFS over the environment's own transition kernel;
// returns the length of the shortest action sequence to reach_goal.
int bfs_shortest_rollout(const GridState& s0) {
  std::deque<std::pair<GridState, int>> queue{{s0, 0}};
  std::set<std::string> seen{state_key(s0)};
  while (!queue.empty()) {
    auto [s, depth] = queue.front();
    queue.pop_front();
    for (int a = 0; a < kNumActions; ++a) {
      GridState next = s;
      next.step_count = 0;  // search ignores the step budget
      StepResult res = step(next, static_cast<Action>(a));
      if (res.event == EventKind::kReachGoal) return depth + 1;
      if (res.done) continue;
      const std::string k = state_key(res.state);
      if (seen.insert(k).second) queue.push_back({res.state, depth + 1});
    }
  }
  return -1;
}

std::string file_bytes(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(is), {});
}

}  // namespace

TEST_CASE("reset is deterministic and varies the agent start") {
  const EnvConfig cfg = small_env();
  CHECK(reset(cfg, 5) == reset(cfg, 5));

  std::set<std::pair<int, int>> starts;
  for (uint64_t s = 0; s < 40; ++s) {
    GridState g = reset(cfg, s);
    starts.insert({g.agent.x, g.agent.y});
  }
  CHECK(starts.size() >= 2);
  CHECK(starts.size() <= corridor_cells(cfg).size());
}

TEST_CASE("every layout locks the ball room") {
  const EnvConfig cfg = small_env();
  for (uint64_t s = 0; s < 1000; ++s) {
    GridState g = reset(cfg, s);
    CHECK(g.at(g.ball_cell.x, g.ball_cell.y).kind == ObjectKind::kBall);
    const Pos locked = g.door_cells[g.locked_door_index];
    CHECK(g.at(locked.x, locked.y).door == DoorState::kLocked);
    CHECK(g.at(g.key_cell.x, g.key_cell.y).kind == ObjectKind::kKey);
  }
}

TEST_CASE("step semantics: no-op toggle, pickup, locked door") {
  const EnvConfig cfg = small_env();
  GridState s = reset(cfg, 0);

  // Toggle facing open space changes nothing but the step count.
  StepResult res = step(s, Action::kToggle);
  CHECK(!res.event.has_value());
  GridState expect = s;
  expect.step_count++;
  CHECK(res.state == expect);

  // Drive the optimal policy and verify the forced moves at the events.
  OptimalPolicy p;
  p.begin_episode(s);
  bool saw_pickup = false, saw_locked = false, saw_goal = false;
  for (int i = 0; i < cfg.max_steps && !s.done; ++i) {
    const Action a = p.act(s);
    if (!s.carrying_key) {
      // Adjacent to and facing the key, the planner must pick it up.
      static const int dx[] = {0, 1, 0, -1}, dy[] = {-1, 0, 1, 0};
      const int fx = s.agent.x + dx[s.heading], fy = s.agent.y + dy[s.heading];
      if (s.in_bounds(fx, fy) && s.at(fx, fy).kind == ObjectKind::kKey)
        CHECK(a == Action::kPickup);
    }
    res = step(s, a);
    if (res.event == EventKind::kPickupKey) {
      CHECK(res.state.carrying_key);
      CHECK(!saw_locked);
      saw_pickup = true;
    }
    if (res.event == EventKind::kOpenLockedDoor) {
      CHECK(saw_pickup);
      saw_locked = true;
    }
    if (res.event == EventKind::kReachGoal) {
      CHECK(saw_locked);
      saw_goal = true;
    }
    s = res.state;
  }
  CHECK(saw_goal);
  CHECK_THROWS_AS(step(s, Action::kForward), ContractViolation);
}

TEST_CASE("toggling the locked door needs the key") {
  const EnvConfig cfg = small_env();
  GridState s = reset(cfg, 3);
  const Pos locked = s.door_cells[s.locked_door_index];
  // Walk (keyless) to the corridor cell in front of the locked door.
  for (const Action a : plan_path_to_cell(s, {s.corridor_x, locked.y}))
    s = step(s, a).state;
  REQUIRE(s.agent == Pos{s.corridor_x, locked.y});
  const int want = locked.x < s.corridor_x ? 3 : 1;  // face W or E
  while (s.heading != want) s = step(s, Action::kTurnLeft).state;
  StepResult r = step(s, Action::kToggle);
  CHECK(r.event == EventKind::kTryLockedDoorWithoutKey);
  CHECK(r.state.at(locked.x, locked.y).door == DoorState::kLocked);
}

TEST_CASE("observe is pure and rotation-symmetric") {
  const EnvConfig cfg = small_env();
  GridState s = reset(cfg, 1);
  const core::FrameTensor before = observe(s);
  CHECK(observe(s) == before);
  CHECK(before.t == 1);
  CHECK(before.h == 7);
  CHECK(before.w == 7);
  CHECK(before.c == 3);

  GridState r = s;
  for (int i = 0; i < 4; ++i) r = step(r, Action::kTurnRight).state;
  CHECK(r.heading == s.heading);
  CHECK(observe(r) == before);
}

TEST_CASE("observe matches the golden fixture") {
  EnvConfig cfg;  // defaults
  const core::FrameTensor obs = observe(reset(cfg, 0));
  const std::string golden_path =
      std::string(DSI_TEST_DIR) + "/fixtures/obs_default_seed0.bin";
  const std::string golden = file_bytes(golden_path);
  REQUIRE(golden.size() == obs.data.size());
  CHECK(std::equal(golden.begin(), golden.end(),
                   reinterpret_cast<const char*>(obs.data.data())));
}

TEST_CASE("planner matches an independent exhaustive search") {
  const EnvConfig cfg = small_env();
  for (uint64_t seed : {0ull, 1ull, 2ull}) {
    GridState s = reset(cfg, seed);
    const int oracle = bfs_shortest_rollout(s);
    REQUIRE(oracle > 0);
    CHECK(static_cast<int>(plan_optimal_path(s).size()) == oracle);
  }
}

TEST_CASE("exploratory_action: eps 0 is optimal, eps 1 is uniform") {
  const EnvConfig cfg = small_env();
  GridState s = reset(cfg, 2);
  Rng rng(77);
  CHECK(exploratory_action(s, 0.0, rng) == plan_optimal(s));

  std::map<Action, int> counts;
  Rng rng2(78);
  const int n = 10000;
  for (int i = 0; i < n; ++i) counts[exploratory_action(s, 1.0, rng2)]++;
  double chi2 = 0;
  const double expected = n / 5.0;
  for (int a = 0; a < 5; ++a) {
    const double d = counts[static_cast<Action>(a)] - expected;
    chi2 += d * d / expected;
  }
  // df = 4, central 99% band.
  CHECK(chi2 > 0.297);
  CHECK(chi2 < 13.277);

  Rng ra(5), rb(5);
  for (int i = 0; i < 100; ++i)
    CHECK(exploratory_action(s, 0.5, ra) == exploratory_action(s, 0.5, rb));
}

TEST_CASE("rollout labels and lengths") {
  const EnvConfig cfg = small_env();
  OptimalPolicy p;
  core::Episode e = rollout(p, cfg, 4, 0.99);
  CHECK(e.return_label == 1.0f);
  CHECK(e.events.back().kind == EventKind::kReachGoal);
  CHECK(e.rewards.back() == 1.0f);

  EnvConfig tiny = cfg;
  tiny.max_steps = 5;
  ExploratoryPolicy rnd(1.0, 9);
  core::Episode f = rollout(rnd, tiny, 4, 0.99);
  CHECK(f.return_label == 0.0f);

  core::Episode cont =
      rollout(p, cfg, 4, 0.99, core::LabelKind::kContinuous);
  CHECK(cont.return_label ==
        doctest::Approx(core::compute_return(cont.rewards, 0.99)));
}

TEST_CASE("mean successful episode length sits near the reference") {
  GenConfig gen;
  gen.env.grid_size = 16;
  gen.env.max_steps = 96;
  gen.exploratory_eps = 0.15;
  gen.n_success = 200;
  gen.n_fail = 0;
  gen.seed = 11;
  core::Dataset d = generate_dataset(gen);
  double mean = 0;
  for (const auto& e : d.episodes) mean += e.length();
  mean /= d.episodes.size();
  CHECK(mean > 24.0);
  CHECK(mean < 40.0);
}

TEST_CASE("annotate_critical windows and monotonicity") {
  core::Episode e;
  e.frames.t = 12;
  e.rewards.assign(12, 0);
  e.validity.assign(12, 1);
  CHECK(annotate_critical(e) == std::vector<uint8_t>(12, 0));

  e.events = {{7, core::EventKind::kPickupKey}};
  std::vector<uint8_t> gt = annotate_critical(e, 1);
  for (int t = 0; t < 12; ++t) CHECK(gt[t] == (t == 6 || t == 7));

  e.events.push_back({0, core::EventKind::kOpenLockedDoor});
  e.events.push_back({8, core::EventKind::kOpenDoorWithKey});
  e.events.push_back({3, core::EventKind::kReachGoal});  // not critical
  for (int w = 0; w < 4; ++w) {
    const auto small = annotate_critical(e, w);
    const auto big = annotate_critical(e, w + 1);
    std::set<int> expect;
    for (const auto& ev : e.events) {
      if (ev.kind == core::EventKind::kReachGoal) continue;
      for (int t = std::max(0, ev.time_index - w); t <= ev.time_index; ++t)
        expect.insert(t);
    }
    int marked = 0;
    for (int t = 0; t < 12; ++t) {
      marked += small[t];
      CHECK(small[t] <= big[t]);
    }
    CHECK(marked == static_cast<int>(expect.size()));
  }
}

TEST_CASE("policy_b detours through the decoy room after the pickup") {
  const EnvConfig cfg = small_env();
  OptimalPolicy opt;
  PolicyB b;
  core::Episode eo = rollout(opt, cfg, 6, 0.99);
  core::Episode eb = rollout(b, cfg, 6, 0.99);
  CHECK(eb.return_label == 1.0f);
  CHECK(eb.length() > eo.length());

  GridState s = reset(cfg, 6);
  const int decoy = PolicyB::decoy_room_index(s);
  PolicyB b2;
  b2.begin_episode(s);
  bool picked = false, entered = false;
  while (!s.done) {
    if (picked && PolicyB::in_room(s, decoy, s.agent)) entered = true;
    StepResult r = step(s, b2.act(s));
    if (r.event == EventKind::kPickupKey) {
      CHECK(!entered);  // decoy entry strictly after pickup
      picked = true;
    }
    s = r.state;
  }
  CHECK(picked);
  CHECK(entered);
}

TEST_CASE("generate_dataset is deterministic down to the container bytes") {
  GenConfig gen;
  gen.env = small_env();
  gen.n_success = 12;
  gen.n_fail = 12;
  gen.seed = 3;
  const auto p1 = std::filesystem::temp_directory_path() / "dsi_gen_a.dsi";
  const auto p2 = std::filesystem::temp_directory_path() / "dsi_gen_b.dsi";
  core::save_dataset(generate_dataset(gen), p1.string());
  core::save_dataset(generate_dataset(gen), p2.string());
  CHECK(file_bytes(p1.string()) == file_bytes(p2.string()));
  std::remove(p1.string().c_str());
  std::remove(p2.string().c_str());
}

TEST_CASE("generated episodes replay exactly") {
  GenConfig gen;
  gen.env = small_env();
  gen.n_success = 6;
  gen.n_fail = 6;
  gen.seed = 8;
  core::Dataset d = generate_dataset(gen);
  CHECK(d.manifest["counts"]["1"] == 6);
  for (const auto& e : d.episodes) {
    // replay_states verifies each reconstructed frame against the stored one.
    const auto states = replay_states(gen, e);
    CHECK(static_cast<int64_t>(states.size()) == e.length());
  }

  core::Episode tampered = d.episodes[0];
  tampered.frames.data[0] ^= 0xff;
  CHECK_THROWS_AS(replay_states(gen, tampered), ContractViolation);
}

TEST_CASE("policy dataset labels by policy id") {
  GenConfig gen;
  gen.env = small_env();
  gen.seed = 5;
  core::Dataset d = generate_policy_dataset(gen, 5);
  REQUIRE(d.episodes.size() == 10);
  for (int i = 0; i < 10; ++i) {
    CHECK(d.episodes[i].policy_id == (i < 5 ? 0 : 1));
    CHECK(d.episodes[i].return_label == (i < 5 ? 0.0f : 1.0f));
  }
}
