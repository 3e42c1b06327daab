#pragma once

#include <memory>
#include <optional>

#include "dsi/grid/planner.hpp"

namespace dsi::grid {

// Episode-scoped decision maker. Implementations may keep internal state
// (cached plans, phase flags); begin_episode resets it.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual void begin_episode(const GridState& s0) {}
  virtual Action act(const GridState& s) = 0;
  virtual int id() const = 0;
};

// Optimal shortest-path policy. Caches its plan and replans only when the
// observed state diverges from the predicted one.
class OptimalPolicy : public Policy {
 public:
  void begin_episode(const GridState& s0) override;
  Action act(const GridState& s) override;
  int id() const override { return 0; }

 private:
  std::vector<Action> plan_;
  size_t pos_ = 0;
  std::optional<GridState> expected_;
};

// Optimal until the key is picked up, then detours through a fixed decoy
// room for at least `decoy_steps` steps before resuming the optimal plan.
class PolicyB : public Policy {
 public:
  explicit PolicyB(int decoy_steps = 3) : decoy_steps_(decoy_steps) {}
  void begin_episode(const GridState& s0) override;
  Action act(const GridState& s) override;
  int id() const override { return 1; }

  // The room PolicyB detours into: the lowest-index room that is neither
  // locked nor holds the key.
  static int decoy_room_index(const GridState& s0);
  static bool in_room(const GridState& s, int room_index, Pos pos);
  static Pos room_center(const GridState& s, int room_index);

 private:
  int decoy_steps_;
  int decoy_room_ = -1;
  Pos decoy_target_;
  int steps_inside_ = 0;
  bool decoy_done_ = false;
  OptimalPolicy optimal_;
  std::vector<Action> decoy_plan_;
  size_t decoy_pos_ = 0;
  std::optional<GridState> expected_;
};

// Purposeful failure: tours the key room (without picking the key up),
// walks to the locked door and tries it, then settles into a random
// harmless room and wanders. Mirrors the successful route everywhere
// except at the decision points that actually matter.
// Tour legs replan every step, so epsilon-jitter matching the successful
// trajectories' exploration noise does not derail them.
class DecoyPolicy : public Policy {
 public:
  DecoyPolicy(double epsilon, uint64_t rng_seed)
      : epsilon_(epsilon), rng_(rng_seed) {}
  void begin_episode(const GridState& s0) override;
  Action act(const GridState& s) override;
  int id() const override { return 3; }

 private:
  double epsilon_;
  Rng rng_;
  int phase_ = 0;
  int decoy_room_ = -1;
};

// With probability epsilon a uniformly random action, else the optimal one.
class ExploratoryPolicy : public Policy {
 public:
  ExploratoryPolicy(double epsilon, uint64_t rng_seed)
      : epsilon_(epsilon), rng_(rng_seed) {}
  void begin_episode(const GridState& s0) override;
  Action act(const GridState& s) override;
  int id() const override { return 2; }

 private:
  double epsilon_;
  Rng rng_;
  OptimalPolicy optimal_;
};

// Stateless single-step variants of the scripted policies.
Action exploratory_action(const GridState& s, double epsilon, Rng& rng);

}  // namespace dsi::grid
