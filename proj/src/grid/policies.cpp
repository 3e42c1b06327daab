#include "dsi/grid/policies.hpp"

namespace dsi::grid {

namespace {

struct RoomRect {
  int x0, y0, x1, y1;
};

RoomRect room_rect(const GridState& s, int room_index) {
  const int row = room_index / 2;
  const int col = room_index % 2;
  const int y0 = 1 + row * (s.room_h + 1);
  RoomRect r;
  r.y0 = y0;
  r.y1 = y0 + s.room_h - 1;
  if (col == 0) {
    r.x0 = 1;
    r.x1 = s.corridor_x - 2;
  } else {
    r.x0 = s.corridor_x + 2;
    r.x1 = s.size - 2;
  }
  return r;
}

int room_of(const GridState& s, Pos p) {
  for (int r = 0; r < s.n_room_rows * 2; ++r) {
    const RoomRect rect = room_rect(s, r);
    if (p.x >= rect.x0 && p.x <= rect.x1 && p.y >= rect.y0 && p.y <= rect.y1)
      return r;
  }
  return -1;
}

}  // namespace

void OptimalPolicy::begin_episode(const GridState&) {
  plan_.clear();
  pos_ = 0;
  expected_.reset();
}

Action OptimalPolicy::act(const GridState& s) {
  if (!expected_ || !(s == *expected_) || pos_ >= plan_.size()) {
    plan_ = plan_optimal_path(s);
    pos_ = 0;
  }
  const Action a = plan_[pos_++];
  expected_ = step(s, a).state;
  return a;
}

int PolicyB::decoy_room_index(const GridState& s0) {
  const int key_room = room_of(s0, s0.key_cell);
  for (int r = 0; r < s0.n_room_rows * 2; ++r) {
    if (r != s0.locked_door_index && r != key_room) return r;
  }
  throw PlanningError("no decoy room available");
}

bool PolicyB::in_room(const GridState& s, int room_index, Pos pos) {
  return room_of(s, pos) == room_index;
}

Pos PolicyB::room_center(const GridState& s, int room_index) {
  const RoomRect r = room_rect(s, room_index);
  return {(r.x0 + r.x1) / 2, (r.y0 + r.y1) / 2};
}

void PolicyB::begin_episode(const GridState& s0) {
  decoy_room_ = decoy_room_index(s0);
  decoy_target_ = room_center(s0, decoy_room_);
  steps_inside_ = 0;
  decoy_done_ = false;
  optimal_.begin_episode(s0);
  decoy_plan_.clear();
  decoy_pos_ = 0;
  expected_.reset();
}

Action PolicyB::act(const GridState& s) {
  if (!s.carrying_key || decoy_done_) return optimal_.act(s);

  if (in_room(s, decoy_room_, s.agent)) ++steps_inside_;
  if (steps_inside_ > decoy_steps_) {
    decoy_done_ = true;
    return optimal_.act(s);
  }

  Action a;
  if (s.agent == decoy_target_) {
    // Arrived early: idle in place until enough steps were spent inside.
    a = Action::kTurnLeft;
  } else {
    if (!expected_ || !(s == *expected_) || decoy_pos_ >= decoy_plan_.size()) {
      decoy_plan_ = plan_path_to_cell(s, decoy_target_);
      decoy_pos_ = 0;
    }
    a = decoy_plan_[decoy_pos_++];
  }
  expected_ = step(s, a).state;
  return a;
}

void DecoyPolicy::begin_episode(const GridState& s0) {
  const int key_room = room_of(s0, s0.key_cell);
  std::vector<int> candidates;
  for (int r = 0; r < s0.n_room_rows * 2; ++r)
    if (r != s0.locked_door_index && r != key_room) candidates.push_back(r);
  if (candidates.empty()) throw PlanningError("no decoy room available");
  decoy_room_ = candidates[rng_.below(candidates.size())];
  phase_ = 0;
}

Action DecoyPolicy::act(const GridState& s) {
  if (rng_.uniform() < epsilon_) {
    const auto a = static_cast<Action>(rng_.below(kNumActions));
    // Jitter must never pick the key up; that would defeat the tour.
    if (step(s, a).event != EventKind::kPickupKey) return a;
  }
  while (true) {
    switch (phase_) {
      case 0: {  // visit the key room, stopping next to the key
        Pos target = PolicyB::room_center(s, room_of(s, s.key_cell));
        if (target == s.key_cell) ++target.x;
        const auto plan = plan_path_to_cell(s, target);
        if (!plan.empty()) return plan.front();
        ++phase_;
        break;
      }
      case 1: {  // approach the locked door from the corridor
        const Pos door = s.door_cells[s.locked_door_index];
        const auto plan = plan_path_to_cell(s, {s.corridor_x, door.y});
        if (!plan.empty()) return plan.front();
        ++phase_;
        break;
      }
      case 2: {  // face the locked door and try it
        const Pos door = s.door_cells[s.locked_door_index];
        const int want = door.x < s.corridor_x ? 3 : 1;
        if (s.heading != want) return Action::kTurnLeft;
        ++phase_;
        return Action::kToggle;
      }
      case 3: {  // give up: settle into the decoy room
        const auto plan =
            plan_path_to_cell(s, PolicyB::room_center(s, decoy_room_));
        if (!plan.empty()) return plan.front();
        ++phase_;
        break;
      }
      default:
        return static_cast<Action>(rng_.below(kNumActions));
    }
  }
}

void ExploratoryPolicy::begin_episode(const GridState& s0) {
  optimal_.begin_episode(s0);
}

Action ExploratoryPolicy::act(const GridState& s) {
  if (rng_.uniform() < epsilon_)
    return static_cast<Action>(rng_.range(0, kNumActions));
  return optimal_.act(s);
}

Action exploratory_action(const GridState& s, double epsilon, Rng& rng) {
  if (epsilon < 0.0 || epsilon > 1.0)
    throw std::invalid_argument("epsilon must be in [0,1]");
  if (rng.uniform() < epsilon)
    return static_cast<Action>(rng.range(0, kNumActions));
  return plan_optimal(s);
}

}  // namespace dsi::grid
