#include "dsi/grid/planner.hpp"

#include <algorithm>
#include <cstring>
#include <queue>
#include <unordered_map>

namespace dsi::grid {

namespace {

constexpr int kDx[4] = {0, 1, 0, -1};
constexpr int kDy[4] = {-1, 0, 1, 0};

// Compact search node: doors are 2 bits each (0 closed, 1 open, 2 locked).
struct Node {
  uint8_t x, y, h, carry;
  uint8_t doors[6];

  uint32_t key() const {
    uint32_t k = x | (static_cast<uint32_t>(y) << 6) |
                 (static_cast<uint32_t>(h) << 12) |
                 (static_cast<uint32_t>(carry) << 14);
    for (int i = 0; i < 6; ++i)
      k |= static_cast<uint32_t>(doors[i]) << (15 + 2 * i);
    return k;
  }
};

struct StaticGrid {
  int size;
  std::vector<uint8_t> wall;  // 1 where a wall cell sits
  int door_index[64 * 64];    // -1 or index into door list
  Pos key_cell, ball_cell;
  bool key_present_initially;
};

StaticGrid make_static(const GridState& s) {
  StaticGrid g;
  g.size = s.size;
  g.wall.assign(s.size * s.size, 0);
  std::memset(g.door_index, -1, sizeof(g.door_index));
  for (int y = 0; y < s.size; ++y)
    for (int x = 0; x < s.size; ++x)
      if (s.at(x, y).kind == ObjectKind::kWall) g.wall[y * s.size + x] = 1;
  for (int i = 0; i < 6; ++i) {
    const Pos d = s.door_cells[i];
    g.door_index[d.y * 64 + d.x] = i;
  }
  g.key_cell = s.key_cell;
  g.ball_cell = s.ball_cell;
  g.key_present_initially = !s.carrying_key;
  return g;
}

Node make_node(const GridState& s) {
  Node n;
  n.x = static_cast<uint8_t>(s.agent.x);
  n.y = static_cast<uint8_t>(s.agent.y);
  n.h = static_cast<uint8_t>(s.heading);
  n.carry = s.carrying_key ? 1 : 0;
  for (int i = 0; i < 6; ++i) {
    const Pos d = s.door_cells[i];
    switch (s.at(d.x, d.y).door) {
      case DoorState::kOpen: n.doors[i] = 1; break;
      case DoorState::kLocked: n.doors[i] = 2; break;
      default: n.doors[i] = 0; break;
    }
  }
  return n;
}

// Mirrors env step() on the compact representation. Returns false when the
// action leaves the node unchanged (blocked / no-op).
bool sim_step(const StaticGrid& g, const Node& in, Action a, Node* out,
              bool* reached_goal) {
  *out = in;
  *reached_goal = false;
  const int fx = in.x + kDx[in.h];
  const int fy = in.y + kDy[in.h];
  const bool in_bounds = fx >= 0 && fy >= 0 && fx < g.size && fy < g.size;
  switch (a) {
    case Action::kTurnLeft:
      out->h = (in.h + 3) % 4;
      return true;
    case Action::kTurnRight:
      out->h = (in.h + 1) % 4;
      return true;
    case Action::kForward: {
      if (!in_bounds || g.wall[fy * g.size + fx]) return false;
      if (g.ball_cell.x == fx && g.ball_cell.y == fy) {
        out->x = fx;
        out->y = fy;
        *reached_goal = true;
        return true;
      }
      if (g.key_present_initially && !in.carry && g.key_cell.x == fx &&
          g.key_cell.y == fy)
        return false;
      const int d = g.door_index[fy * 64 + fx];
      if (d >= 0 && in.doors[d] != 1) return false;
      out->x = fx;
      out->y = fy;
      return true;
    }
    case Action::kPickup: {
      if (!in_bounds || in.carry || !g.key_present_initially) return false;
      if (g.key_cell.x == fx && g.key_cell.y == fy) {
        out->carry = 1;
        return true;
      }
      return false;
    }
    case Action::kToggle: {
      if (!in_bounds) return false;
      const int d = g.door_index[fy * 64 + fx];
      if (d < 0) return false;
      switch (in.doors[d]) {
        case 0: out->doors[d] = 1; return true;
        case 1: out->doors[d] = 0; return true;
        case 2:
          if (in.carry) {
            out->doors[d] = 1;
            return true;
          }
          return false;
      }
      return false;
    }
  }
  return false;
}

std::vector<Action> bfs(const GridState& s, std::optional<Pos> cell_target) {
  if (s.done) throw PlanningError("planning from a terminal state");
  const StaticGrid g = make_static(s);
  const Node start = make_node(s);

  auto is_goal = [&](const Node& n, bool reached_ball) {
    if (cell_target)
      return n.x == cell_target->x && n.y == cell_target->y;
    return reached_ball;
  };
  if (cell_target && start.x == cell_target->x && start.y == cell_target->y)
    return {};

  std::unordered_map<uint32_t, std::pair<uint32_t, uint8_t>> parent;
  parent.reserve(1 << 16);
  std::queue<Node> frontier;
  frontier.push(start);
  parent[start.key()] = {start.key(), 0xff};

  while (!frontier.empty()) {
    const Node cur = frontier.front();
    frontier.pop();
    for (int ai = 0; ai < kNumActions; ++ai) {
      Node next;
      bool reached_ball = false;
      if (!sim_step(g, cur, static_cast<Action>(ai), &next, &reached_ball))
        continue;
      const uint32_t nk = next.key();
      if (parent.count(nk)) continue;
      parent[nk] = {cur.key(), static_cast<uint8_t>(ai)};
      if (is_goal(next, reached_ball)) {
        std::vector<Action> plan;
        uint32_t k = nk;
        while (true) {
          auto [pk, pa] = parent.at(k);
          if (pa == 0xff) break;
          plan.push_back(static_cast<Action>(pa));
          k = pk;
        }
        std::reverse(plan.begin(), plan.end());
        return plan;
      }
      frontier.push(next);
    }
  }
  throw PlanningError("no plan reaches the goal from this state");
}

}  // namespace

std::vector<Action> plan_optimal_path(const GridState& s) {
  return bfs(s, std::nullopt);
}

std::vector<Action> plan_path_to_cell(const GridState& s, Pos target) {
  return bfs(s, target);
}

Action plan_optimal(const GridState& s) {
  const auto plan = plan_optimal_path(s);
  if (plan.empty()) throw PlanningError("already at the goal");
  return plan.front();
}

}  // namespace dsi::grid
