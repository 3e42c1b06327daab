#include "dsi/grid/env.hpp"

#include <algorithm>

namespace dsi::grid {

namespace {

constexpr int kDx[4] = {0, 1, 0, -1};  // N, E, S, W
constexpr int kDy[4] = {-1, 0, 1, 0};

struct RoomGeom {
  int x0, y0, x1, y1;  // interior cell range, inclusive
  Pos door;            // cell in the corridor-facing wall
};

struct Geometry {
  int corridor_x;
  int room_h;
  std::vector<RoomGeom> rooms;  // index = row * 2 + col (0 = left, 1 = right)
};

Geometry base_geometry(const EnvConfig& cfg) {
  Geometry g;
  g.corridor_x = cfg.grid_size / 2;
  g.room_h = (cfg.grid_size - 1 - cfg.n_room_rows) / cfg.n_room_rows;
  for (int row = 0; row < cfg.n_room_rows; ++row) {
    const int y0 = 1 + row * (g.room_h + 1);
    const int y1 = y0 + g.room_h - 1;
    g.rooms.push_back({1, y0, g.corridor_x - 2, y1, {}});               // left
    g.rooms.push_back({g.corridor_x + 2, y0, cfg.grid_size - 2, y1, {}});  // right
  }
  return g;
}

}  // namespace

void EnvConfig::validate() const {
  if (view_size % 2 == 0 || view_size < 3)
    throw std::invalid_argument("view_size must be odd and >= 3");
  if (n_room_cols != 2)
    throw std::invalid_argument("layout requires two room columns");
  if (n_room_rows < 1) throw std::invalid_argument("need at least one room row");
  if ((grid_size - 1 - n_room_rows) % n_room_rows != 0)
    throw std::invalid_argument("grid_size does not evenly fit the room rows");
  const int room_h = (grid_size - 1 - n_room_rows) / n_room_rows;
  const int room_w = grid_size / 2 - 2;
  if (room_h < 3 || room_w < 3)
    throw std::invalid_argument("grid too small for six rooms and a corridor");
  const int n_rooms = n_room_rows * n_room_cols;
  if (static_cast<int>(door_colors.size()) < n_rooms)
    throw std::invalid_argument("need one door color per room");
  if (locked_room_index < 0 || locked_room_index >= n_rooms)
    throw std::invalid_argument("locked_room_index out of range");
  if (max_steps < 1) throw std::invalid_argument("max_steps must be positive");
}

nlohmann::json EnvConfig::to_json() const {
  return {{"grid_size", grid_size},       {"n_room_rows", n_room_rows},
          {"n_room_cols", n_room_cols},   {"view_size", view_size},
          {"max_steps", max_steps},       {"door_colors", door_colors},
          {"locked_room_index", locked_room_index}};
}

EnvConfig EnvConfig::from_json(const nlohmann::json& j) {
  EnvConfig cfg;
  if (j.contains("grid_size")) cfg.grid_size = j.at("grid_size");
  if (j.contains("n_room_rows")) cfg.n_room_rows = j.at("n_room_rows");
  if (j.contains("n_room_cols")) cfg.n_room_cols = j.at("n_room_cols");
  if (j.contains("view_size")) cfg.view_size = j.at("view_size");
  if (j.contains("max_steps")) cfg.max_steps = j.at("max_steps");
  if (j.contains("door_colors"))
    cfg.door_colors = j.at("door_colors").get<std::vector<int>>();
  if (j.contains("locked_room_index"))
    cfg.locked_room_index = j.at("locked_room_index");
  cfg.validate();
  return cfg;
}

std::vector<Pos> corridor_cells(const EnvConfig& cfg) {
  cfg.validate();
  const int cx = cfg.grid_size / 2;
  std::vector<Pos> cells;
  for (int y = 1; y < cfg.grid_size - 1; ++y) cells.push_back({cx, y});
  return cells;
}

GridState reset(const EnvConfig& cfg, uint64_t seed) {
  cfg.validate();
  const Geometry geom = base_geometry(cfg);
  const int n = cfg.grid_size;
  const int n_rooms = static_cast<int>(geom.rooms.size());

  Rng rng(seed);
  GridState s;
  s.size = n;
  s.cells.assign(n * n, Cell{});
  s.max_steps = cfg.max_steps;
  s.layout_seed = seed;
  s.corridor_x = geom.corridor_x;
  s.room_h = geom.room_h;
  s.n_room_rows = cfg.n_room_rows;

  auto set_wall = [&](int x, int y) {
    s.at(x, y) = {ObjectKind::kWall, 0, DoorState::kNone};
  };
  for (int i = 0; i < n; ++i) {
    set_wall(i, 0);
    set_wall(i, n - 1);
    set_wall(0, i);
    set_wall(n - 1, i);
  }
  // Corridor walls and the horizontal room separators.
  for (int y = 1; y < n - 1; ++y) {
    set_wall(geom.corridor_x - 1, y);
    set_wall(geom.corridor_x + 1, y);
  }
  for (int row = 1; row < cfg.n_room_rows; ++row) {
    const int wy = row * (geom.room_h + 1);
    for (int x = 1; x < geom.corridor_x - 1; ++x) set_wall(x, wy);
    for (int x = geom.corridor_x + 2; x < n - 1; ++x) set_wall(x, wy);
  }

  // Doors: one per room, in the corridor-facing wall at a seeded row.
  s.locked_door_index = cfg.locked_room_index;
  for (int r = 0; r < n_rooms; ++r) {
    const RoomGeom& room = geom.rooms[r];
    const int door_y = room.y0 + rng.range(0, geom.room_h);
    const int door_x =
        (r % 2 == 0) ? geom.corridor_x - 1 : geom.corridor_x + 1;
    const bool locked = (r == cfg.locked_room_index);
    const int color = cfg.door_colors[r];
    s.at(door_x, door_y) = {ObjectKind::kDoor, static_cast<uint8_t>(color),
                            locked ? DoorState::kLocked : DoorState::kClosed};
    s.door_cells[r] = {door_x, door_y};
  }

  // Key goes into a seeded non-locked room; ball into the locked room.
  int key_room = rng.range(0, n_rooms - 1);
  if (key_room >= cfg.locked_room_index) ++key_room;
  auto place_in_room = [&](int r) -> Pos {
    const RoomGeom& room = geom.rooms[r];
    const int x = room.x0 + rng.range(0, room.x1 - room.x0 + 1);
    const int y = room.y0 + rng.range(0, room.y1 - room.y0 + 1);
    return {x, y};
  };
  s.key_color = cfg.door_colors[cfg.locked_room_index];
  s.key_cell = place_in_room(key_room);
  s.at(s.key_cell.x, s.key_cell.y) = {ObjectKind::kKey,
                                      static_cast<uint8_t>(s.key_color),
                                      DoorState::kNone};
  s.ball_cell = place_in_room(cfg.locked_room_index);
  s.at(s.ball_cell.x, s.ball_cell.y) = {ObjectKind::kBall, 4, DoorState::kNone};

  // Agent starts in the corridor with a seeded heading.
  const auto corridor = corridor_cells(cfg);
  s.agent = corridor[rng.below(corridor.size())];
  s.heading = rng.range(0, 4);
  return s;
}

StepResult step(const GridState& s, Action a) {
  if (s.done) throw ContractViolation("step() on a terminal state");
  StepResult res;
  res.state = s;
  GridState& ns = res.state;

  const int fx = s.agent.x + kDx[s.heading];
  const int fy = s.agent.y + kDy[s.heading];
  const bool front_ok = s.in_bounds(fx, fy);

  switch (a) {
    case Action::kTurnLeft:
      ns.heading = (s.heading + 3) % 4;
      break;
    case Action::kTurnRight:
      ns.heading = (s.heading + 1) % 4;
      break;
    case Action::kForward: {
      if (!front_ok) break;
      const Cell& front = s.at(fx, fy);
      if (front.kind == ObjectKind::kBall) {
        ns.agent = {fx, fy};
        ns.at(fx, fy) = Cell{};
        res.reward = 1.0f;
        res.event = EventKind::kReachGoal;
        ns.done = true;
      } else if (front.kind == ObjectKind::kEmpty ||
                 (front.kind == ObjectKind::kDoor &&
                  front.door == DoorState::kOpen)) {
        ns.agent = {fx, fy};
      }
      break;
    }
    case Action::kPickup: {
      if (!front_ok) break;
      const Cell& front = s.at(fx, fy);
      if (front.kind == ObjectKind::kKey && !s.carrying_key) {
        ns.carrying_key = true;
        ns.carried_key_color = front.color;
        ns.at(fx, fy) = Cell{};
        res.event = EventKind::kPickupKey;
      }
      break;
    }
    case Action::kToggle: {
      if (!front_ok) break;
      const Cell& front = s.at(fx, fy);
      if (front.kind != ObjectKind::kDoor) break;
      Cell& door = ns.at(fx, fy);
      if (front.door == DoorState::kLocked) {
        if (s.carrying_key && s.carried_key_color == front.color) {
          door.door = DoorState::kOpen;
          res.event = EventKind::kOpenLockedDoor;
        } else {
          res.event = EventKind::kTryLockedDoorWithoutKey;
        }
      } else if (front.door == DoorState::kClosed) {
        door.door = DoorState::kOpen;
        res.event = s.carrying_key ? EventKind::kOpenDoorWithKey
                                   : EventKind::kOpenDoorWithoutKey;
      } else {
        door.door = DoorState::kClosed;
      }
      break;
    }
  }

  ns.step_count = s.step_count + 1;
  if (!ns.done && ns.step_count >= ns.max_steps) ns.done = true;
  res.done = ns.done;
  return res;
}

core::FrameTensor observe(const GridState& s) {
  const int v = kViewSize;
  const int half = v / 2;
  // Forward and right unit vectors in world coordinates.
  const int fx = kDx[s.heading], fy = kDy[s.heading];
  const int rx = kDx[(s.heading + 1) % 4], ry = kDy[(s.heading + 1) % 4];

  auto world_of = [&](int vx, int vy) -> std::pair<int, int> {
    const int fwd = (v - 1) - vy;
    const int lat = vx - half;
    return {s.agent.x + fx * fwd + rx * lat, s.agent.y + fy * fwd + ry * lat};
  };

  auto see_through = [&](int vx, int vy) -> bool {
    auto [wx, wy] = world_of(vx, vy);
    if (!s.in_bounds(wx, wy)) return false;
    const Cell& c = s.at(wx, wy);
    if (c.kind == ObjectKind::kWall) return false;
    if (c.kind == ObjectKind::kDoor) return c.door == DoorState::kOpen;
    return true;
  };

  // MiniGrid-style visibility sweep from the agent cell outward.
  std::array<std::array<bool, kViewSize>, kViewSize> vis{};
  vis[v - 1][half] = true;
  for (int vy = v - 1; vy >= 0; --vy) {
    for (int vx = 0; vx < v - 1; ++vx) {
      if (!vis[vy][vx] || !see_through(vx, vy)) continue;
      vis[vy][vx + 1] = true;
      if (vy > 0) {
        vis[vy - 1][vx + 1] = true;
        vis[vy - 1][vx] = true;
      }
    }
    for (int vx = v - 1; vx > 0; --vx) {
      if (!vis[vy][vx] || !see_through(vx, vy)) continue;
      vis[vy][vx - 1] = true;
      if (vy > 0) {
        vis[vy - 1][vx - 1] = true;
        vis[vy - 1][vx] = true;
      }
    }
  }

  core::FrameTensor out;
  out.t = 1;
  out.h = v;
  out.w = v;
  out.c = 3;
  out.data.assign(v * v * 3, 0);
  for (int vy = 0; vy < v; ++vy) {
    for (int vx = 0; vx < v; ++vx) {
      if (!vis[vy][vx]) continue;
      auto [wx, wy] = world_of(vx, vy);
      if (!s.in_bounds(wx, wy)) continue;
      Cell c = s.at(wx, wy);
      // Agent cell renders empty; the inventory is not part of the view.
      if (vy == v - 1 && vx == half) c = Cell{};
      uint8_t* px = out.data.data() + (vy * v + vx) * 3;
      px[0] = static_cast<uint8_t>(static_cast<int>(c.kind) * kKindScale);
      px[1] = static_cast<uint8_t>(c.color * kColorScale);
      px[2] = static_cast<uint8_t>(static_cast<int>(c.door) * kStateScale);
    }
  }
  return out;
}

}  // namespace dsi::grid
