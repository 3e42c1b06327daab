#pragma once

#include <array>
#include <optional>
#include <vector>

#include <json.hpp>

#include "dsi/core/types.hpp"

namespace dsi::grid {

using core::EventKind;

enum class Action { kTurnLeft, kTurnRight, kForward, kPickup, kToggle };
constexpr int kNumActions = 5;

enum class ObjectKind : uint8_t { kNone = 0, kEmpty = 1, kWall = 2, kDoor = 3, kKey = 4, kBall = 5 };
enum class DoorState : uint8_t { kNone = 0, kOpen = 1, kClosed = 2, kLocked = 3 };

// Fixed integer encoding used by observe(); chosen so channel values spread
// over 0..255 once multiplied.
constexpr int kKindScale = 40;
constexpr int kColorScale = 36;
constexpr int kStateScale = 80;
constexpr int kViewSize = 7;

struct EnvConfig {
  int grid_size = 19;
  int n_room_rows = 3;
  int n_room_cols = 2;  // flanking a central corridor
  int view_size = kViewSize;
  int max_steps = 120;
  // Palette indices: 0 grey, 1 red, 2 green, 3 blue, 4 purple, 5 yellow.
  std::vector<int> door_colors = {2, 3, 1, 0, 4, 5};
  int locked_room_index = 5;

  void validate() const;
  nlohmann::json to_json() const;
  static EnvConfig from_json(const nlohmann::json& j);
};

struct Cell {
  ObjectKind kind = ObjectKind::kEmpty;
  uint8_t color = 0;
  DoorState door = DoorState::kNone;

  bool operator==(const Cell&) const = default;
};

struct Pos {
  int x = 0, y = 0;
  bool operator==(const Pos&) const = default;
};

struct GridState {
  int size = 0;
  std::vector<Cell> cells;  // row-major [y * size + x]
  Pos agent;
  int heading = 0;  // 0=N, 1=E, 2=S, 3=W
  bool carrying_key = false;
  int carried_key_color = -1;
  int step_count = 0;
  int max_steps = 0;
  bool done = false;

  // Static layout facts kept for planning and reporting.
  int corridor_x = 0;
  int room_h = 0;
  int n_room_rows = 0;
  std::array<Pos, 6> door_cells{};
  int locked_door_index = -1;
  Pos key_cell;
  Pos ball_cell;
  int key_color = -1;
  uint64_t layout_seed = 0;

  Cell& at(int x, int y) { return cells[y * size + x]; }
  const Cell& at(int x, int y) const { return cells[y * size + x]; }
  bool in_bounds(int x, int y) const {
    return x >= 0 && y >= 0 && x < size && y < size;
  }

  bool operator==(const GridState&) const = default;
};

struct StepResult {
  GridState state;
  float reward = 0.0f;
  bool done = false;
  std::optional<EventKind> event;
};

// Deterministic layout + agent start for (cfg, seed).
GridState reset(const EnvConfig& cfg, uint64_t seed);

StepResult step(const GridState& s, Action a);

// Egocentric 7x7x3 observation; occluded / out-of-grid cells are zero.
core::FrameTensor observe(const GridState& s);

// Corridor cells an agent start can be placed on, for the given config.
std::vector<Pos> corridor_cells(const EnvConfig& cfg);

}  // namespace dsi::grid
