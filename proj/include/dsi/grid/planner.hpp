#pragma once

#include <vector>

#include "dsi/grid/env.hpp"

namespace dsi::grid {

// Shortest action sequence from s to the goal ball, found by breadth-first
// search over the (position, heading, carrying, door-states) product space.
// Ties between equally short plans break by fixed action order.
std::vector<Action> plan_optimal_path(const GridState& s);

// Shortest action sequence that puts the agent on `target`.
std::vector<Action> plan_path_to_cell(const GridState& s, Pos target);

// First action of plan_optimal_path.
Action plan_optimal(const GridState& s);

}  // namespace dsi::grid
