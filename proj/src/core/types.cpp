#include "dsi/core/types.hpp"

#include <cmath>
#include <map>

namespace dsi::core {

namespace {
const std::map<EventKind, std::string> kEventNames = {
    {EventKind::kPickupKey, "pickup_key"},
    {EventKind::kOpenDoorWithoutKey, "open_door_without_key"},
    {EventKind::kOpenDoorWithKey, "open_door_with_key"},
    {EventKind::kOpenLockedDoor, "open_locked_door"},
    {EventKind::kTryLockedDoorWithoutKey, "try_locked_door_without_key"},
    {EventKind::kReachGoal, "reach_goal"},
};
}  // namespace

const char* event_kind_name(EventKind k) { return kEventNames.at(k).c_str(); }

EventKind event_kind_from_name(const std::string& name) {
  for (const auto& [kind, n] : kEventNames) {
    if (n == name) return kind;
  }
  throw FormatError("unknown event kind: " + name);
}

void Episode::check_invariants(std::optional<int> num_classes) const {
  const int64_t t = frames.t;
  if (t < 1) throw ShapeError("episode must have T >= 1");
  if (static_cast<int64_t>(rewards.size()) != t)
    throw ShapeError("len(rewards) must equal T");
  if (static_cast<int64_t>(frames.data.size()) != t * frames.frame_size())
    throw ShapeError("frame buffer size inconsistent with shape");
  if (static_cast<int64_t>(validity.size()) != t)
    throw ShapeError("validity flags must have length T");
  for (const auto& ev : events) {
    if (ev.time_index < 0 || ev.time_index >= t)
      throw ShapeError("event time_index out of range");
  }
  if (!std::isfinite(return_label))
    throw std::invalid_argument("return_label must be finite");
  if (num_classes) {
    const int k = static_cast<int>(return_label);
    if (static_cast<float>(k) != return_label || k < 0 || k >= *num_classes)
      throw std::invalid_argument("discrete return_label out of class range");
  }
  if (!(gamma >= 0.0f && gamma < 1.0f) && gamma != 1.0f)
    throw std::invalid_argument("gamma must be in [0,1]");
}

void Mask::check_invariants() const {
  for (float v : values) {
    if (!(v >= 0.0f && v <= 1.0f))
      throw std::invalid_argument("mask values must lie in [0,1]");
  }
}

void Dataset::check_invariants() const {
  if (episodes.empty()) return;
  const auto& first = episodes.front().frames;
  for (const auto& e : episodes) {
    if (e.frames.h != first.h || e.frames.w != first.w || e.frames.c != first.c)
      throw ShapeError("all episodes must share H, W, C");
    e.check_invariants();
  }
}

}  // namespace dsi::core
