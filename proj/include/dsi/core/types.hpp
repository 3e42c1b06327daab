#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dsi/common.hpp"

namespace dsi::core {

enum class LabelKind { kDiscrete, kContinuous };

// Transition events emitted by the environment. Stored with episodes so
// ground-truth critical-state annotation needs no environment replay.
enum class EventKind {
  kPickupKey,
  kOpenDoorWithoutKey,
  kOpenDoorWithKey,
  kOpenLockedDoor,
  kTryLockedDoorWithoutKey,
  kReachGoal,
};

const char* event_kind_name(EventKind k);
EventKind event_kind_from_name(const std::string& name);

struct Event {
  int time_index = 0;
  EventKind kind = EventKind::kPickupKey;

  bool operator==(const Event&) const = default;
};

// [T, H, W, C] tensor of unsigned 8-bit channel values, row-major.
struct FrameTensor {
  int64_t t = 0, h = 0, w = 0, c = 0;
  std::vector<uint8_t> data;

  int64_t frame_size() const { return h * w * c; }
  uint8_t* frame(int64_t i) { return data.data() + i * frame_size(); }
  const uint8_t* frame(int64_t i) const { return data.data() + i * frame_size(); }

  bool operator==(const FrameTensor&) const = default;
};

// Float view of frames, values in [0,1]; shape [T, H, W, C].
struct FloatFrames {
  int64_t t = 0, h = 0, w = 0, c = 0;
  std::vector<float> data;

  int64_t frame_size() const { return h * w * c; }
  float* frame(int64_t i) { return data.data() + i * frame_size(); }
  const float* frame(int64_t i) const { return data.data() + i * frame_size(); }
};

struct Episode {
  FrameTensor frames;
  std::vector<float> rewards;
  float return_label = 0.0f;
  int policy_id = 0;
  std::vector<Event> events;
  float gamma = 0.99f;
  uint64_t seed = 0;
  // Marks real (1) vs padded (0) steps; always length T.
  std::vector<uint8_t> validity;

  int64_t length() const { return frames.t; }
  void check_invariants(std::optional<int> num_classes = std::nullopt) const;

  bool operator==(const Episode&) const = default;
};

struct Mask {
  std::vector<float> values;

  int64_t length() const { return static_cast<int64_t>(values.size()); }
  void check_invariants() const;
};

struct Dataset {
  std::vector<Episode> episodes;
  LabelKind label_kind = LabelKind::kDiscrete;
  std::optional<int> pad_length;
  nlohmann::json manifest = nlohmann::json::object();

  void check_invariants() const;

  bool operator==(const Dataset&) const = default;
};

}  // namespace dsi::core
