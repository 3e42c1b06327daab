#pragma once

#include <string>

#include "dsi/core/types.hpp"

namespace dsi::core {

// Discounted cumulative reward: sum_t gamma^t * rewards[t].
double compute_return(const std::vector<float>& rewards, double gamma);

// u8 frames -> float frames in [0,1] (value / 255).
FloatFrames to_float(const FrameTensor& frames);

// output[t] = mask[t] * frames[t], broadcast over all non-time axes.
FloatFrames apply_mask(const FloatFrames& frames, const Mask& mask);

Mask invert_mask(const Mask& mask);

// Tail-pads frames/rewards with zeros to length L and extends the validity
// flags with zeros. Events are unchanged. L < T is an error.
Episode pad_episode(const Episode& e, int length);

// Keeps the first L steps; events past the cut are dropped.
Episode truncate_episode(const Episode& e, int length);

void save_dataset(const Dataset& d, const std::string& path);
Dataset load_dataset(const std::string& path);

// Class-stratified deterministic split into (train, test).
std::pair<Dataset, Dataset> split_dataset(const Dataset& d, double test_fraction,
                                          uint64_t seed);

}  // namespace dsi::core
