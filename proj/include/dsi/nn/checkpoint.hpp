#pragma once

#include "dsi/nn/adam.hpp"
#include "dsi/nn/model.hpp"

namespace dsi::nn {

// Checkpoints share the dataset container layout: magic, JSON header
// (architecture, step count, named parameter index), then raw f32 blocks.
// Optimizer moments are stored as f64 blocks when an optimizer is given.
void save_checkpoint(const std::string& path, Model<float>& model,
                     int64_t step, AdamW<float>* opt = nullptr);

struct CheckpointInfo {
  ArchitectureSpec spec;
  int64_t step = 0;
  bool has_optimizer = false;
};

// Peek at the header without materializing a model.
CheckpointInfo read_checkpoint_info(const std::string& path);

// Rebuilds the model from the stored architecture and fills its weights.
// If `opt` is given the stored moments and step counter are restored too
// (it is an error if the file has none).
CheckpointInfo load_checkpoint(const std::string& path, Model<float>* model,
                               AdamW<float>* opt = nullptr);

}  // namespace dsi::nn
