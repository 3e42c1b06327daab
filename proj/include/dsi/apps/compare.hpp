#pragma once

#include <memory>

#include "dsi/train/trainer.hpp"

namespace dsi::apps {

// Policy comparison: relabels episodes by origin (A -> 0, B -> 1), merges
// the two sets, and runs the standard joint training pipeline so the
// detector highlights states where the policies behave differently.
// Returns the trainer holding the classifier G and detector D.
std::unique_ptr<train::Trainer> train_policy_classifier(
    const core::Dataset& dataset_a, const core::Dataset& dataset_b,
    const nn::ArchitectureSpec& g_spec, const nn::ArchitectureSpec& d_spec,
    const train::TrainConfig& cfg, const train::LossWeights& w,
    const std::string& out_dir = "");

// The merged, relabeled dataset (exposed for evaluation).
core::Dataset merge_policy_datasets(const core::Dataset& dataset_a,
                                    const core::Dataset& dataset_b);

}  // namespace dsi::apps
