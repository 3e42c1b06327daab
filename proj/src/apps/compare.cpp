#include "dsi/apps/compare.hpp"

#include <set>

namespace dsi::apps {

core::Dataset merge_policy_datasets(const core::Dataset& dataset_a,
                                    const core::Dataset& dataset_b) {
  if (dataset_a.episodes.empty() || dataset_b.episodes.empty())
    throw std::invalid_argument("both policy datasets must be nonempty");
  const auto& fa = dataset_a.episodes.front().frames;
  const auto& fb = dataset_b.episodes.front().frames;
  if (fa.h != fb.h || fa.w != fb.w || fa.c != fb.c)
    throw ShapeError("policy datasets have mismatched frame shapes");

  std::set<int> ids_a, ids_b;
  for (const auto& e : dataset_a.episodes) ids_a.insert(e.policy_id);
  for (const auto& e : dataset_b.episodes) ids_b.insert(e.policy_id);
  if (ids_a == ids_b && ids_a.size() == 1)
    throw std::invalid_argument("policy comparison needs two distinct policies");

  core::Dataset merged;
  merged.label_kind = core::LabelKind::kDiscrete;
  for (const auto& src : {&dataset_a, &dataset_b}) {
    const float label = src == &dataset_b ? 1.0f : 0.0f;
    for (core::Episode e : src->episodes) {
      e.return_label = label;
      merged.episodes.push_back(std::move(e));
    }
  }
  merged.manifest["kind"] = "policy_comparison";
  merged.manifest["n_a"] = dataset_a.episodes.size();
  merged.manifest["n_b"] = dataset_b.episodes.size();
  if (dataset_a.manifest.contains("gen_config"))
    merged.manifest["gen_config"] = dataset_a.manifest.at("gen_config");
  return merged;
}

std::unique_ptr<train::Trainer> train_policy_classifier(
    const core::Dataset& dataset_a, const core::Dataset& dataset_b,
    const nn::ArchitectureSpec& g_spec, const nn::ArchitectureSpec& d_spec,
    const train::TrainConfig& cfg, const train::LossWeights& w,
    const std::string& out_dir) {
  const core::Dataset merged = merge_policy_datasets(dataset_a, dataset_b);
  auto trainer = std::make_unique<train::Trainer>(g_spec, d_spec, cfg, w);
  trainer->train(merged, out_dir);
  return trainer;
}

}  // namespace dsi::apps
