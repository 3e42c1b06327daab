#include "dsi/core/ops.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace dsi::core {

double compute_return(const std::vector<float>& rewards, double gamma) {
  if (!(gamma >= 0.0 && gamma <= 1.0))
    throw std::invalid_argument("gamma must be in [0,1]");
  double acc = 0.0;
  double g = 1.0;
  for (float r : rewards) {
    if (!std::isfinite(r)) throw std::invalid_argument("non-finite reward");
    acc += g * static_cast<double>(r);
    g *= gamma;
  }
  return acc;
}

FloatFrames to_float(const FrameTensor& frames) {
  FloatFrames out;
  out.t = frames.t;
  out.h = frames.h;
  out.w = frames.w;
  out.c = frames.c;
  out.data.resize(frames.data.size());
  for (size_t i = 0; i < frames.data.size(); ++i)
    out.data[i] = static_cast<float>(frames.data[i]) / 255.0f;
  return out;
}

FloatFrames apply_mask(const FloatFrames& frames, const Mask& mask) {
  if (mask.length() != frames.t)
    throw ShapeError("mask length does not match episode length");
  FloatFrames out = frames;
  const int64_t fs = frames.frame_size();
  for (int64_t t = 0; t < frames.t; ++t) {
    const float m = mask.values[t];
    float* f = out.frame(t);
    for (int64_t i = 0; i < fs; ++i) f[i] *= m;
  }
  return out;
}

Mask invert_mask(const Mask& mask) {
  Mask out = mask;
  for (float& v : out.values) v = 1.0f - v;
  return out;
}

Episode pad_episode(const Episode& e, int length) {
  const int64_t t = e.length();
  if (length < t)
    throw std::invalid_argument("pad length smaller than episode length");
  Episode out = e;
  out.frames.t = length;
  out.frames.data.resize(length * e.frames.frame_size(), 0);
  out.rewards.resize(length, 0.0f);
  out.validity.resize(length, 0);
  return out;
}

Episode truncate_episode(const Episode& e, int length) {
  if (length < 1 || length > e.length())
    throw std::invalid_argument("truncate length out of range");
  Episode out = e;
  out.frames.t = length;
  out.frames.data.resize(length * e.frames.frame_size());
  out.rewards.resize(length);
  out.validity.resize(length);
  out.events.erase(
      std::remove_if(out.events.begin(), out.events.end(),
                     [&](const Event& ev) { return ev.time_index >= length; }),
      out.events.end());
  return out;
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& d, double test_fraction,
                                          uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw std::invalid_argument("test_fraction must be in (0,1)");

  // Stratify by class label (discrete) or by policy id (continuous).
  std::map<int, std::vector<size_t>> strata;
  for (size_t i = 0; i < d.episodes.size(); ++i) {
    const auto& e = d.episodes[i];
    const int key = d.label_kind == LabelKind::kDiscrete
                        ? static_cast<int>(e.return_label)
                        : e.policy_id;
    strata[key].push_back(i);
  }

  Dataset train, test;
  train.label_kind = test.label_kind = d.label_kind;
  train.pad_length = test.pad_length = d.pad_length;

  std::vector<size_t> train_idx, test_idx;
  Rng rng(seed);
  for (auto& [key, idx] : strata) {
    if (idx.size() < 2)
      throw std::invalid_argument("stratum with fewer than 2 episodes");
    // Fisher-Yates with the shared stream; strata iterate in key order.
    for (size_t i = idx.size() - 1; i > 0; --i) {
      size_t j = rng.below(i + 1);
      std::swap(idx[i], idx[j]);
    }
    size_t n_test = static_cast<size_t>(
        std::llround(test_fraction * static_cast<double>(idx.size())));
    n_test = std::clamp<size_t>(n_test, 1, idx.size() - 1);
    test_idx.insert(test_idx.end(), idx.begin(), idx.begin() + n_test);
    train_idx.insert(train_idx.end(), idx.begin() + n_test, idx.end());
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());
  for (size_t i : train_idx) train.episodes.push_back(d.episodes[i]);
  for (size_t i : test_idx) test.episodes.push_back(d.episodes[i]);

  auto fill_manifest = [&](Dataset& out, const char* role) {
    out.manifest = d.manifest;
    out.manifest["split"] = {{"role", role},
                             {"test_fraction", test_fraction},
                             {"seed", seed}};
    std::map<std::string, int> counts;
    for (const auto& e : out.episodes) {
      const int key = d.label_kind == LabelKind::kDiscrete
                          ? static_cast<int>(e.return_label)
                          : e.policy_id;
      counts[std::to_string(key)]++;
    }
    out.manifest["counts"] = counts;
  };
  fill_manifest(train, "train");
  fill_manifest(test, "test");
  return {std::move(train), std::move(test)};
}

}  // namespace dsi::core
