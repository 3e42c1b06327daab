#include "dsi/nn/model.hpp"

namespace dsi::nn {

int valid_prefix(const core::Episode& e) {
  int t = 0;
  while (t < static_cast<int>(e.validity.size()) && e.validity[t]) ++t;
  if (t == 0) throw ContractViolation("episode has no valid frames");
  return t;
}

std::vector<float> predictor_forward(Model<float>& g, const core::Episode& e,
                                     const std::vector<float>* mask) {
  const int t = valid_prefix(e);
  core::FloatFrames ff = core::to_float(e.frames);
  ff.t = t;
  ff.data.resize(static_cast<size_t>(t) * ff.frame_size());
  std::vector<float> x = to_model_input<float>(ff);
  if (mask) {
    std::vector<float> m(mask->begin(), mask->begin() + t);
    apply_mask_cthw(x, m, t, static_cast<int64_t>(ff.h) * ff.w);
  }
  typename Model<float>::Cache cache;
  return g.forward(x, t, &cache);
}

core::Mask detector_forward(Model<float>& d, const core::Episode& e) {
  const int t = valid_prefix(e);
  core::FloatFrames ff = core::to_float(e.frames);
  ff.t = t;
  ff.data.resize(static_cast<size_t>(t) * ff.frame_size());
  std::vector<float> x = to_model_input<float>(ff);
  typename Model<float>::Cache cache;
  std::vector<float> conf = d.forward(x, t, &cache);
  core::Mask m;
  m.values.assign(e.length(), 0.0f);
  std::copy(conf.begin(), conf.end(), m.values.begin());
  return m;
}

}  // namespace dsi::nn
