#pragma once

#include <json.hpp>
#include <vector>

#include "dsi/common.hpp"

namespace dsi::nn {

enum class ArchKind { kFrameRecurrent, kWindowed3dConv };
enum class HeadKind { kClassifier, kRegressor, kPerStepSigmoid };

// Encoder ladder: five conv layers, kernels {3,3,3,3,2}, spatial strides
// {2,1,2,1,1}, normalization after layers 2 and 4. The windowed_3dconv kind
// adds a temporal extent of 3 to the last kernel and consumes fixed windows
// of `window` frames.
struct ArchitectureSpec {
  ArchKind kind = ArchKind::kFrameRecurrent;
  std::vector<int> channels = {3, 32, 64, 128, 128, 256};
  int lstm_hidden = 128;
  HeadKind head = HeadKind::kClassifier;
  int num_classes = 2;
  int window = 12;
  // Fixed-length alternative predictor head: flattens [length x F] instead
  // of mean-pooling over valid steps.
  bool flatten_head = false;
  int flatten_length = 0;
  int input_h = 7, input_w = 7;

  int feature_dim() const {
    return kind == ArchKind::kFrameRecurrent ? 2 * lstm_hidden
                                             : channels.back();
  }

  void validate() const {
    if (channels.size() != 6)
      throw std::invalid_argument("channel ladder must have 6 entries");
    if (head == HeadKind::kPerStepSigmoid && flatten_head)
      throw std::invalid_argument("detector head cannot be flattened");
    if (flatten_head && flatten_length < 1)
      throw std::invalid_argument("flatten head requires a fixed length");
    if (kind == ArchKind::kWindowed3dConv && window < 3)
      throw std::invalid_argument("3d conv window too small");
    if (lstm_hidden < 1 || num_classes < 2)
      throw std::invalid_argument("bad architecture spec");
  }

  nlohmann::json to_json() const;
  static ArchitectureSpec from_json(const nlohmann::json& j);

  // Reference detector/predictor specs used across the project.
  static ArchitectureSpec predictor_default(int num_classes = 2);
  static ArchitectureSpec detector_default();
  // Quarter-width spec on tiny inputs for gradient checking.
  static ArchitectureSpec tiny(HeadKind head, ArchKind kind = ArchKind::kFrameRecurrent);
};

}  // namespace dsi::nn
