#include "dsi/nn/arch.hpp"

namespace dsi::nn {

namespace {

const char* kind_name(ArchKind k) {
  return k == ArchKind::kFrameRecurrent ? "frame_recurrent" : "windowed_3dconv";
}

const char* head_name(HeadKind h) {
  switch (h) {
    case HeadKind::kClassifier: return "classifier";
    case HeadKind::kRegressor: return "regressor";
    case HeadKind::kPerStepSigmoid: return "per_step_sigmoid";
  }
  throw std::invalid_argument("bad head kind");
}

ArchKind kind_from_name(const std::string& s) {
  if (s == "frame_recurrent") return ArchKind::kFrameRecurrent;
  if (s == "windowed_3dconv") return ArchKind::kWindowed3dConv;
  throw std::invalid_argument("unknown architecture kind: " + s);
}

HeadKind head_from_name(const std::string& s) {
  if (s == "classifier") return HeadKind::kClassifier;
  if (s == "regressor") return HeadKind::kRegressor;
  if (s == "per_step_sigmoid") return HeadKind::kPerStepSigmoid;
  throw std::invalid_argument("unknown head kind: " + s);
}

}  // namespace

nlohmann::json ArchitectureSpec::to_json() const {
  return {{"kind", kind_name(kind)},
          {"channels", channels},
          {"lstm_hidden", lstm_hidden},
          {"head", head_name(head)},
          {"num_classes", num_classes},
          {"window", window},
          {"flatten_head", flatten_head},
          {"flatten_length", flatten_length},
          {"input_h", input_h},
          {"input_w", input_w}};
}

ArchitectureSpec ArchitectureSpec::from_json(const nlohmann::json& j) {
  ArchitectureSpec s;
  s.kind = kind_from_name(j.at("kind").get<std::string>());
  s.channels = j.at("channels").get<std::vector<int>>();
  s.lstm_hidden = j.at("lstm_hidden");
  s.head = head_from_name(j.at("head").get<std::string>());
  s.num_classes = j.at("num_classes");
  s.window = j.at("window");
  s.flatten_head = j.at("flatten_head");
  s.flatten_length = j.at("flatten_length");
  s.input_h = j.value("input_h", 7);
  s.input_w = j.value("input_w", 7);
  s.validate();
  return s;
}

ArchitectureSpec ArchitectureSpec::predictor_default(int num_classes) {
  ArchitectureSpec s;
  s.head = HeadKind::kClassifier;
  s.num_classes = num_classes;
  return s;
}

ArchitectureSpec ArchitectureSpec::detector_default() {
  ArchitectureSpec s;
  s.head = HeadKind::kPerStepSigmoid;
  return s;
}

ArchitectureSpec ArchitectureSpec::tiny(HeadKind head, ArchKind kind) {
  ArchitectureSpec s;
  s.kind = kind;
  s.channels = {3, 8, 16, 32, 32, 64};
  s.lstm_hidden = 32;
  s.head = head;
  s.window = 4;
  return s;
}

}  // namespace dsi::nn
