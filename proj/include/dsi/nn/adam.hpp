#pragma once

#include <json.hpp>

#include "dsi/nn/param.hpp"

namespace dsi::nn {

// AdamW: Adam moments with decoupled weight decay applied directly to the
// weights (not folded into the gradient).
template <typename T>
class AdamW {
 public:
  struct Config {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-4;

    nlohmann::json to_json() const {
      return {{"lr", lr},
              {"beta1", beta1},
              {"beta2", beta2},
              {"eps", eps},
              {"weight_decay", weight_decay}};
    }
    static Config from_json(const nlohmann::json& j) {
      Config c;
      c.lr = j.at("lr");
      c.beta1 = j.at("beta1");
      c.beta2 = j.at("beta2");
      c.eps = j.at("eps");
      c.weight_decay = j.at("weight_decay");
      return c;
    }
  };

  void init(ParamRefs<T> params, const Config& cfg) {
    params_ = std::move(params);
    cfg_ = cfg;
    step_ = 0;
    m_.clear();
    v_.clear();
    for (auto* p : params_) {
      m_.emplace_back(p->numel(), 0.0);
      v_.emplace_back(p->numel(), 0.0);
    }
  }

  void step() {
    ++step_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
    for (size_t pi = 0; pi < params_.size(); ++pi) {
      Param<T>& p = *params_[pi];
      auto& m = m_[pi];
      auto& v = v_[pi];
      for (int64_t i = 0; i < p.numel(); ++i) {
        const double g = static_cast<double>(p.grad[i]);
        m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
        v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
        const double mh = m[i] / bc1;
        const double vh = v[i] / bc2;
        double w = static_cast<double>(p.value[i]);
        w -= cfg_.lr * (mh / (std::sqrt(vh) + cfg_.eps) +
                        cfg_.weight_decay * w);
        p.value[i] = static_cast<T>(w);
      }
    }
  }

  void zero_grad() {
    for (auto* p : params_) p->zero_grad();
  }

  int64_t step_count() const { return step_; }
  const Config& config() const { return cfg_; }

  // Serialization hooks for checkpoints.
  std::vector<std::vector<double>>& moments1() { return m_; }
  std::vector<std::vector<double>>& moments2() { return v_; }
  void set_step_count(int64_t s) { step_ = s; }

 private:
  ParamRefs<T> params_;
  Config cfg_{};
  int64_t step_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

}  // namespace dsi::nn
