#pragma once

#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "dsi/common.hpp"

namespace dsi::nn {

template <typename T>
struct Param {
  std::string name;
  std::vector<int64_t> shape;
  std::vector<T> value;
  std::vector<T> grad;

  int64_t numel() const { return static_cast<int64_t>(value.size()); }

  void init_shape(std::string n, std::vector<int64_t> s) {
    name = std::move(n);
    shape = std::move(s);
    int64_t count = 1;
    for (int64_t d : shape) count *= d;
    value.assign(count, T(0));
    grad.assign(count, T(0));
  }

  void zero_grad() { std::fill(grad.begin(), grad.end(), T(0)); }
};

template <typename T>
using ParamRefs = std::vector<Param<T>*>;

// Fan-in scaled uniform init: U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
template <typename T>
void init_uniform(Param<T>& p, int64_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (T& v : p.value) v = static_cast<T>((2.0 * rng.uniform() - 1.0) * bound);
}

}  // namespace dsi::nn
