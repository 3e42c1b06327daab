#pragma once

#include <cmath>
#include <vector>

#include "dsi/common.hpp"

namespace dsi::train {

template <typename T>
struct LossGrad {
  T loss = 0;
  std::vector<T> grad;  // w.r.t. the inputs (logits / prediction / M)
};

template <typename T>
void check_finite(const std::vector<T>& v, const char* what) {
  for (T x : v)
    if (!std::isfinite(static_cast<double>(x)))
      throw NumericError(std::string("non-finite ") + what);
}

// Mean over batch of -log softmax(logits)[label]; here one item at a time
// (batch averaging happens in the caller).
template <typename T>
LossGrad<T> softmax_ce(const std::vector<T>& logits, int label) {
  check_finite(logits, "logits");
  const int k = static_cast<int>(logits.size());
  if (label < 0 || label >= k) throw ContractViolation("label out of range");
  T mx = logits[0];
  for (T v : logits) mx = std::max(mx, v);
  T z = 0;
  for (T v : logits) z += std::exp(v - mx);
  LossGrad<T> out;
  out.loss = std::log(z) - (logits[label] - mx);
  out.grad.resize(k);
  for (int i = 0; i < k; ++i) {
    out.grad[i] = std::exp(logits[i] - mx) / z;
    if (i == label) out.grad[i] -= T(1);
  }
  return out;
}

// Cross-entropy of softmax(logits) against the uniform distribution over K;
// minimized (= ln K) exactly at equal logits.
template <typename T>
LossGrad<T> softmax_ce_uniform(const std::vector<T>& logits) {
  check_finite(logits, "logits");
  const int k = static_cast<int>(logits.size());
  T mx = logits[0];
  for (T v : logits) mx = std::max(mx, v);
  T z = 0;
  for (T v : logits) z += std::exp(v - mx);
  LossGrad<T> out;
  const T u = T(1) / static_cast<T>(k);
  T mean_logit = 0;
  for (T v : logits) mean_logit += u * (v - mx);
  out.loss = std::log(z) - mean_logit;
  out.grad.resize(k);
  for (int i = 0; i < k; ++i)
    out.grad[i] = std::exp(logits[i] - mx) / z - u;
  return out;
}

// L2 distance ||pred - target||; for a scalar head this is |pred - target|.
template <typename T>
LossGrad<T> l2_distance(const std::vector<T>& pred,
                        const std::vector<T>& target) {
  check_finite(pred, "prediction");
  if (pred.size() != target.size())
    throw ShapeError("regression target size mismatch");
  T sq = 0;
  for (size_t i = 0; i < pred.size(); ++i) {
    const T d = pred[i] - target[i];
    sq += d * d;
  }
  LossGrad<T> out;
  out.loss = std::sqrt(sq);
  out.grad.resize(pred.size(), T(0));
  if (out.loss > T(1e-12))
    for (size_t i = 0; i < pred.size(); ++i)
      out.grad[i] = (pred[i] - target[i]) / out.loss;
  return out;
}

// Sum of mask values over the valid steps of each episode, averaged over the
// batch. Masks are nonnegative so the L1 norm is the plain sum.
template <typename T>
T loss_compactness(const std::vector<std::vector<T>>& masks,
                   const std::vector<std::vector<uint8_t>>& validity) {
  if (masks.size() != validity.size())
    throw ShapeError("mask/validity batch size mismatch");
  T total = 0;
  for (size_t i = 0; i < masks.size(); ++i) {
    if (masks[i].size() != validity[i].size())
      throw ShapeError("mask/validity length mismatch");
    for (size_t t = 0; t < masks[i].size(); ++t)
      if (validity[i][t]) total += std::abs(masks[i][t]);
  }
  return total / static_cast<T>(masks.size());
}

// Sum of absolute off-diagonal entries of M M^T, divided by b(b-1); zero for
// a single row. M is [b, l] row-major.
template <typename T>
LossGrad<T> ortho_penalty(const std::vector<T>& m, int b, int l) {
  LossGrad<T> out;
  out.grad.assign(m.size(), T(0));
  if (b < 2) return out;
  const T denom = static_cast<T>(b) * static_cast<T>(b - 1);
  for (int i = 0; i < b; ++i)
    for (int j = 0; j < b; ++j) {
      if (i == j) continue;
      T s = 0;
      for (int k = 0; k < l; ++k)
        s += m[static_cast<size_t>(i) * l + k] * m[static_cast<size_t>(j) * l + k];
      out.loss += std::abs(s) / denom;
      const T sg = (s > 0) - (s < 0);
      for (int k = 0; k < l; ++k)
        out.grad[static_cast<size_t>(i) * l + k] +=
            sg * m[static_cast<size_t>(j) * l + k] * T(2) / denom;
    }
  return out;
}

}  // namespace dsi::train
