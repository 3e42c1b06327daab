#pragma once

#include "dsi/core/ops.hpp"
#include "dsi/nn/arch.hpp"
#include "dsi/nn/layers.hpp"

namespace dsi::nn {

// Episodes store frames as [t, h, w, c] bytes; the encoder wants planar
// [c, t, h, w] floats in [0, 1].
template <typename T>
std::vector<T> to_model_input(const core::FloatFrames& f) {
  std::vector<T> x(f.data.size());
  const int64_t hw = static_cast<int64_t>(f.h) * f.w;
  for (int t = 0; t < f.t; ++t)
    for (int64_t i = 0; i < hw; ++i)
      for (int c = 0; c < f.c; ++c)
        x[(static_cast<int64_t>(c) * f.t + t) * hw + i] =
            static_cast<T>(f.data[(static_cast<int64_t>(t) * hw + i) * f.c + c]);
  return x;
}

// x[c, t, ...] *= mask[t].
template <typename T>
void apply_mask_cthw(std::vector<T>& x, const std::vector<T>& mask, int t,
                     int64_t frame_size) {
  const int c = static_cast<int>(x.size() / (static_cast<int64_t>(t) * frame_size));
  for (int ci = 0; ci < c; ++ci)
    for (int ti = 0; ti < t; ++ti) {
      T* p = x.data() + (static_cast<int64_t>(ci) * t + ti) * frame_size;
      for (int64_t i = 0; i < frame_size; ++i) p[i] *= mask[ti];
    }
}

// d(loss)/d(mask[t]) from the input gradient of a masked forward pass:
// sum over the frame of dx * (unmasked input).
template <typename T>
std::vector<T> mask_grad_from_input_grad(const std::vector<T>& dx,
                                         const std::vector<T>& x_unmasked,
                                         int t, int64_t frame_size) {
  const int c = static_cast<int>(dx.size() / (static_cast<int64_t>(t) * frame_size));
  std::vector<T> dmask(t, T(0));
  for (int ci = 0; ci < c; ++ci)
    for (int ti = 0; ti < t; ++ti) {
      const int64_t base = (static_cast<int64_t>(ci) * t + ti) * frame_size;
      T acc = 0;
      for (int64_t i = 0; i < frame_size; ++i)
        acc += dx[base + i] * x_unmasked[base + i];
      dmask[ti] += acc;
    }
  return dmask;
}

// Shared encoder: the five-layer conv ladder over [3, t, h, w], spatial
// average pooling to per-frame vectors, then (for the recurrent kind) a
// bidirectional LSTM. Produces features [t, feature_dim].
template <typename T>
class Backbone {
 public:
  struct WindowCache {
    typename ConvNd<T>::Cache conv[5];
    typename InstanceNorm<T>::Cache norm[2];
    std::vector<uint8_t> relu[5];
    int frames = 0;  // valid frames in this window
    int pool_hw = 0;
  };
  struct Cache {
    std::vector<WindowCache> windows;
    typename BiLstm<T>::Cache lstm;
    int t = 0;
  };

  void init(const ArchitectureSpec& spec, Rng& rng) {
    spec.validate();
    spec_ = spec;
    const auto& ch = spec.channels;
    const int kh[5] = {3, 3, 3, 3, 2};
    const int sh[5] = {2, 1, 2, 1, 1};
    const int ph[5] = {1, 1, 1, 1, 0};
    const bool temporal = spec.kind == ArchKind::kWindowed3dConv;
    for (int l = 0; l < 5; ++l) {
      typename ConvNd<T>::Spec cs{};
      cs.cin = ch[l];
      cs.cout = ch[l + 1];
      cs.kh = cs.kw = kh[l];
      cs.sh = cs.sw = sh[l];
      cs.ph = cs.pw = ph[l];
      // Temporal extent only on the final layer of the 3d kind; frames are
      // otherwise processed independently.
      cs.kd = (temporal && l == 4) ? 3 : 1;
      cs.sd = 1;
      cs.pd = (temporal && l == 4) ? 1 : 0;
      conv_[l].init(cs, "conv" + std::to_string(l + 1), rng);
    }
    norm_[0].init(ch[2], "norm1");
    norm_[1].init(ch[4], "norm2");
    if (spec.kind == ArchKind::kFrameRecurrent)
      lstm_.init(ch[5], spec.lstm_hidden, "lstm", rng);
  }

  // x: [3, t, h, w]; returns [t, feature_dim].
  std::vector<T> forward(const std::vector<T>& x, int t, Cache* cache) const {
    if (t < 1) throw ShapeError("backbone needs at least one frame");
    cache->t = t;
    cache->windows.clear();
    const int win = window_len(t);
    const int n_windows = (t + win - 1) / win;
    cache->windows.resize(n_windows);

    const int feat = spec_.channels.back();
    std::vector<T> feats(static_cast<size_t>(t) * feat, T(0));
    for (int w = 0; w < n_windows; ++w) {
      auto& wc = cache->windows[w];
      wc.frames = std::min(win, t - w * win);
      std::vector<T> xw = slice_window(x, t, w * win, wc.frames, win);
      std::vector<T> y = encode_window(xw, win, &wc);
      // y: [feat, win, 1..oh, 1..ow] -> per-frame averages.
      const auto& dm = wc.conv[4].dm;
      wc.pool_hw = dm.oh * dm.ow;
      for (int ti = 0; ti < wc.frames; ++ti)
        for (int c = 0; c < feat; ++c) {
          T acc = 0;
          const int64_t base =
              (static_cast<int64_t>(c) * dm.od + ti) * wc.pool_hw;
          for (int i = 0; i < wc.pool_hw; ++i) acc += y[base + i];
          feats[static_cast<size_t>(w * win + ti) * feat + c] =
              acc / static_cast<T>(wc.pool_hw);
        }
    }
    if (spec_.kind == ArchKind::kFrameRecurrent)
      feats = lstm_.forward(feats, t, &cache->lstm);
    return feats;
  }

  std::vector<T> backward(const std::vector<T>& dfeats_in, const Cache& cache,
                          bool accumulate_grads) {
    const int t = cache.t;
    std::vector<T> dfeats = dfeats_in;
    if (spec_.kind == ArchKind::kFrameRecurrent)
      dfeats = lstm_.backward(dfeats, cache.lstm, accumulate_grads);

    const int feat = spec_.channels.back();
    const int win = window_len(t);
    const int64_t frame_in = static_cast<int64_t>(spec_.input_h) * spec_.input_w;
    std::vector<T> dx(static_cast<size_t>(3) * t * frame_in, T(0));
    for (size_t w = 0; w < cache.windows.size(); ++w) {
      const auto& wc = cache.windows[w];
      const auto& dm = wc.conv[4].dm;
      std::vector<T> dy(static_cast<size_t>(feat) * dm.od * wc.pool_hw, T(0));
      for (int ti = 0; ti < wc.frames; ++ti)
        for (int c = 0; c < feat; ++c) {
          const T g = dfeats[(w * win + ti) * feat + c] /
                      static_cast<T>(wc.pool_hw);
          const int64_t base =
              (static_cast<int64_t>(c) * dm.od + ti) * wc.pool_hw;
          for (int i = 0; i < wc.pool_hw; ++i) dy[base + i] = g;
        }
      std::vector<T> dxw =
          decode_window(dy, wc, accumulate_grads);
      // Scatter back the valid frames of this window.
      for (int c = 0; c < 3; ++c)
        for (int ti = 0; ti < wc.frames; ++ti)
          std::copy_n(
              dxw.data() + (static_cast<int64_t>(c) * win + ti) * frame_in,
              frame_in,
              dx.data() +
                  (static_cast<int64_t>(c) * t + w * win + ti) * frame_in);
    }
    return dx;
  }

  ParamRefs<T> params() {
    ParamRefs<T> out;
    for (auto& c : conv_)
      for (auto* p : c.params()) out.push_back(p);
    for (auto& n : norm_)
      for (auto* p : n.params()) out.push_back(p);
    if (spec_.kind == ArchKind::kFrameRecurrent)
      for (auto* p : lstm_.params()) out.push_back(p);
    return out;
  }

 private:
  int window_len(int t) const {
    return spec_.kind == ArchKind::kWindowed3dConv ? spec_.window : t;
  }

  std::vector<T> slice_window(const std::vector<T>& x, int t, int start,
                              int frames, int win) const {
    const int64_t frame_in = static_cast<int64_t>(spec_.input_h) * spec_.input_w;
    std::vector<T> xw(static_cast<size_t>(3) * win * frame_in, T(0));
    for (int c = 0; c < 3; ++c)
      for (int ti = 0; ti < frames; ++ti)
        std::copy_n(
            x.data() + (static_cast<int64_t>(c) * t + start + ti) * frame_in,
            frame_in,
            xw.data() + (static_cast<int64_t>(c) * win + ti) * frame_in);
    return xw;
  }

  std::vector<T> encode_window(const std::vector<T>& xw, int win,
                               WindowCache* wc) const {
    int d = win, h = spec_.input_h, w = spec_.input_w;
    std::vector<T> y = xw;
    for (int l = 0; l < 5; ++l) {
      y = conv_[l].forward(y, d, h, w, &wc->conv[l]);
      const auto& dm = wc->conv[l].dm;
      d = dm.od;
      h = dm.oh;
      w = dm.ow;
      if (l == 1) y = norm_[0].forward(y, d, h * w, &wc->norm[0]);
      if (l == 3) y = norm_[1].forward(y, d, h * w, &wc->norm[1]);
      relu_forward(y, &wc->relu[l]);
    }
    return y;
  }

  std::vector<T> decode_window(std::vector<T> dy, const WindowCache& wc,
                               bool accumulate_grads) {
    for (int l = 4; l >= 0; --l) {
      relu_backward(dy, wc.relu[l]);
      if (l == 3) dy = norm_[1].backward(dy, wc.norm[1], accumulate_grads);
      if (l == 1) dy = norm_[0].backward(dy, wc.norm[0], accumulate_grads);
      dy = conv_[l].backward(dy, wc.conv[l], accumulate_grads);
    }
    return dy;
  }

  ArchitectureSpec spec_;
  ConvNd<T> conv_[5];
  InstanceNorm<T> norm_[2];
  BiLstm<T> lstm_;
};

// Encoder plus head. Classifier/regressor heads pool features over steps
// (mean, or flatten at fixed length) and emit logits / a scalar; the
// per-step head emits one sigmoid confidence per frame.
template <typename T>
class Model {
 public:
  Model() = default;
  Model(const ArchitectureSpec& spec, uint64_t seed) { init(spec, seed); }

  void init(const ArchitectureSpec& spec, uint64_t seed) {
    spec.validate();
    spec_ = spec;
    Rng rng(seed);
    backbone_.init(spec, rng);
    const int fd = spec.feature_dim();
    const int out = spec.head == HeadKind::kClassifier ? spec.num_classes : 1;
    const int in = spec.flatten_head ? fd * spec.flatten_length : fd;
    head_.init(in, out, "head", rng);
  }

  struct Cache {
    typename Backbone<T>::Cache bb;
    typename Linear<T>::Cache head;
    std::vector<T> out;  // sigmoid activations (per-step head only)
    int t = 0;
  };

  // x: [3, t, h, w]. Returns logits [num_classes], a scalar [1], or
  // per-step confidences [t] depending on the head.
  std::vector<T> forward(const std::vector<T>& x, int t, Cache* cache) const {
    cache->t = t;
    std::vector<T> feats = backbone_.forward(x, t, &cache->bb);
    const int fd = spec_.feature_dim();
    if (spec_.head == HeadKind::kPerStepSigmoid) {
      std::vector<T> z = head_.forward(feats, t, &cache->head);
      for (T& v : z) v = T(1) / (T(1) + std::exp(-v));
      cache->out = z;
      return z;
    }
    if (spec_.flatten_head) {
      if (t != spec_.flatten_length)
        throw ShapeError("flatten head expects exactly " +
                         std::to_string(spec_.flatten_length) + " frames");
      return head_.forward(feats, 1, &cache->head);
    }
    std::vector<T> pooled(fd, T(0));
    for (int ti = 0; ti < t; ++ti)
      for (int c = 0; c < fd; ++c)
        pooled[c] += feats[static_cast<size_t>(ti) * fd + c];
    for (T& v : pooled) v /= static_cast<T>(t);
    return head_.forward(pooled, 1, &cache->head);
  }

  // dout matches the forward output shape. Returns d(loss)/d(input) in the
  // [3, t, h, w] layout; parameter grads accumulate unless disabled.
  std::vector<T> backward(const std::vector<T>& dout, const Cache& cache,
                          bool accumulate_grads = true) {
    const int t = cache.t;
    const int fd = spec_.feature_dim();
    std::vector<T> dfeats;
    if (spec_.head == HeadKind::kPerStepSigmoid) {
      std::vector<T> dz(dout.size());
      for (size_t i = 0; i < dout.size(); ++i)
        dz[i] = dout[i] * cache.out[i] * (T(1) - cache.out[i]);
      dfeats = head_.backward(dz, cache.head, accumulate_grads);
    } else if (spec_.flatten_head) {
      dfeats = head_.backward(dout, cache.head, accumulate_grads);
    } else {
      std::vector<T> dpooled = head_.backward(dout, cache.head, accumulate_grads);
      dfeats.assign(static_cast<size_t>(t) * fd, T(0));
      for (int ti = 0; ti < t; ++ti)
        for (int c = 0; c < fd; ++c)
          dfeats[static_cast<size_t>(ti) * fd + c] =
              dpooled[c] / static_cast<T>(t);
    }
    return backbone_.backward(dfeats, cache.bb, accumulate_grads);
  }

  ParamRefs<T> params() {
    ParamRefs<T> out = backbone_.params();
    for (auto* p : head_.params()) out.push_back(p);
    return out;
  }

  int64_t num_params() {
    int64_t n = 0;
    for (auto* p : params()) n += p->numel();
    return n;
  }

  void zero_grad() {
    for (auto* p : params()) p->zero_grad();
  }

  const ArchitectureSpec& spec() const { return spec_; }

 private:
  ArchitectureSpec spec_;
  Backbone<T> backbone_;
  Linear<T> head_;
};

// Episode-level wrappers used by training and evaluation: operate on the
// valid prefix and zero anything past it.

// Returns logits for a predictor model over the episode's valid frames,
// optionally gating each frame by `mask`.
std::vector<float> predictor_forward(Model<float>& g, const core::Episode& e,
                                     const std::vector<float>* mask = nullptr);

// Per-step detector confidences; entries past the valid prefix are 0.
core::Mask detector_forward(Model<float>& d, const core::Episode& e);

// Length of the valid prefix (contiguous leading 1s in validity).
int valid_prefix(const core::Episode& e);

}  // namespace dsi::nn
