#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "dsi/nn/param.hpp"

namespace dsi::nn {

template <typename T>
using MatRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatCM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor>;
template <typename T>
using VecX = Eigen::Matrix<T, Eigen::Dynamic, 1>;

// N-dimensional convolution over a [C, D, H, W] input via im2col + GEMM.
// A 2D convolution applied frame-by-frame is the special case kd = 1 with
// the time axis mapped onto D.
template <typename T>
class ConvNd {
 public:
  struct Spec {
    int cin, cout;
    int kd, kh, kw;
    int sd, sh, sw;
    int pd, ph, pw;
  };
  struct Dims {
    int d, h, w;     // input spatial extents
    int od, oh, ow;  // output spatial extents
    int n() const { return od * oh * ow; }
  };
  struct Cache {
    std::vector<T> cols;  // [K x N] column-major
    Dims dm;
  };

  void init(const Spec& spec, const std::string& name, Rng& rng) {
    spec_ = spec;
    const int64_t k = kernel_size();
    weight.init_shape(name + ".weight", {spec.cout, k});
    bias.init_shape(name + ".bias", {spec.cout});
    init_uniform(weight, k, rng);
    init_uniform(bias, k, rng);
  }

  int64_t kernel_size() const {
    return static_cast<int64_t>(spec_.cin) * spec_.kd * spec_.kh * spec_.kw;
  }

  Dims output_dims(int d, int h, int w) const {
    Dims dm;
    dm.d = d;
    dm.h = h;
    dm.w = w;
    dm.od = (d + 2 * spec_.pd - spec_.kd) / spec_.sd + 1;
    dm.oh = (h + 2 * spec_.ph - spec_.kh) / spec_.sh + 1;
    dm.ow = (w + 2 * spec_.pw - spec_.kw) / spec_.sw + 1;
    if (dm.od < 1 || dm.oh < 1 || dm.ow < 1)
      throw ShapeError("convolution output collapses to zero extent");
    return dm;
  }

  // x: [cin, d, h, w]; returns [cout, od, oh, ow].
  std::vector<T> forward(const std::vector<T>& x, int d, int h, int w,
                         Cache* cache) const {
    const Dims dm = output_dims(d, h, w);
    if (static_cast<int64_t>(x.size()) !=
        static_cast<int64_t>(spec_.cin) * d * h * w)
      throw ShapeError("conv input size mismatch");
    const int64_t k = kernel_size();
    const int64_t n = dm.n();
    cache->dm = dm;
    cache->cols.assign(k * n, T(0));
    im2col(x, dm, cache->cols.data());

    std::vector<T> y(static_cast<size_t>(spec_.cout) * n);
    Eigen::Map<const MatRM<T>> wmat(weight.value.data(), spec_.cout, k);
    Eigen::Map<const MatCM<T>> cols(cache->cols.data(), k, n);
    Eigen::Map<MatRM<T>> out(y.data(), spec_.cout, n);
    out.noalias() = wmat * cols;
    Eigen::Map<const VecX<T>> b(bias.value.data(), spec_.cout);
    out.colwise() += b;
    return y;
  }

  // dy: [cout, od, oh, ow]. Returns dx; accumulates weight/bias grads when
  // requested.
  std::vector<T> backward(const std::vector<T>& dy, const Cache& cache,
                          bool accumulate_grads) {
    const Dims& dm = cache.dm;
    const int64_t k = kernel_size();
    const int64_t n = dm.n();
    Eigen::Map<const MatRM<T>> dout(dy.data(), spec_.cout, n);
    Eigen::Map<const MatCM<T>> cols(cache.cols.data(), k, n);
    if (accumulate_grads) {
      Eigen::Map<MatRM<T>> dw(weight.grad.data(), spec_.cout, k);
      dw.noalias() += dout * cols.transpose();
      Eigen::Map<VecX<T>> db(bias.grad.data(), spec_.cout);
      db.noalias() += dout.rowwise().sum();
    }
    std::vector<T> dcols(k * n);
    Eigen::Map<MatCM<T>> dc(dcols.data(), k, n);
    Eigen::Map<const MatRM<T>> wmat(weight.value.data(), spec_.cout, k);
    dc.noalias() = wmat.transpose() * dout;

    std::vector<T> dx(static_cast<size_t>(spec_.cin) * dm.d * dm.h * dm.w,
                      T(0));
    col2im(dcols.data(), dm, dx.data());
    return dx;
  }

  ParamRefs<T> params() { return {&weight, &bias}; }
  const Spec& spec() const { return spec_; }

  Param<T> weight, bias;

 private:
  void im2col(const std::vector<T>& x, const Dims& dm, T* cols) const {
    const auto& s = spec_;
    const int64_t n = dm.n();
    int64_t j = 0;
    for (int od = 0; od < dm.od; ++od) {
      for (int oh = 0; oh < dm.oh; ++oh) {
        for (int ow = 0; ow < dm.ow; ++ow, ++j) {
          T* col = cols + j * kernel_size();
          int64_t r = 0;
          for (int ci = 0; ci < s.cin; ++ci) {
            for (int zd = 0; zd < s.kd; ++zd) {
              const int id = od * s.sd - s.pd + zd;
              for (int zh = 0; zh < s.kh; ++zh) {
                const int ih = oh * s.sh - s.ph + zh;
                for (int zw = 0; zw < s.kw; ++zw, ++r) {
                  const int iw = ow * s.sw - s.pw + zw;
                  if (id < 0 || ih < 0 || iw < 0 || id >= dm.d || ih >= dm.h ||
                      iw >= dm.w)
                    continue;
                  col[r] = x[((static_cast<int64_t>(ci) * dm.d + id) * dm.h + ih) *
                                 dm.w +
                             iw];
                }
              }
            }
          }
        }
      }
    }
    (void)n;
  }

  void col2im(const T* dcols, const Dims& dm, T* dx) const {
    const auto& s = spec_;
    int64_t j = 0;
    for (int od = 0; od < dm.od; ++od) {
      for (int oh = 0; oh < dm.oh; ++oh) {
        for (int ow = 0; ow < dm.ow; ++ow, ++j) {
          const T* col = dcols + j * kernel_size();
          int64_t r = 0;
          for (int ci = 0; ci < s.cin; ++ci) {
            for (int zd = 0; zd < s.kd; ++zd) {
              const int id = od * s.sd - s.pd + zd;
              for (int zh = 0; zh < s.kh; ++zh) {
                const int ih = oh * s.sh - s.ph + zh;
                for (int zw = 0; zw < s.kw; ++zw, ++r) {
                  const int iw = ow * s.sw - s.pw + zw;
                  if (id < 0 || ih < 0 || iw < 0 || id >= dm.d || ih >= dm.h ||
                      iw >= dm.w)
                    continue;
                  dx[((static_cast<int64_t>(ci) * dm.d + id) * dm.h + ih) * dm.w +
                     iw] += col[r];
                }
              }
            }
          }
        }
      }
    }
  }

  Spec spec_{};
};

// Per-(channel, frame) normalization over the spatial extent with affine
// parameters; no running statistics, so eval mode is deterministic and
// batch-size independent.
template <typename T>
class InstanceNorm {
 public:
  struct Cache {
    std::vector<T> xhat;
    std::vector<T> inv_std;  // one per (c, d)
    int c, d, hw;
  };

  void init(int channels, const std::string& name) {
    channels_ = channels;
    gamma.init_shape(name + ".gamma", {channels});
    beta.init_shape(name + ".beta", {channels});
    std::fill(gamma.value.begin(), gamma.value.end(), T(1));
  }

  // x: [c, d, h*w] flattened.
  std::vector<T> forward(const std::vector<T>& x, int d, int hw,
                         Cache* cache) const {
    const int c = channels_;
    std::vector<T> y(x.size());
    cache->xhat.resize(x.size());
    cache->inv_std.assign(static_cast<size_t>(c) * d, T(0));
    cache->c = c;
    cache->d = d;
    cache->hw = hw;
    for (int ci = 0; ci < c; ++ci) {
      for (int di = 0; di < d; ++di) {
        const int64_t base = (static_cast<int64_t>(ci) * d + di) * hw;
        T mean = 0;
        for (int i = 0; i < hw; ++i) mean += x[base + i];
        mean /= static_cast<T>(hw);
        T var = 0;
        for (int i = 0; i < hw; ++i) {
          const T z = x[base + i] - mean;
          var += z * z;
        }
        var /= static_cast<T>(hw);
        const T inv = T(1) / std::sqrt(var + eps_);
        cache->inv_std[static_cast<size_t>(ci) * d + di] = inv;
        for (int i = 0; i < hw; ++i) {
          const T xh = (x[base + i] - mean) * inv;
          cache->xhat[base + i] = xh;
          y[base + i] = gamma.value[ci] * xh + beta.value[ci];
        }
      }
    }
    return y;
  }

  std::vector<T> backward(const std::vector<T>& dy, const Cache& cache,
                          bool accumulate_grads) {
    const int c = cache.c, d = cache.d, hw = cache.hw;
    std::vector<T> dx(dy.size());
    for (int ci = 0; ci < c; ++ci) {
      for (int di = 0; di < d; ++di) {
        const int64_t base = (static_cast<int64_t>(ci) * d + di) * hw;
        const T inv = cache.inv_std[static_cast<size_t>(ci) * d + di];
        T sum_dy = 0, sum_dy_xhat = 0;
        for (int i = 0; i < hw; ++i) {
          sum_dy += dy[base + i];
          sum_dy_xhat += dy[base + i] * cache.xhat[base + i];
        }
        if (accumulate_grads) {
          gamma.grad[ci] += sum_dy_xhat;
          beta.grad[ci] += sum_dy;
        }
        const T g = gamma.value[ci];
        const T n = static_cast<T>(hw);
        for (int i = 0; i < hw; ++i) {
          dx[base + i] = g * inv *
                         (dy[base + i] - sum_dy / n -
                          cache.xhat[base + i] * sum_dy_xhat / n);
        }
      }
    }
    return dx;
  }

  ParamRefs<T> params() { return {&gamma, &beta}; }

  Param<T> gamma, beta;

 private:
  int channels_ = 0;
  T eps_ = static_cast<T>(1e-5);
};

template <typename T>
inline void relu_forward(std::vector<T>& x, std::vector<uint8_t>* mask) {
  mask->resize(x.size());
  for (size_t i = 0; i < x.size(); ++i) {
    (*mask)[i] = x[i] > T(0);
    if (x[i] < T(0)) x[i] = T(0);
  }
}

template <typename T>
inline void relu_backward(std::vector<T>& dy, const std::vector<uint8_t>& mask) {
  for (size_t i = 0; i < dy.size(); ++i)
    if (!mask[i]) dy[i] = T(0);
}

// y = x W^T + b on row batches: x [n, in], y [n, out].
template <typename T>
class Linear {
 public:
  struct Cache {
    std::vector<T> x;
    int n, in;
  };

  void init(int in, int out, const std::string& name, Rng& rng) {
    in_ = in;
    out_ = out;
    weight.init_shape(name + ".weight", {out, in});
    bias.init_shape(name + ".bias", {out});
    init_uniform(weight, in, rng);
    init_uniform(bias, in, rng);
  }

  std::vector<T> forward(const std::vector<T>& x, int n, Cache* cache) const {
    if (static_cast<int>(x.size()) != n * in_)
      throw ShapeError("linear input size mismatch");
    cache->x = x;
    cache->n = n;
    cache->in = in_;
    std::vector<T> y(static_cast<size_t>(n) * out_);
    Eigen::Map<const MatRM<T>> xm(x.data(), n, in_);
    Eigen::Map<const MatRM<T>> wm(weight.value.data(), out_, in_);
    Eigen::Map<MatRM<T>> ym(y.data(), n, out_);
    ym.noalias() = xm * wm.transpose();
    Eigen::Map<const VecX<T>> b(bias.value.data(), out_);
    ym.rowwise() += b.transpose();
    return y;
  }

  std::vector<T> backward(const std::vector<T>& dy, const Cache& cache,
                          bool accumulate_grads) {
    const int n = cache.n;
    Eigen::Map<const MatRM<T>> dym(dy.data(), n, out_);
    Eigen::Map<const MatRM<T>> xm(cache.x.data(), n, in_);
    if (accumulate_grads) {
      Eigen::Map<MatRM<T>> dw(weight.grad.data(), out_, in_);
      dw.noalias() += dym.transpose() * xm;
      Eigen::Map<VecX<T>> db(bias.grad.data(), out_);
      db.noalias() += dym.colwise().sum().transpose();
    }
    std::vector<T> dx(static_cast<size_t>(n) * in_);
    Eigen::Map<MatRM<T>> dxm(dx.data(), n, in_);
    Eigen::Map<const MatRM<T>> wm(weight.value.data(), out_, in_);
    dxm.noalias() = dym * wm;
    return dx;
  }

  ParamRefs<T> params() { return {&weight, &bias}; }
  int in() const { return in_; }
  int out() const { return out_; }

  Param<T> weight, bias;

 private:
  int in_ = 0, out_ = 0;
};

// Bidirectional LSTM; output at step t concatenates both directions'
// hidden states. Gate order: input, forget, cell, output.
template <typename T>
class BiLstm {
 public:
  struct DirCache {
    // Per step: gate activations (post-nonlinearity) and cell states.
    std::vector<T> i, f, g, o, c, h, tanh_c;
  };
  struct Cache {
    std::vector<T> x;
    int t = 0;
    DirCache fwd, bwd;
  };

  void init(int in, int hidden, const std::string& name, Rng& rng) {
    in_ = in;
    hidden_ = hidden;
    auto init_dir = [&](Dir& d, const std::string& tag) {
      d.wx.init_shape(name + "." + tag + ".wx", {4 * hidden, in});
      d.wh.init_shape(name + "." + tag + ".wh", {4 * hidden, hidden});
      d.b.init_shape(name + "." + tag + ".b", {4 * hidden});
      init_uniform(d.wx, in, rng);
      init_orthogonalish(d.wh, hidden, rng);
      init_uniform(d.b, hidden, rng);
      // Forget-gate bias starts positive so early training retains memory.
      for (int i = 0; i < hidden; ++i) d.b.value[hidden + i] += T(1);
    };
    init_dir(fwd_, "fwd");
    init_dir(bwd_, "bwd");
  }

  int out_dim() const { return 2 * hidden_; }

  // x: [t, in]; returns [t, 2*hidden].
  std::vector<T> forward(const std::vector<T>& x, int t, Cache* cache) const {
    cache->x = x;
    cache->t = t;
    std::vector<T> y(static_cast<size_t>(t) * 2 * hidden_);
    run_dir(fwd_, x, t, false, &cache->fwd);
    run_dir(bwd_, x, t, true, &cache->bwd);
    for (int ti = 0; ti < t; ++ti) {
      std::copy_n(cache->fwd.h.data() + static_cast<size_t>(ti) * hidden_,
                  hidden_, y.data() + static_cast<size_t>(ti) * 2 * hidden_);
      std::copy_n(cache->bwd.h.data() + static_cast<size_t>(ti) * hidden_,
                  hidden_,
                  y.data() + static_cast<size_t>(ti) * 2 * hidden_ + hidden_);
    }
    return y;
  }

  std::vector<T> backward(const std::vector<T>& dy, const Cache& cache,
                          bool accumulate_grads) {
    const int t = cache.t;
    std::vector<T> dh_f(static_cast<size_t>(t) * hidden_);
    std::vector<T> dh_b(static_cast<size_t>(t) * hidden_);
    for (int ti = 0; ti < t; ++ti) {
      std::copy_n(dy.data() + static_cast<size_t>(ti) * 2 * hidden_, hidden_,
                  dh_f.data() + static_cast<size_t>(ti) * hidden_);
      std::copy_n(dy.data() + static_cast<size_t>(ti) * 2 * hidden_ + hidden_,
                  hidden_, dh_b.data() + static_cast<size_t>(ti) * hidden_);
    }
    std::vector<T> dx(static_cast<size_t>(t) * in_, T(0));
    backward_dir(fwd_, cache.x, t, false, cache.fwd, dh_f, accumulate_grads,
                 dx.data());
    backward_dir(bwd_, cache.x, t, true, cache.bwd, dh_b, accumulate_grads,
                 dx.data());
    return dx;
  }

  ParamRefs<T> params() {
    return {&fwd_.wx, &fwd_.wh, &fwd_.b, &bwd_.wx, &bwd_.wh, &bwd_.b};
  }

 private:
  struct Dir {
    Param<T> wx, wh, b;
  };

  static void init_orthogonalish(Param<T>& p, int hidden, Rng& rng) {
    // Gram-Schmidt on gaussian-ish rows, block per gate.
    const int n4 = 4 * hidden;
    std::vector<std::vector<T>> rows(n4, std::vector<T>(hidden));
    for (auto& row : rows)
      for (T& v : row)
        v = static_cast<T>(2.0 * rng.uniform() - 1.0);
    for (int blk = 0; blk < 4; ++blk) {
      for (int i = 0; i < hidden; ++i) {
        auto& ri = rows[blk * hidden + i];
        for (int j = 0; j < i; ++j) {
          const auto& rj = rows[blk * hidden + j];
          T dot = 0;
          for (int k = 0; k < hidden; ++k) dot += ri[k] * rj[k];
          for (int k = 0; k < hidden; ++k) ri[k] -= dot * rj[k];
        }
        T norm = 0;
        for (int k = 0; k < hidden; ++k) norm += ri[k] * ri[k];
        norm = std::sqrt(norm);
        if (norm < T(1e-8)) norm = T(1);
        for (int k = 0; k < hidden; ++k) ri[k] /= norm;
      }
    }
    for (int r = 0; r < n4; ++r)
      for (int k = 0; k < hidden; ++k) p.value[static_cast<size_t>(r) * hidden + k] = rows[r][k];
  }

  static T sigmoid(T v) { return T(1) / (T(1) + std::exp(-v)); }

  void run_dir(const Dir& dir, const std::vector<T>& x, int t, bool reverse,
               DirCache* dc) const {
    const int hd = hidden_;
    dc->i.assign(static_cast<size_t>(t) * hd, T(0));
    dc->f.assign(static_cast<size_t>(t) * hd, T(0));
    dc->g.assign(static_cast<size_t>(t) * hd, T(0));
    dc->o.assign(static_cast<size_t>(t) * hd, T(0));
    dc->c.assign(static_cast<size_t>(t) * hd, T(0));
    dc->h.assign(static_cast<size_t>(t) * hd, T(0));
    dc->tanh_c.assign(static_cast<size_t>(t) * hd, T(0));

    // Input projections for all steps in one GEMM.
    std::vector<T> proj(static_cast<size_t>(t) * 4 * hd);
    {
      Eigen::Map<const MatRM<T>> xm(x.data(), t, in_);
      Eigen::Map<const MatRM<T>> wx(dir.wx.value.data(), 4 * hd, in_);
      Eigen::Map<MatRM<T>> pm(proj.data(), t, 4 * hd);
      pm.noalias() = xm * wx.transpose();
      Eigen::Map<const VecX<T>> b(dir.b.value.data(), 4 * hd);
      pm.rowwise() += b.transpose();
    }

    VecX<T> h_prev = VecX<T>::Zero(hd), c_prev = VecX<T>::Zero(hd);
    Eigen::Map<const MatRM<T>> wh(dir.wh.value.data(), 4 * hd, hd);
    VecX<T> a(4 * hd);
    for (int step = 0; step < t; ++step) {
      const int ti = reverse ? t - 1 - step : step;
      Eigen::Map<const VecX<T>> p(proj.data() + static_cast<size_t>(ti) * 4 * hd,
                                  4 * hd);
      a.noalias() = wh * h_prev;
      a += p;
      T* ip = dc->i.data() + static_cast<size_t>(ti) * hd;
      T* fp = dc->f.data() + static_cast<size_t>(ti) * hd;
      T* gp = dc->g.data() + static_cast<size_t>(ti) * hd;
      T* op = dc->o.data() + static_cast<size_t>(ti) * hd;
      T* cp = dc->c.data() + static_cast<size_t>(ti) * hd;
      T* hp = dc->h.data() + static_cast<size_t>(ti) * hd;
      T* tcp = dc->tanh_c.data() + static_cast<size_t>(ti) * hd;
      for (int k = 0; k < hd; ++k) {
        ip[k] = sigmoid(a[k]);
        fp[k] = sigmoid(a[hd + k]);
        gp[k] = std::tanh(a[2 * hd + k]);
        op[k] = sigmoid(a[3 * hd + k]);
        cp[k] = fp[k] * c_prev[k] + ip[k] * gp[k];
        tcp[k] = std::tanh(cp[k]);
        hp[k] = op[k] * tcp[k];
        h_prev[k] = hp[k];
        c_prev[k] = cp[k];
      }
    }
  }

  void backward_dir(Dir& dir, const std::vector<T>& x, int t, bool reverse,
                    const DirCache& dc, const std::vector<T>& dh_out,
                    bool accumulate_grads, T* dx) {
    const int hd = hidden_;
    Eigen::Map<const MatRM<T>> wh(dir.wh.value.data(), 4 * hd, hd);
    VecX<T> dh_next = VecX<T>::Zero(hd), dc_next = VecX<T>::Zero(hd);
    std::vector<T> da_all(static_cast<size_t>(t) * 4 * hd, T(0));
    VecX<T> da(4 * hd);

    for (int step = t - 1; step >= 0; --step) {
      const int ti = reverse ? t - 1 - step : step;
      const T* ip = dc.i.data() + static_cast<size_t>(ti) * hd;
      const T* fp = dc.f.data() + static_cast<size_t>(ti) * hd;
      const T* gp = dc.g.data() + static_cast<size_t>(ti) * hd;
      const T* op = dc.o.data() + static_cast<size_t>(ti) * hd;
      const T* tcp = dc.tanh_c.data() + static_cast<size_t>(ti) * hd;
      // Previous step along the scan direction.
      const int tprev = reverse ? ti + 1 : ti - 1;
      const bool has_prev = reverse ? (tprev < t) : (tprev >= 0);
      const T* c_prev =
          has_prev ? dc.c.data() + static_cast<size_t>(tprev) * hd : nullptr;

      for (int k = 0; k < hd; ++k) {
        const T dh = dh_out[static_cast<size_t>(ti) * hd + k] + dh_next[k];
        const T dcv = dh * op[k] * (T(1) - tcp[k] * tcp[k]) + dc_next[k];
        const T cprev = c_prev ? c_prev[k] : T(0);
        const T di = dcv * gp[k];
        const T df = dcv * cprev;
        const T dg = dcv * ip[k];
        const T do_ = dh * tcp[k];
        da[k] = di * ip[k] * (T(1) - ip[k]);
        da[hd + k] = df * fp[k] * (T(1) - fp[k]);
        da[2 * hd + k] = dg * (T(1) - gp[k] * gp[k]);
        da[3 * hd + k] = do_ * op[k] * (T(1) - op[k]);
        dc_next[k] = dcv * fp[k];
      }
      std::copy_n(da.data(), 4 * hd,
                  da_all.data() + static_cast<size_t>(ti) * 4 * hd);
      dh_next.noalias() = wh.transpose() * da;
      if (accumulate_grads && has_prev) {
        Eigen::Map<const VecX<T>> hprev(
            dc.h.data() + static_cast<size_t>(tprev) * hd, hd);
        Eigen::Map<MatRM<T>> dwh(dir.wh.grad.data(), 4 * hd, hd);
        dwh.noalias() += da * hprev.transpose();
      }
    }

    // Input-side grads for all steps at once.
    {
      Eigen::Map<const MatRM<T>> dam(da_all.data(), t, 4 * hd);
      Eigen::Map<const MatRM<T>> wx(dir.wx.value.data(), 4 * hd, in_);
      MatRM<T> dxm = dam * wx;
      Eigen::Map<MatRM<T>> dxmap(dx, t, in_);
      dxmap += dxm;
      if (accumulate_grads) {
        Eigen::Map<const MatRM<T>> xm(x.data(), t, in_);
        Eigen::Map<MatRM<T>> dwx(dir.wx.grad.data(), 4 * hd, in_);
        dwx.noalias() += dam.transpose() * xm;
        Eigen::Map<VecX<T>> db(dir.b.grad.data(), 4 * hd);
        db.noalias() += dam.colwise().sum().transpose();
      }
    }
  }

  Dir fwd_, bwd_;
  int in_ = 0, hidden_ = 0;
};

}  // namespace dsi::nn
