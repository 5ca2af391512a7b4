#pragma once

#include "bacdet/nn/feature_map.hpp"
#include "bacdet/nn/param_store.hpp"

#include <cmath>
#include <random>
#include <string>

namespace bacdet::nn {

enum class Mode { train, eval };

template <typename S>
using DenseMatrix = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using DenseVector = Eigen::Matrix<S, Eigen::Dynamic, 1>;

// ---------------------------------------------------------------------------
// im2col / col2im for stride-1 same-padded odd kernels.

template <typename S>
void im2col(const FeatureMap<S>& x, int ksize, DenseMatrix<S>& cols) {
  const int pad = ksize / 2;
  const int h = x.height, w = x.width;
  cols.setZero(x.channels * ksize * ksize, h * w);
  for (int c = 0; c < x.channels; ++c) {
    const auto xp = x.plane(c);
    for (int ky = 0; ky < ksize; ++ky) {
      const int sy = ky - pad;
      const int ys = std::max(0, -sy), ye = h - std::max(0, sy);
      for (int kx = 0; kx < ksize; ++kx) {
        const int sx = kx - pad;
        const int xs = std::max(0, -sx), xe = w - std::max(0, sx);
        const int kr = (c * ksize + ky) * ksize + kx;
        typename FeatureMap<S>::PlaneMap cp(cols.row(kr).data(), h, w);
        if (ye > ys && xe > xs)
          cp.block(ys, xs, ye - ys, xe - xs) = xp.block(ys + sy, xs + sx, ye - ys, xe - xs);
      }
    }
  }
}

template <typename S>
void col2im_accumulate(const DenseMatrix<S>& dcols, int channels, int h, int w, int ksize,
                       FeatureMap<S>& dx) {
  const int pad = ksize / 2;
  for (int c = 0; c < channels; ++c) {
    auto xp = dx.plane(c);
    for (int ky = 0; ky < ksize; ++ky) {
      const int sy = ky - pad;
      const int ys = std::max(0, -sy), ye = h - std::max(0, sy);
      for (int kx = 0; kx < ksize; ++kx) {
        const int sx = kx - pad;
        const int xs = std::max(0, -sx), xe = w - std::max(0, sx);
        const int kr = (c * ksize + ky) * ksize + kx;
        typename FeatureMap<S>::ConstPlaneMap cp(dcols.row(kr).data(), h, w);
        if (ye > ys && xe > xs)
          xp.block(ys + sy, xs + sx, ye - ys, xe - xs) += cp.block(ys, xs, ye - ys, xe - xs);
      }
    }
  }
}

// ---------------------------------------------------------------------------
// 2-D convolution, same padding. Stride 1 for any odd kernel; stride 2 is
// supported for 1x1 kernels only (attention-gate downsampling).

template <typename S>
struct Conv2d {
  int in_ch = 0, out_ch = 0, ksize = 3, stride = 1;
  int w = -1, b = -1;

  struct Cache {
    FeatureMap<S> input;
  };

  void init(ParamStore<S>& params, const std::string& name, int in, int out, int k, int s,
            std::mt19937_64& rng) {
    in_ch = in;
    out_ch = out;
    ksize = k;
    stride = s;
    w = params.add(name + ".w", out, in * k * k);
    b = params.add(name + ".b", out, 1);
    // He-normal fan-in init
    const double stddev = std::sqrt(2.0 / (static_cast<double>(in) * k * k));
    std::normal_distribution<double> dist(0.0, stddev);
    auto& W = params[w];
    for (Eigen::Index i = 0; i < W.rows(); ++i)
      for (Eigen::Index j = 0; j < W.cols(); ++j) W(i, j) = static_cast<S>(dist(rng));
  }

  FeatureMap<S> forward(const ParamStore<S>& params, const FeatureMap<S>& x,
                        Cache* cache) const {
    if (x.channels != in_ch)
      throw data_error("conv channel mismatch: input has " + std::to_string(x.channels) +
                       ", layer expects " + std::to_string(in_ch));
    if (cache) cache->input = x;

    const int oh = x.height / stride, ow = x.width / stride;
    FeatureMap<S> y(out_ch, oh, ow);
    if (ksize == 1 && stride == 1) {
      y.data.noalias() = params[w] * x.data;
    } else if (ksize == 1 && stride == 2) {
      DenseMatrix<S> sampled(in_ch, oh * ow);
      for (int c = 0; c < in_ch; ++c) {
        const auto xp = x.plane(c);
        typename FeatureMap<S>::PlaneMap sp(sampled.row(c).data(), oh, ow);
        for (int yy = 0; yy < oh; ++yy)
          for (int xx = 0; xx < ow; ++xx) sp(yy, xx) = xp(2 * yy, 2 * xx);
      }
      y.data.noalias() = params[w] * sampled;
    } else {
      DenseMatrix<S> cols;
      im2col(x, ksize, cols);
      y.data.noalias() = params[w] * cols;
    }
    y.data.colwise() += params[b].col(0);
    return y;
  }

  FeatureMap<S> backward(const ParamStore<S>& params, GradStore<S>& grads, const Cache& cache,
                         const FeatureMap<S>& dy) const {
    const FeatureMap<S>& x = cache.input;
    grads[b].col(0) += dy.data.rowwise().sum();

    FeatureMap<S> dx = FeatureMap<S>::zeros(in_ch, x.height, x.width);
    if (ksize == 1 && stride == 1) {
      grads[w].noalias() += dy.data * x.data.transpose();
      dx.data.noalias() = params[w].transpose() * dy.data;
    } else if (ksize == 1 && stride == 2) {
      const int oh = x.height / 2, ow = x.width / 2;
      DenseMatrix<S> sampled(in_ch, oh * ow);
      for (int c = 0; c < in_ch; ++c) {
        const auto xp = x.plane(c);
        typename FeatureMap<S>::PlaneMap sp(sampled.row(c).data(), oh, ow);
        for (int yy = 0; yy < oh; ++yy)
          for (int xx = 0; xx < ow; ++xx) sp(yy, xx) = xp(2 * yy, 2 * xx);
      }
      grads[w].noalias() += dy.data * sampled.transpose();
      DenseMatrix<S> dsampled = params[w].transpose() * dy.data;
      for (int c = 0; c < in_ch; ++c) {
        auto xp = dx.plane(c);
        typename FeatureMap<S>::ConstPlaneMap sp(dsampled.row(c).data(), oh, ow);
        for (int yy = 0; yy < oh; ++yy)
          for (int xx = 0; xx < ow; ++xx) xp(2 * yy, 2 * xx) = sp(yy, xx);
      }
    } else {
      DenseMatrix<S> cols;
      im2col(x, ksize, cols);  // rebuilt instead of cached; trades FLOPs for memory
      grads[w].noalias() += dy.data * cols.transpose();
      DenseMatrix<S> dcols = params[w].transpose() * dy.data;
      col2im_accumulate(dcols, in_ch, x.height, x.width, ksize, dx);
    }
    return dx;
  }
};

// ---------------------------------------------------------------------------
// Batch normalization, per channel over the sample's spatial extent in train
// mode; eval mode uses running statistics. Running stats live in a separate
// state store and are committed explicitly by the trainer (forward is pure).

template <typename S>
struct BatchNorm2d {
  int channels = 0;
  S eps = S(1e-5);
  int gamma = -1, beta = -1;        // learnable, in the param store
  int run_mean = -1, run_var = -1;  // in the state store

  struct Cache {
    FeatureMap<S> xhat;
    DenseVector<S> inv_std;
    DenseVector<S> mu, var;  // batch statistics (train mode)
    Mode mode = Mode::eval;
  };

  void init(ParamStore<S>& params, ParamStore<S>& state, const std::string& name, int ch,
            S epsilon) {
    channels = ch;
    eps = epsilon;
    gamma = params.add(name + ".gamma", ch, 1);
    beta = params.add(name + ".beta", ch, 1);
    params[gamma].setOnes();
    run_mean = state.add(name + ".running_mean", ch, 1);
    run_var = state.add(name + ".running_var", ch, 1);
    state[run_var].setOnes();
  }

  FeatureMap<S> forward(const ParamStore<S>& params, const ParamStore<S>& state,
                        const FeatureMap<S>& x, Mode mode, Cache* cache) const {
    const int n = x.plane_size();
    FeatureMap<S> y(x.channels, x.height, x.width);
    FeatureMap<S> xhat(x.channels, x.height, x.width);
    DenseVector<S> inv_std(channels), mu(channels), var(channels);
    for (int c = 0; c < channels; ++c) {
      S m, v;
      if (mode == Mode::train) {
        m = x.data.row(c).mean();
        v = (x.data.row(c).array() - m).square().sum() / static_cast<S>(n);
      } else {
        m = state[run_mean](c, 0);
        v = state[run_var](c, 0);
      }
      const S is = S(1) / std::sqrt(v + eps);
      mu(c) = m;
      var(c) = v;
      inv_std(c) = is;
      xhat.data.row(c) = (x.data.row(c).array() - m) * is;
      y.data.row(c) = xhat.data.row(c).array() * params[gamma](c, 0) + params[beta](c, 0);
    }
    if (cache) {
      cache->xhat = std::move(xhat);
      cache->inv_std = std::move(inv_std);
      cache->mu = std::move(mu);
      cache->var = std::move(var);
      cache->mode = mode;
    }
    return y;
  }

  FeatureMap<S> backward(const ParamStore<S>& params, GradStore<S>& grads, const Cache& cache,
                         const FeatureMap<S>& dy) const {
    const int n = dy.plane_size();
    FeatureMap<S> dx(dy.channels, dy.height, dy.width);
    for (int c = 0; c < channels; ++c) {
      const auto dyr = dy.data.row(c).array();
      const auto xh = cache.xhat.data.row(c).array();
      grads[gamma](c, 0) += (dyr * xh).sum();
      grads[beta](c, 0) += dyr.sum();
      const S g = params[gamma](c, 0);
      if (cache.mode == Mode::train) {
        const S mean_dy = dyr.mean();
        const S mean_dy_xhat = (dyr * xh).sum() / static_cast<S>(n);
        dx.data.row(c) = (g * cache.inv_std(c)) * (dyr - mean_dy - xh * mean_dy_xhat);
      } else {
        dx.data.row(c) = dyr * (g * cache.inv_std(c));
      }
    }
    return dx;
  }

  /// Momentum update of running statistics from batch-averaged sample stats.
  void update_running(ParamStore<S>& state, const DenseVector<S>& batch_mu,
                      const DenseVector<S>& batch_var, S momentum) const {
    state[run_mean] = momentum * state[run_mean] + (S(1) - momentum) * batch_mu;
    state[run_var] = momentum * state[run_var] + (S(1) - momentum) * batch_var;
  }
};

// ---------------------------------------------------------------------------

template <typename S>
struct Dropout {
  double rate = 0.0;

  struct Cache {
    DenseMatrix<S> mask;
    bool active = false;
  };

  FeatureMap<S> forward(const FeatureMap<S>& x, Mode mode, std::mt19937_64& rng,
                        Cache* cache) const {
    if (mode == Mode::eval || rate <= 0.0) {
      if (cache) cache->active = false;
      return x;
    }
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    const S keep_scale = static_cast<S>(1.0 / (1.0 - rate));
    DenseMatrix<S> mask(x.data.rows(), x.data.cols());
    for (Eigen::Index i = 0; i < mask.rows(); ++i)
      for (Eigen::Index j = 0; j < mask.cols(); ++j)
        mask(i, j) = uni(rng) >= rate ? keep_scale : S(0);
    FeatureMap<S> y = x;
    y.data.array() *= mask.array();
    if (cache) {
      cache->mask = std::move(mask);
      cache->active = true;
    }
    return y;
  }

  FeatureMap<S> backward(const Cache& cache, const FeatureMap<S>& dy) const {
    if (!cache.active) return dy;
    FeatureMap<S> dx = dy;
    dx.data.array() *= cache.mask.array();
    return dx;
  }
};

// ---------------------------------------------------------------------------

template <typename S>
struct ReluCache {
  DenseMatrix<S> mask;
};

template <typename S>
FeatureMap<S> relu_forward(const FeatureMap<S>& x, ReluCache<S>* cache) {
  FeatureMap<S> y = x;
  y.data = y.data.cwiseMax(S(0));
  if (cache) cache->mask = (x.data.array() > S(0)).template cast<S>();
  return y;
}

template <typename S>
FeatureMap<S> relu_backward(const ReluCache<S>& cache, const FeatureMap<S>& dy) {
  FeatureMap<S> dx = dy;
  dx.data.array() *= cache.mask.array();
  return dx;
}

template <typename S>
FeatureMap<S> sigmoid(const FeatureMap<S>& x) {
  FeatureMap<S> y = x;
  y.data = y.data.unaryExpr([](S v) {
    if (v >= S(0)) return S(1) / (S(1) + std::exp(-v));
    const S e = std::exp(v);
    return e / (S(1) + e);
  });
  return y;
}

// ---------------------------------------------------------------------------
// 2x2 max pooling, stride 2. Spatial dims must be even (guaranteed by the
// input-size-divisible-by-2^depth config invariant).

template <typename S>
struct MaxPoolCache {
  Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> argmax;
  int in_h = 0, in_w = 0;
};

template <typename S>
FeatureMap<S> maxpool2_forward(const FeatureMap<S>& x, MaxPoolCache<S>* cache) {
  if (x.height % 2 != 0 || x.width % 2 != 0)
    throw data_error("maxpool2 requires even spatial dims, got " + std::to_string(x.height) +
                     "x" + std::to_string(x.width));
  const int oh = x.height / 2, ow = x.width / 2;
  FeatureMap<S> y(x.channels, oh, ow);
  if (cache) {
    cache->argmax.resize(x.channels, oh * ow);
    cache->in_h = x.height;
    cache->in_w = x.width;
  }
  for (int c = 0; c < x.channels; ++c) {
    const auto xp = x.plane(c);
    for (int yy = 0; yy < oh; ++yy)
      for (int xx = 0; xx < ow; ++xx) {
        int by = 2 * yy, bx = 2 * xx;
        S best = xp(by, bx);
        int best_idx = by * x.width + bx;
        for (int a = 0; a < 2; ++a)
          for (int bcol = 0; bcol < 2; ++bcol) {
            const S v = xp(by + a, bx + bcol);
            if (v > best) {
              best = v;
              best_idx = (by + a) * x.width + (bx + bcol);
            }
          }
        y.at(c, yy, xx) = best;
        if (cache) cache->argmax(c, yy * ow + xx) = best_idx;
      }
  }
  return y;
}

template <typename S>
FeatureMap<S> maxpool2_backward(const MaxPoolCache<S>& cache, const FeatureMap<S>& dy) {
  FeatureMap<S> dx = FeatureMap<S>::zeros(dy.channels, cache.in_h, cache.in_w);
  for (int c = 0; c < dy.channels; ++c)
    for (int i = 0; i < dy.plane_size(); ++i) dx.data(c, cache.argmax(c, i)) += dy.data(c, i);
  return dx;
}

// ---------------------------------------------------------------------------
// Nearest-neighbor 2x upsampling.

template <typename S>
FeatureMap<S> upsample2_forward(const FeatureMap<S>& x) {
  FeatureMap<S> y(x.channels, x.height * 2, x.width * 2);
  for (int c = 0; c < x.channels; ++c) {
    const auto xp = x.plane(c);
    auto yp = y.plane(c);
    for (int yy = 0; yy < x.height; ++yy)
      for (int xx = 0; xx < x.width; ++xx) {
        const S v = xp(yy, xx);
        yp(2 * yy, 2 * xx) = v;
        yp(2 * yy, 2 * xx + 1) = v;
        yp(2 * yy + 1, 2 * xx) = v;
        yp(2 * yy + 1, 2 * xx + 1) = v;
      }
  }
  return y;
}

template <typename S>
FeatureMap<S> upsample2_backward(const FeatureMap<S>& dy) {
  const int oh = dy.height / 2, ow = dy.width / 2;
  FeatureMap<S> dx(dy.channels, oh, ow);
  for (int c = 0; c < dy.channels; ++c) {
    const auto dp = dy.plane(c);
    auto xp = dx.plane(c);
    for (int yy = 0; yy < oh; ++yy)
      for (int xx = 0; xx < ow; ++xx)
        xp(yy, xx) = dp(2 * yy, 2 * xx) + dp(2 * yy, 2 * xx + 1) + dp(2 * yy + 1, 2 * xx) +
                     dp(2 * yy + 1, 2 * xx + 1);
  }
  return dx;
}

// ---------------------------------------------------------------------------

template <typename S>
FeatureMap<S> concat_channels(const FeatureMap<S>& a, const FeatureMap<S>& b) {
  if (a.height != b.height || a.width != b.width)
    throw data_error("concat spatial mismatch");
  FeatureMap<S> y(a.channels + b.channels, a.height, a.width);
  y.data.topRows(a.channels) = a.data;
  y.data.bottomRows(b.channels) = b.data;
  return y;
}

template <typename S>
std::pair<FeatureMap<S>, FeatureMap<S>> split_channels(const FeatureMap<S>& y, int a_channels) {
  FeatureMap<S> a(a_channels, y.height, y.width);
  FeatureMap<S> b(y.channels - a_channels, y.height, y.width);
  a.data = y.data.topRows(a_channels);
  b.data = y.data.bottomRows(y.channels - a_channels);
  return {std::move(a), std::move(b)};
}

}  // namespace bacdet::nn
