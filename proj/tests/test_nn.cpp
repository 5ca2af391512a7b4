#include "doctest.h"

#include "bacdet/nn/feature_map.hpp"
#include "bacdet/nn/layers.hpp"
#include "bacdet/nn/param_store.hpp"
#include "bacdet/types.hpp"

#include <cmath>
#include <random>

using namespace bacdet;
using namespace bacdet::nn;

namespace {

template <typename S>
FeatureMap<S> random_map(int c, int h, int w, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  FeatureMap<S> f(c, h, w);
  for (Eigen::Index i = 0; i < f.data.size(); ++i)
    f.data.data()[i] = static_cast<S>(uni(rng));
  return f;
}

template <typename S>
double dot(const FeatureMap<S>& a, const FeatureMap<S>& b) {
  return (a.data.array().template cast<double>() * b.data.array().template cast<double>()).sum();
}

// Direct convolution, same padding, for checking the im2col/GEMM paths.
template <typename S>
FeatureMap<S> naive_conv(const FeatureMap<S>& x, const DenseMatrix<S>& W,
                         const DenseMatrix<S>& bias, int out_ch, int ksize, int stride) {
  const int pad = ksize / 2;
  const int oh = x.height / stride, ow = x.width / stride;
  FeatureMap<S> y(out_ch, oh, ow);
  for (int oc = 0; oc < out_ch; ++oc)
    for (int yy = 0; yy < oh; ++yy)
      for (int xx = 0; xx < ow; ++xx) {
        double acc = bias(oc, 0);
        for (int ic = 0; ic < x.channels; ++ic)
          for (int ky = 0; ky < ksize; ++ky)
            for (int kx = 0; kx < ksize; ++kx) {
              const int sy = yy * stride + ky - pad;
              const int sx = xx * stride + kx - pad;
              if (sy < 0 || sy >= x.height || sx < 0 || sx >= x.width) continue;
              acc += static_cast<double>(W(oc, (ic * ksize + ky) * ksize + kx)) *
                     static_cast<double>(x.at(ic, sy, sx));
            }
        y.at(oc, yy, xx) = static_cast<S>(acc);
      }
  return y;
}

}  // namespace

TEST_CASE("conv2d forward matches direct convolution") {
  std::mt19937_64 rng(7);
  struct Shape {
    int in_ch, out_ch, ksize, stride, h, w;
  };
  const Shape shapes[] = {
      {3, 4, 3, 1, 8, 10}, {2, 3, 5, 1, 9, 7}, {4, 2, 1, 1, 6, 6}, {4, 3, 1, 2, 8, 6},
  };
  for (const auto& s : shapes) {
    CAPTURE(s.ksize);
    CAPTURE(s.stride);
    ParamStore<double> params;
    Conv2d<double> conv;
    conv.init(params, "c", s.in_ch, s.out_ch, s.ksize, s.stride, rng);
    std::uniform_real_distribution<double> uni(-0.5, 0.5);
    for (Eigen::Index i = 0; i < params[conv.b].rows(); ++i) params[conv.b](i, 0) = uni(rng);
    const auto x = random_map<double>(s.in_ch, s.h, s.w, rng);
    const auto got = conv.forward(params, x, nullptr);
    const auto want = naive_conv(x, params[conv.w], params[conv.b], s.out_ch, s.ksize, s.stride);
    REQUIRE(got.same_shape(want));
    CHECK((got.data - want.data).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("conv2d rejects channel mismatch") {
  std::mt19937_64 rng(1);
  ParamStore<float> params;
  Conv2d<float> conv;
  conv.init(params, "c", 3, 4, 3, 1, rng);
  const auto x = random_map<float>(2, 4, 4, rng);
  CHECK_THROWS_AS(conv.forward(params, x, nullptr), data_error);
}

TEST_CASE("conv2d backward gradients match finite differences") {
  std::mt19937_64 rng(11);
  struct Shape {
    int in_ch, out_ch, ksize, stride, h, w;
  };
  const Shape shapes[] = {{2, 3, 3, 1, 5, 4}, {3, 2, 1, 1, 4, 5}, {2, 2, 1, 2, 6, 4}};
  for (const auto& s : shapes) {
    CAPTURE(s.ksize);
    CAPTURE(s.stride);
    ParamStore<double> params;
    Conv2d<double> conv;
    conv.init(params, "c", s.in_ch, s.out_ch, s.ksize, s.stride, rng);
    auto x = random_map<double>(s.in_ch, s.h, s.w, rng);
    const auto r = random_map<double>(s.out_ch, s.h / s.stride, s.w / s.stride, rng);

    // Loss L = <conv(x), r>, so dL/dy = r.
    typename Conv2d<double>::Cache cache;
    conv.forward(params, x, &cache);
    GradStore<double> grads(params);
    const auto dx = conv.backward(params, grads, cache, r);

    const double eps = 1e-6;
    auto loss = [&]() { return dot(conv.forward(params, x, nullptr), r); };

    auto& W = params[conv.w];
    for (Eigen::Index i = 0; i < W.rows(); ++i)
      for (Eigen::Index j = 0; j < W.cols(); ++j) {
        const double keep = W(i, j);
        W(i, j) = keep + eps;
        const double hi = loss();
        W(i, j) = keep - eps;
        const double lo = loss();
        W(i, j) = keep;
        CHECK(grads[conv.w](i, j) == doctest::Approx((hi - lo) / (2 * eps)).epsilon(1e-6));
      }
    auto& B = params[conv.b];
    for (Eigen::Index i = 0; i < B.rows(); ++i) {
      const double keep = B(i, 0);
      B(i, 0) = keep + eps;
      const double hi = loss();
      B(i, 0) = keep - eps;
      const double lo = loss();
      B(i, 0) = keep;
      CHECK(grads[conv.b](i, 0) == doctest::Approx((hi - lo) / (2 * eps)).epsilon(1e-6));
    }
    for (Eigen::Index i = 0; i < x.data.size(); ++i) {
      const double keep = x.data.data()[i];
      x.data.data()[i] = keep + eps;
      const double hi = loss();
      x.data.data()[i] = keep - eps;
      const double lo = loss();
      x.data.data()[i] = keep;
      CHECK(dx.data.data()[i] == doctest::Approx((hi - lo) / (2 * eps)).epsilon(1e-6));
    }
  }
}

TEST_CASE("im2col and col2im are adjoint") {
  std::mt19937_64 rng(17);
  const auto x = random_map<double>(3, 6, 5, rng);
  for (int ksize : {1, 3, 5}) {
    CAPTURE(ksize);
    DenseMatrix<double> cols;
    im2col(x, ksize, cols);
    DenseMatrix<double> c(cols.rows(), cols.cols());
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    for (Eigen::Index i = 0; i < c.size(); ++i) c.data()[i] = uni(rng);
    auto back = FeatureMap<double>::zeros(3, 6, 5);
    col2im_accumulate(c, 3, 6, 5, ksize, back);
    const double lhs = (cols.array() * c.array()).sum();
    const double rhs = dot(x, back);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
  }
}

TEST_CASE("maxpool picks block maxima and routes gradients to them") {
  FeatureMap<float> x(1, 4, 4);
  // Row-major plane:
  //  1  5 | 2  2
  //  3  4 | 8  0
  //  ------+-----
  //  0  1 | 3  3
  //  9  2 | 3  3
  const float vals[16] = {1, 5, 2, 2, 3, 4, 8, 0, 0, 1, 3, 3, 9, 2, 3, 3};
  for (int i = 0; i < 16; ++i) x.data(0, i) = vals[i];

  MaxPoolCache<float> cache;
  const auto y = maxpool2_forward(x, &cache);
  REQUIRE(y.height == 2);
  REQUIRE(y.width == 2);
  CHECK(y.at(0, 0, 0) == 5.0f);
  CHECK(y.at(0, 0, 1) == 8.0f);
  CHECK(y.at(0, 1, 0) == 9.0f);
  CHECK(y.at(0, 1, 1) == 3.0f);  // tie: earliest raster position wins

  FeatureMap<float> dy(1, 2, 2);
  dy.data << 10, 20, 30, 40;
  const auto dx = maxpool2_backward(cache, dy);
  REQUIRE(dx.same_shape(x));
  CHECK(dx.at(0, 0, 1) == 10.0f);
  CHECK(dx.at(0, 1, 2) == 20.0f);
  CHECK(dx.at(0, 3, 0) == 30.0f);
  CHECK(dx.at(0, 2, 2) == 40.0f);
  CHECK(dx.data.cwiseAbs().sum() == 100.0f);  // nothing leaked elsewhere
}

TEST_CASE("maxpool backward is the adjoint of the selection") {
  std::mt19937_64 rng(23);
  const auto x = random_map<double>(3, 8, 6, rng);
  MaxPoolCache<double> cache;
  const auto y = maxpool2_forward(x, &cache);
  const auto dy = random_map<double>(3, 4, 3, rng);
  const auto dx = maxpool2_backward(cache, dy);
  CHECK(dot(y, dy) == doctest::Approx(dot(x, dx)).epsilon(1e-12));
}

TEST_CASE("maxpool requires even spatial dims") {
  FeatureMap<float> x(1, 3, 4);
  x.data.setZero();
  MaxPoolCache<float> cache;
  CHECK_THROWS_AS(maxpool2_forward(x, &cache), data_error);
}

TEST_CASE("upsample2 replicates pixels and backward sums the 2x2 blocks") {
  FeatureMap<double> x(1, 2, 2);
  x.data << 1, 2, 3, 4;
  const auto y = upsample2_forward(x);
  REQUIRE(y.height == 4);
  REQUIRE(y.width == 4);
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) {
      CHECK(y.at(0, 0 + a, 0 + b) == 1.0);
      CHECK(y.at(0, 0 + a, 2 + b) == 2.0);
      CHECK(y.at(0, 2 + a, 0 + b) == 3.0);
      CHECK(y.at(0, 2 + a, 2 + b) == 4.0);
    }

  std::mt19937_64 rng(29);
  const auto xr = random_map<double>(2, 5, 7, rng);
  const auto yr = upsample2_forward(xr);
  const auto dy = random_map<double>(2, 10, 14, rng);
  const auto dx = upsample2_backward(dy);
  CHECK(dot(yr, dy) == doctest::Approx(dot(xr, dx)).epsilon(1e-12));
}

TEST_CASE("relu clamps negatives and masks their gradients") {
  FeatureMap<double> x(1, 1, 5);
  x.data << -2, -0.5, 0, 0.5, 2;
  ReluCache<double> cache;
  const auto y = relu_forward(x, &cache);
  CHECK(y.data(0, 0) == 0.0);
  CHECK(y.data(0, 1) == 0.0);
  CHECK(y.data(0, 2) == 0.0);
  CHECK(y.data(0, 3) == 0.5);
  CHECK(y.data(0, 4) == 2.0);

  FeatureMap<double> dy(1, 1, 5);
  dy.data << 1, 1, 1, 1, 1;
  const auto dx = relu_backward(cache, dy);
  CHECK(dx.data(0, 0) == 0.0);
  CHECK(dx.data(0, 1) == 0.0);
  CHECK(dx.data(0, 2) == 0.0);  // subgradient 0 at the origin
  CHECK(dx.data(0, 3) == 1.0);
  CHECK(dx.data(0, 4) == 1.0);
}

TEST_CASE("sigmoid values and saturation stability") {
  FeatureMap<double> x(1, 1, 5);
  x.data << -100, -1, 0, 1, 100;
  const auto y = sigmoid(x);
  CHECK(y.data(0, 0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(y.data(0, 1) == doctest::Approx(1.0 / (1.0 + std::exp(1.0))).epsilon(1e-12));
  CHECK(y.data(0, 2) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(y.data(0, 3) == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))).epsilon(1e-12));
  CHECK(y.data(0, 4) == doctest::Approx(1.0).epsilon(1e-12));
  for (Eigen::Index i = 0; i < y.data.size(); ++i) CHECK(std::isfinite(y.data.data()[i]));
}

TEST_CASE("dropout is identity in eval mode and scales survivors in train mode") {
  std::mt19937_64 rng(31);
  const auto x = random_map<float>(2, 6, 6, rng);

  Dropout<float> drop;
  drop.rate = 0.25;

  std::mt19937_64 r1(5);
  Dropout<float>::Cache c_eval;
  const auto y_eval = drop.forward(x, Mode::eval, r1, &c_eval);
  CHECK(y_eval.data == x.data);
  CHECK_FALSE(c_eval.active);

  Dropout<float> off;
  off.rate = 0.0;
  const auto y_off = off.forward(x, Mode::train, r1, nullptr);
  CHECK(y_off.data == x.data);

  std::mt19937_64 r2(5);
  Dropout<float>::Cache cache;
  const auto y = drop.forward(x, Mode::train, r2, &cache);
  REQUIRE(cache.active);
  const float keep_scale = 1.0f / 0.75f;
  int zeroed = 0;
  for (Eigen::Index i = 0; i < y.data.size(); ++i) {
    const float v = y.data.data()[i];
    const float xv = x.data.data()[i];
    const bool dropped = v == 0.0f && cache.mask.data()[i] == 0.0f;
    if (dropped)
      ++zeroed;
    else
      CHECK(v == doctest::Approx(xv * keep_scale).epsilon(1e-6));
  }
  CHECK(zeroed > 0);
  CHECK(zeroed < y.data.size());

  // Same seed, same mask.
  std::mt19937_64 r3(5);
  const auto y2 = drop.forward(x, Mode::train, r3, nullptr);
  CHECK(y2.data == y.data);

  // Backward reapplies the cached mask.
  FeatureMap<float> dy(2, 6, 6);
  dy.data.setOnes();
  const auto dx = drop.backward(cache, dy);
  CHECK(dx.data == cache.mask);
}

TEST_CASE("batchnorm train mode standardizes each channel") {
  std::mt19937_64 rng(37);
  ParamStore<double> params, state;
  BatchNorm2d<double> bn;
  bn.init(params, state, "bn", 3, 1e-5);

  auto x = random_map<double>(3, 6, 6, rng);
  x.data.row(1).array() += 4.0;   // shift a channel
  x.data.row(2).array() *= 10.0;  // scale another

  BatchNorm2d<double>::Cache cache;
  const auto y = bn.forward(params, state, x, Mode::train, &cache);
  for (int c = 0; c < 3; ++c) {
    const double m = y.data.row(c).mean();
    const double v = (y.data.row(c).array() - m).square().sum() / y.plane_size();
    CHECK(m == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(v == doctest::Approx(1.0).epsilon(1e-3));  // off by var/(var+eps)
    CHECK(cache.mu(c) == doctest::Approx(x.data.row(c).mean()).epsilon(1e-12));
  }

  // gamma/beta apply per channel after standardization.
  params[bn.gamma](0, 0) = 2.0;
  params[bn.beta](0, 0) = -1.0;
  const auto y2 = bn.forward(params, state, x, Mode::train, nullptr);
  CHECK((y2.data.row(0) - (y.data.row(0).array() * 2.0 - 1.0).matrix()).cwiseAbs().maxCoeff() <
        1e-12);
  CHECK(y2.data.row(1) == y.data.row(1));
}

TEST_CASE("batchnorm eval mode uses running statistics") {
  ParamStore<double> params, state;
  BatchNorm2d<double> bn;
  bn.init(params, state, "bn", 1, 1e-5);
  state[bn.run_mean](0, 0) = 3.0;
  state[bn.run_var](0, 0) = 4.0;

  FeatureMap<double> x(1, 1, 3);
  x.data << 3, 5, 1;
  const auto y = bn.forward(params, state, x, Mode::eval, nullptr);
  const double is = 1.0 / std::sqrt(4.0 + 1e-5);
  CHECK(y.data(0, 0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(y.data(0, 1) == doctest::Approx(2.0 * is).epsilon(1e-12));
  CHECK(y.data(0, 2) == doctest::Approx(-2.0 * is).epsilon(1e-12));
}

TEST_CASE("batchnorm running stats follow the momentum update") {
  ParamStore<double> params, state;
  BatchNorm2d<double> bn;
  bn.init(params, state, "bn", 2, 1e-5);
  // init: mean 0, var 1
  DenseVector<double> mu(2), var(2);
  mu << 1.0, -2.0;
  var << 5.0, 0.5;
  bn.update_running(state, mu, var, 0.9);
  CHECK(state[bn.run_mean](0, 0) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(state[bn.run_mean](1, 0) == doctest::Approx(-0.2).epsilon(1e-12));
  CHECK(state[bn.run_var](0, 0) == doctest::Approx(0.9 + 0.5).epsilon(1e-12));
  CHECK(state[bn.run_var](1, 0) == doctest::Approx(0.9 + 0.05).epsilon(1e-12));
}

TEST_CASE("batchnorm backward matches finite differences in both modes") {
  std::mt19937_64 rng(41);
  for (Mode mode : {Mode::train, Mode::eval}) {
    CAPTURE(mode == Mode::train);
    ParamStore<double> params, state;
    BatchNorm2d<double> bn;
    bn.init(params, state, "bn", 2, 1e-5);
    std::uniform_real_distribution<double> uni(0.5, 1.5);
    for (int c = 0; c < 2; ++c) {
      params[bn.gamma](c, 0) = uni(rng);
      params[bn.beta](c, 0) = uni(rng) - 1.0;
      state[bn.run_mean](c, 0) = uni(rng) - 1.0;
      state[bn.run_var](c, 0) = uni(rng);
    }
    auto x = random_map<double>(2, 4, 4, rng);
    const auto r = random_map<double>(2, 4, 4, rng);

    BatchNorm2d<double>::Cache cache;
    bn.forward(params, state, x, mode, &cache);
    GradStore<double> grads(params);
    const auto dx = bn.backward(params, grads, cache, r);

    const double eps = 1e-6;
    auto loss = [&]() { return dot(bn.forward(params, state, x, mode, nullptr), r); };
    for (Eigen::Index i = 0; i < x.data.size(); ++i) {
      const double keep = x.data.data()[i];
      x.data.data()[i] = keep + eps;
      const double hi = loss();
      x.data.data()[i] = keep - eps;
      const double lo = loss();
      x.data.data()[i] = keep;
      CHECK(dx.data.data()[i] == doctest::Approx((hi - lo) / (2 * eps)).epsilon(1e-5));
    }
    for (int handle : {bn.gamma, bn.beta}) {
      auto& P = params[handle];
      for (Eigen::Index c = 0; c < P.rows(); ++c) {
        const double keep = P(c, 0);
        P(c, 0) = keep + eps;
        const double hi = loss();
        P(c, 0) = keep - eps;
        const double lo = loss();
        P(c, 0) = keep;
        CHECK(grads[handle](c, 0) == doctest::Approx((hi - lo) / (2 * eps)).epsilon(1e-5));
      }
    }
  }
}

TEST_CASE("concat and split are inverse") {
  std::mt19937_64 rng(43);
  const auto a = random_map<float>(3, 4, 5, rng);
  const auto b = random_map<float>(2, 4, 5, rng);
  const auto y = concat_channels(a, b);
  REQUIRE(y.channels == 5);
  const auto [a2, b2] = split_channels(y, 3);
  CHECK(a2.data == a.data);
  CHECK(b2.data == b.data);

  const auto c = random_map<float>(1, 3, 5, rng);
  CHECK_THROWS_AS(concat_channels(a, c), data_error);
}

TEST_CASE("grad store zero, accumulate, and scale") {
  ParamStore<double> params;
  const int h0 = params.add("a", 2, 2);
  const int h1 = params.add("b", 1, 3);

  GradStore<double> g(params);
  REQUIRE(g.size() == 2);
  CHECK(g[h0].isZero());

  g[h0] << 1, 2, 3, 4;
  g[h1] << 5, 6, 7;

  GradStore<double> other(params);
  other[h0] << 10, 20, 30, 40;
  other[h1] << 1, 1, 1;
  g.accumulate(other);
  CHECK(g[h0](0, 0) == 11.0);
  CHECK(g[h1](0, 2) == 8.0);

  g.scale(0.5);
  CHECK(g[h0](1, 1) == 22.0);
  CHECK(g[h1](0, 0) == 3.0);

  g.zero();
  CHECK(g[h0].isZero());
  CHECK(g[h1].isZero());
}

TEST_CASE("feature map conversions from byte planes") {
  BytePlane r(2, 2), g(2, 2), b(2, 2);
  r << 0, 255, 51, 102;
  g.setConstant(255);
  b.setZero();
  const auto f = to_feature_map<float>({r, g, b});
  REQUIRE(f.channels == 3);
  CHECK(f.at(0, 0, 0) == 0.0f);
  CHECK(f.at(0, 0, 1) == 1.0f);
  CHECK(f.at(0, 1, 0) == doctest::Approx(51.0 / 255.0));
  CHECK(f.at(1, 1, 1) == 1.0f);
  CHECK(f.at(2, 0, 0) == 0.0f);

  BytePlane bits(2, 2);
  bits << 0, 1, 1, 0;
  const auto t = mask_to_target<float>(bits);
  CHECK(t.at(0, 0, 0) == 0.0f);
  CHECK(t.at(0, 0, 1) == 1.0f);
  CHECK(t.at(0, 1, 0) == 1.0f);
  CHECK(t.at(0, 1, 1) == 0.0f);
}
