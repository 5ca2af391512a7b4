#pragma once

#include "bacdet/nn/checkpoint.hpp"
#include "bacdet/nn/layers.hpp"
#include "bacdet/types.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace bacdet {

struct SegModelConfig {
  int input_size = 256;
  int input_channels = 3;
  int depth = 4;
  int base_filters = 16;
  double dropout_rate = 0.1;
  double batchnorm_epsilon = 1e-5;

  void validate() const {
    if (depth < 1) throw config_error("segmodel depth must be >= 1");
    if (base_filters < 1) throw config_error("segmodel base_filters must be >= 1");
    if (input_channels < 1) throw config_error("segmodel input_channels must be >= 1");
    if (dropout_rate < 0.0 || dropout_rate >= 1.0)
      throw config_error("segmodel dropout_rate must lie in [0,1)");
    if (batchnorm_epsilon <= 0.0) throw config_error("segmodel batchnorm_epsilon must be > 0");
    const int stride_total = 1 << depth;
    if (input_size < stride_total || input_size % stride_total != 0)
      throw config_error("segmodel input_size " + std::to_string(input_size) +
                         " is not divisible by 2^depth = " + std::to_string(stride_total));
  }

  nlohmann::json to_json() const {
    return {{"input_size", input_size},
            {"input_channels", input_channels},
            {"depth", depth},
            {"base_filters", base_filters},
            {"dropout_rate", dropout_rate},
            {"batchnorm_epsilon", batchnorm_epsilon}};
  }

  static SegModelConfig from_json(const nlohmann::json& j) {
    SegModelConfig c;
    c.input_size = j.at("input_size").get<int>();
    c.input_channels = j.at("input_channels").get<int>();
    c.depth = j.at("depth").get<int>();
    c.base_filters = j.at("base_filters").get<int>();
    c.dropout_rate = j.at("dropout_rate").get<double>();
    c.batchnorm_epsilon = j.at("batchnorm_epsilon").get<double>();
    return c;
  }
};

namespace nn {

// ---------------------------------------------------------------------------
// Residual convolution block: main path conv3x3 -> BN -> dropout -> ReLU,
// twice; shortcut identity (or 1x1 conv + BN when channel counts differ);
// paths summed, final ReLU.

template <typename S>
struct ResidualBlock {
  Conv2d<S> conv1, conv2, conv_short;
  BatchNorm2d<S> bn1, bn2, bn_short;
  Dropout<S> drop;
  bool projected = false;
  int in_ch = 0, out_ch = 0;

  struct Cache {
    typename Conv2d<S>::Cache c1, c2, cs;
    typename BatchNorm2d<S>::Cache b1, b2, bs;
    typename Dropout<S>::Cache d1, d2;
    ReluCache<S> r1, r2, rout;
  };

  void init(ParamStore<S>& params, ParamStore<S>& state, const std::string& name, int in,
            int out, double dropout_rate, S eps, std::mt19937_64& rng) {
    in_ch = in;
    out_ch = out;
    projected = in != out;
    drop.rate = dropout_rate;
    conv1.init(params, name + ".conv1", in, out, 3, 1, rng);
    bn1.init(params, state, name + ".bn1", out, eps);
    conv2.init(params, name + ".conv2", out, out, 3, 1, rng);
    bn2.init(params, state, name + ".bn2", out, eps);
    if (projected) {
      conv_short.init(params, name + ".conv_short", in, out, 1, 1, rng);
      bn_short.init(params, state, name + ".bn_short", out, eps);
    }
  }

  FeatureMap<S> forward(const ParamStore<S>& params, const ParamStore<S>& state,
                        const FeatureMap<S>& x, Mode mode, std::mt19937_64& rng,
                        Cache* cache) const {
    FeatureMap<S> m = conv1.forward(params, x, cache ? &cache->c1 : nullptr);
    m = bn1.forward(params, state, m, mode, cache ? &cache->b1 : nullptr);
    m = drop.forward(m, mode, rng, cache ? &cache->d1 : nullptr);
    m = relu_forward(m, cache ? &cache->r1 : nullptr);
    m = conv2.forward(params, m, cache ? &cache->c2 : nullptr);
    m = bn2.forward(params, state, m, mode, cache ? &cache->b2 : nullptr);
    m = drop.forward(m, mode, rng, cache ? &cache->d2 : nullptr);
    m = relu_forward(m, cache ? &cache->r2 : nullptr);

    FeatureMap<S> s;
    if (projected) {
      s = conv_short.forward(params, x, cache ? &cache->cs : nullptr);
      s = bn_short.forward(params, state, s, mode, cache ? &cache->bs : nullptr);
    } else {
      s = x;
    }
    m.data += s.data;
    return relu_forward(m, cache ? &cache->rout : nullptr);
  }

  FeatureMap<S> backward(const ParamStore<S>& params, GradStore<S>& grads, const Cache& cache,
                         const FeatureMap<S>& dy) const {
    FeatureMap<S> d = relu_backward(cache.rout, dy);

    FeatureMap<S> dm = relu_backward(cache.r2, d);
    dm = drop.backward(cache.d2, dm);
    dm = bn2.backward(params, grads, cache.b2, dm);
    dm = conv2.backward(params, grads, cache.c2, dm);
    dm = relu_backward(cache.r1, dm);
    dm = drop.backward(cache.d1, dm);
    dm = bn1.backward(params, grads, cache.b1, dm);
    FeatureMap<S> dx = conv1.backward(params, grads, cache.c1, dm);

    if (projected) {
      FeatureMap<S> ds = bn_short.backward(params, grads, cache.bs, d);
      ds = conv_short.backward(params, grads, cache.cs, ds);
      dx.data += ds.data;
    } else {
      dx.data += d.data;
    }
    return dx;
  }

  template <typename F>
  void visit_bn(const Cache& cache, F&& f) const {
    f(bn1, cache.b1);
    f(bn2, cache.b2);
    if (projected) f(bn_short, cache.bs);
  }
};

// ---------------------------------------------------------------------------
// Gating signal: 1x1 conv + BN + ReLU on the deeper feature map.

template <typename S>
struct GatingSignal {
  Conv2d<S> conv;
  BatchNorm2d<S> bn;

  struct Cache {
    typename Conv2d<S>::Cache c;
    typename BatchNorm2d<S>::Cache b;
    ReluCache<S> r;
  };

  void init(ParamStore<S>& params, ParamStore<S>& state, const std::string& name, int channels,
            S eps, std::mt19937_64& rng) {
    conv.init(params, name + ".conv", channels, channels, 1, 1, rng);
    bn.init(params, state, name + ".bn", channels, eps);
  }

  FeatureMap<S> forward(const ParamStore<S>& params, const ParamStore<S>& state,
                        const FeatureMap<S>& x, Mode mode, Cache* cache) const {
    FeatureMap<S> y = conv.forward(params, x, cache ? &cache->c : nullptr);
    y = bn.forward(params, state, y, mode, cache ? &cache->b : nullptr);
    return relu_forward(y, cache ? &cache->r : nullptr);
  }

  FeatureMap<S> backward(const ParamStore<S>& params, GradStore<S>& grads, const Cache& cache,
                         const FeatureMap<S>& dy) const {
    FeatureMap<S> d = relu_backward(cache.r, dy);
    d = bn.backward(params, grads, cache.b, d);
    return conv.backward(params, grads, cache.c, d);
  }

  template <typename F>
  void visit_bn(const Cache& cache, F&& f) const {
    f(bn, cache.b);
  }
};

// ---------------------------------------------------------------------------
// Additive attention gate. x is the skip connection at h x w, g the gating
// map at h/2 x w/2. One coefficient per spatial site, broadcast over
// channels, followed by a 1x1 projection + BN.

template <typename S>
struct AttentionGate {
  Conv2d<S> theta;  // x -> inter, 1x1 stride 2
  Conv2d<S> phi;    // g -> inter, 1x1
  Conv2d<S> psi;    // inter -> 1, 1x1
  Conv2d<S> proj;   // x_ch -> x_ch, 1x1
  BatchNorm2d<S> bn;
  int inter = 0;

  struct Cache {
    typename Conv2d<S>::Cache ct, cp, cq, cj;
    typename BatchNorm2d<S>::Cache b;
    ReluCache<S> radd;
    FeatureMap<S> att_small;  // coefficients at g resolution, post-sigmoid
    FeatureMap<S> att;        // coefficients upsampled to x resolution
    FeatureMap<S> x;          // skip input
    FeatureMap<S> gated;      // x scaled by att, before projection
  };

  void init(ParamStore<S>& params, ParamStore<S>& state, const std::string& name, int x_ch,
            int g_ch, S eps, std::mt19937_64& rng) {
    inter = std::max(x_ch / 2, 1);
    theta.init(params, name + ".theta", x_ch, inter, 1, 2, rng);
    phi.init(params, name + ".phi", g_ch, inter, 1, 1, rng);
    psi.init(params, name + ".psi", inter, 1, 1, 1, rng);
    proj.init(params, name + ".proj", x_ch, x_ch, 1, 1, rng);
    bn.init(params, state, name + ".bn", x_ch, eps);
  }

  FeatureMap<S> forward(const ParamStore<S>& params, const ParamStore<S>& state,
                        const FeatureMap<S>& x, const FeatureMap<S>& g, Mode mode,
                        Cache* cache) const {
    if (g.height * 2 != x.height || g.width * 2 != x.width)
      throw data_error("attention gate expects the gating map at half the skip resolution");

    FeatureMap<S> t = theta.forward(params, x, cache ? &cache->ct : nullptr);
    FeatureMap<S> f = phi.forward(params, g, cache ? &cache->cp : nullptr);
    t.data += f.data;
    FeatureMap<S> sr = relu_forward(t, cache ? &cache->radd : nullptr);
    FeatureMap<S> q = psi.forward(params, sr, cache ? &cache->cq : nullptr);
    FeatureMap<S> att_small = sigmoid(q);
    FeatureMap<S> att = upsample2_forward(att_small);

    FeatureMap<S> gated(x.channels, x.height, x.width);
    gated.data = (x.data.array().rowwise() * att.data.row(0).array()).matrix();

    if (cache) {
      cache->att_small = att_small;
      cache->att = att;
      cache->x = x;
      cache->gated = gated;
    }
    FeatureMap<S> y = proj.forward(params, gated, cache ? &cache->cj : nullptr);
    return bn.forward(params, state, y, mode, cache ? &cache->b : nullptr);
  }

  std::pair<FeatureMap<S>, FeatureMap<S>> backward(const ParamStore<S>& params,
                                                   GradStore<S>& grads, const Cache& cache,
                                                   const FeatureMap<S>& dy) const {
    FeatureMap<S> d = bn.backward(params, grads, cache.b, dy);
    FeatureMap<S> dgated = proj.backward(params, grads, cache.cj, d);

    FeatureMap<S> dx(cache.x.channels, cache.x.height, cache.x.width);
    dx.data = (dgated.data.array().rowwise() * cache.att.data.row(0).array()).matrix();

    FeatureMap<S> datt(1, cache.x.height, cache.x.width);
    datt.data.row(0) = (dgated.data.array() * cache.x.data.array()).colwise().sum().matrix();

    FeatureMap<S> datt_small = upsample2_backward(datt);
    FeatureMap<S> dq = datt_small;
    dq.data.array() *=
        cache.att_small.data.array() * (S(1) - cache.att_small.data.array());

    FeatureMap<S> dsr = psi.backward(params, grads, cache.cq, dq);
    FeatureMap<S> ds = relu_backward(cache.radd, dsr);
    FeatureMap<S> dxt = theta.backward(params, grads, cache.ct, ds);
    FeatureMap<S> dg = phi.backward(params, grads, cache.cp, ds);

    dx.data += dxt.data;
    return {std::move(dx), std::move(dg)};
  }

  template <typename F>
  void visit_bn(const Cache& cache, F&& f) const {
    f(bn, cache.b);
  }
};

// ---------------------------------------------------------------------------
// Full segmentation network. Encoder of residual blocks + 2x2 max-pooling,
// bridge block, decoder of (gating signal, attention gate, nearest-neighbor
// upsample + conv, concat, residual block) per level, 1x1 conv + sigmoid head.

template <typename S>
class AttentionResUNet {
 public:
  struct ForwardCache {
    std::vector<typename ResidualBlock<S>::Cache> enc;
    std::vector<MaxPoolCache<S>> pool;
    typename ResidualBlock<S>::Cache bridge;
    std::vector<typename GatingSignal<S>::Cache> gsig;
    std::vector<typename AttentionGate<S>::Cache> gate;
    std::vector<typename Conv2d<S>::Cache> upconv;
    std::vector<typename ResidualBlock<S>::Cache> dec;
    typename Conv2d<S>::Cache head;
    std::vector<int> skip_channels;
    FeatureMap<S> prob;  // sigmoid output, kept for loss gradients
  };

  void build(const SegModelConfig& config, std::uint64_t seed) {
    config.validate();
    cfg_ = config;
    seed_ = seed;
    params_ = ParamStore<S>();
    state_ = ParamStore<S>();
    enc_.assign(static_cast<std::size_t>(config.depth), {});
    gsig_.assign(static_cast<std::size_t>(config.depth), {});
    gate_.assign(static_cast<std::size_t>(config.depth), {});
    upconv_.assign(static_cast<std::size_t>(config.depth), {});
    dec_.assign(static_cast<std::size_t>(config.depth), {});

    std::mt19937_64 rng(seed);
    const S eps = static_cast<S>(config.batchnorm_epsilon);
    int in = config.input_channels;
    for (int l = 0; l < config.depth; ++l) {
      const int out = config.base_filters << l;
      enc_[l].init(params_, state_, "enc" + std::to_string(l), in, out, config.dropout_rate,
                   eps, rng);
      in = out;
    }
    bridge_.init(params_, state_, "bridge", in, config.base_filters << config.depth,
                 config.dropout_rate, eps, rng);
    for (int l = config.depth - 1; l >= 0; --l) {
      const int skip_ch = config.base_filters << l;
      const int deep_ch = config.base_filters << (l + 1);
      gsig_[l].init(params_, state_, "gsig" + std::to_string(l), deep_ch, eps, rng);
      gate_[l].init(params_, state_, "gate" + std::to_string(l), skip_ch, deep_ch, eps, rng);
      upconv_[l].init(params_, "upconv" + std::to_string(l), deep_ch, skip_ch, 3, 1, rng);
      dec_[l].init(params_, state_, "dec" + std::to_string(l), 2 * skip_ch, skip_ch,
                   config.dropout_rate, eps, rng);
    }
    head_.init(params_, "head", config.base_filters, 1, 1, 1, rng);
  }

  const SegModelConfig& config() const { return cfg_; }
  std::uint64_t seed() const { return seed_; }
  ParamStore<S>& params() { return params_; }
  const ParamStore<S>& params() const { return params_; }
  ParamStore<S>& state() { return state_; }
  const ParamStore<S>& state() const { return state_; }

  FeatureMap<S> forward(const FeatureMap<S>& x, Mode mode, std::mt19937_64* rng,
                        ForwardCache* cache) const {
    if (x.channels != cfg_.input_channels || x.height != cfg_.input_size ||
        x.width != cfg_.input_size)
      throw data_error("segmodel input must be " + std::to_string(cfg_.input_channels) + "x" +
                       std::to_string(cfg_.input_size) + "x" + std::to_string(cfg_.input_size) +
                       ", got " + std::to_string(x.channels) + "x" + std::to_string(x.height) +
                       "x" + std::to_string(x.width));
    if (mode == Mode::train && cfg_.dropout_rate > 0.0 && rng == nullptr)
      throw config_error("train-mode forward with dropout requires an rng");
    std::mt19937_64 dummy(0);
    std::mt19937_64& r = rng ? *rng : dummy;

    const int depth = cfg_.depth;
    if (cache) {
      cache->enc.resize(static_cast<std::size_t>(depth));
      cache->pool.resize(static_cast<std::size_t>(depth));
      cache->gsig.resize(static_cast<std::size_t>(depth));
      cache->gate.resize(static_cast<std::size_t>(depth));
      cache->upconv.resize(static_cast<std::size_t>(depth));
      cache->dec.resize(static_cast<std::size_t>(depth));
      cache->skip_channels.resize(static_cast<std::size_t>(depth));
    }

    std::vector<FeatureMap<S>> skips(static_cast<std::size_t>(depth));
    FeatureMap<S> cur = x;
    for (int l = 0; l < depth; ++l) {
      skips[l] = enc_[l].forward(params_, state_, cur, mode, r, cache ? &cache->enc[l] : nullptr);
      cur = maxpool2_forward(skips[l], cache ? &cache->pool[l] : nullptr);
    }
    cur = bridge_.forward(params_, state_, cur, mode, r, cache ? &cache->bridge : nullptr);
    for (int l = depth - 1; l >= 0; --l) {
      FeatureMap<S> g =
          gsig_[l].forward(params_, state_, cur, mode, cache ? &cache->gsig[l] : nullptr);
      FeatureMap<S> gated = gate_[l].forward(params_, state_, skips[l], g, mode,
                                             cache ? &cache->gate[l] : nullptr);
      FeatureMap<S> up = upsample2_forward(cur);
      up = upconv_[l].forward(params_, up, cache ? &cache->upconv[l] : nullptr);
      FeatureMap<S> cat = concat_channels(gated, up);
      if (cache) cache->skip_channels[l] = gated.channels;
      cur = dec_[l].forward(params_, state_, cat, mode, r, cache ? &cache->dec[l] : nullptr);
    }
    FeatureMap<S> logits = head_.forward(params_, cur, cache ? &cache->head : nullptr);
    FeatureMap<S> prob = sigmoid(logits);
    if (cache) cache->prob = prob;
    return prob;
  }

  FeatureMap<S> forward_eval(const FeatureMap<S>& x) const {
    return forward(x, Mode::eval, nullptr, nullptr);
  }

  /// dlogits is dL/dz at the head's pre-sigmoid output (the sigmoid is folded
  /// into the loss gradient for numerical stability).
  void backward(const ForwardCache& cache, const FeatureMap<S>& dlogits,
                GradStore<S>& grads) const {
    const int depth = cfg_.depth;
    FeatureMap<S> dcur = head_.backward(params_, grads, cache.head, dlogits);
    std::vector<FeatureMap<S>> dskips(static_cast<std::size_t>(depth));
    for (int l = 0; l < depth; ++l) {
      FeatureMap<S> dcat = dec_[l].backward(params_, grads, cache.dec[l], dcur);
      auto [dgated, dup] = split_channels(dcat, cache.skip_channels[l]);
      FeatureMap<S> dup_pre = upconv_[l].backward(params_, grads, cache.upconv[l], dup);
      FeatureMap<S> dcur_up = upsample2_backward(dup_pre);
      auto [dskip, dg] = gate_[l].backward(params_, grads, cache.gate[l], dgated);
      FeatureMap<S> dcur_g = gsig_[l].backward(params_, grads, cache.gsig[l], dg);
      dskips[l] = std::move(dskip);
      dcur = std::move(dcur_up);
      dcur.data += dcur_g.data;
    }
    dcur = bridge_.backward(params_, grads, cache.bridge, dcur);
    for (int l = depth - 1; l >= 0; --l) {
      FeatureMap<S> ds = maxpool2_backward(cache.pool[l], dcur);
      ds.data += dskips[l].data;
      dcur = enc_[l].backward(params_, grads, cache.enc[l], ds);
    }
  }

  /// Visits every batch-norm layer together with its cache entry, in a fixed
  /// structural order. Used by the trainer to commit running statistics.
  template <typename F>
  void visit_bn(const ForwardCache& cache, F&& f) const {
    for (int l = 0; l < cfg_.depth; ++l) enc_[l].visit_bn(cache.enc[l], f);
    bridge_.visit_bn(cache.bridge, f);
    for (int l = cfg_.depth - 1; l >= 0; --l) {
      gsig_[l].visit_bn(cache.gsig[l], f);
      gate_[l].visit_bn(cache.gate[l], f);
      dec_[l].visit_bn(cache.dec[l], f);
    }
  }

  void save(const std::filesystem::path& path) const {
    nlohmann::json config = cfg_.to_json();
    config["seed"] = seed_;
    save_checkpoint(path, "segmodel", config, params_, state_);
  }

  static AttentionResUNet load(const std::filesystem::path& path) {
    CheckpointInfo info = peek_checkpoint(path);
    if (info.kind != "segmodel")
      throw io_error("checkpoint at " + path.string() + " is a '" + info.kind +
                     "' container, expected 'segmodel'");
    AttentionResUNet model;
    model.build(SegModelConfig::from_json(info.config),
                info.config.at("seed").get<std::uint64_t>());
    load_checkpoint_into(path, model.params_, model.state_);
    return model;
  }

  // Test access to composite blocks.
  const ResidualBlock<S>& encoder_block(int l) const { return enc_[static_cast<std::size_t>(l)]; }
  const AttentionGate<S>& attention_gate(int l) const { return gate_[static_cast<std::size_t>(l)]; }

 private:
  SegModelConfig cfg_;
  std::uint64_t seed_ = 0;
  ParamStore<S> params_;
  ParamStore<S> state_;
  std::vector<ResidualBlock<S>> enc_;
  ResidualBlock<S> bridge_;
  std::vector<GatingSignal<S>> gsig_;
  std::vector<AttentionGate<S>> gate_;
  std::vector<Conv2d<S>> upconv_;
  std::vector<ResidualBlock<S>> dec_;
  Conv2d<S> head_;
};

}  // namespace nn

/// Thresholds a probability map into a mask; a bit is set iff value >= threshold.
template <typename S>
BinaryMask binarize(const nn::FeatureMap<S>& prob, double threshold = 0.5,
                    std::string image_id = {}) {
  BinaryMask mask;
  mask.image_id = std::move(image_id);
  mask.bits = (prob.plane(0).array() >= static_cast<S>(threshold)).template cast<std::uint8_t>();
  return mask;
}

}  // namespace bacdet
