#include "doctest.h"

#include "bacdet/nn/checkpoint.hpp"
#include "bacdet/segmodel.hpp"
#include "temp_dir.hpp"

#include <cstdint>
#include <fstream>
#include <random>

using namespace bacdet;
using nn::AttentionResUNet;
using testutil::ScopedTempDir;
using nn::FeatureMap;
using nn::Mode;

namespace {

template <typename S>
FeatureMap<S> random_input(const SegModelConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  FeatureMap<S> x(cfg.input_channels, cfg.input_size, cfg.input_size);
  for (Eigen::Index i = 0; i < x.data.size(); ++i)
    x.data.data()[i] = static_cast<S>(uni(rng));
  return x;
}

SegModelConfig tiny_config() {
  SegModelConfig cfg;
  cfg.input_size = 16;
  cfg.depth = 2;
  cfg.base_filters = 4;
  cfg.dropout_rate = 0.0;
  return cfg;
}

}  // namespace

TEST_CASE("segmodel config validation") {
  SegModelConfig cfg = tiny_config();
  CHECK_NOTHROW(cfg.validate());

  SegModelConfig bad = cfg;
  bad.depth = 0;
  CHECK_THROWS_AS(bad.validate(), config_error);

  bad = cfg;
  bad.base_filters = 0;
  CHECK_THROWS_AS(bad.validate(), config_error);

  bad = cfg;
  bad.input_channels = 0;
  CHECK_THROWS_AS(bad.validate(), config_error);

  bad = cfg;
  bad.dropout_rate = 1.0;
  CHECK_THROWS_AS(bad.validate(), config_error);
  bad.dropout_rate = -0.1;
  CHECK_THROWS_AS(bad.validate(), config_error);

  bad = cfg;
  bad.batchnorm_epsilon = 0.0;
  CHECK_THROWS_AS(bad.validate(), config_error);

  bad = cfg;
  bad.input_size = 18;  // not divisible by 2^2
  CHECK_THROWS_AS(bad.validate(), config_error);
  bad.input_size = 2;  // smaller than 2^depth
  CHECK_THROWS_AS(bad.validate(), config_error);

  const auto j = cfg.to_json();
  const auto back = SegModelConfig::from_json(j);
  CHECK(back.input_size == cfg.input_size);
  CHECK(back.depth == cfg.depth);
  CHECK(back.base_filters == cfg.base_filters);
  CHECK(back.dropout_rate == cfg.dropout_rate);
  CHECK(back.batchnorm_epsilon == cfg.batchnorm_epsilon);
}

TEST_CASE("segmodel forward yields a single probability plane") {
  AttentionResUNet<float> model;
  model.build(tiny_config(), 99);
  const auto x = random_input<float>(model.config(), 1);
  const auto prob = model.forward_eval(x);
  REQUIRE(prob.channels == 1);
  REQUIRE(prob.height == 16);
  REQUIRE(prob.width == 16);
  // Closed interval: float sigmoid saturates to exactly 0/1 for |logit| > ~17.
  CHECK(prob.data.minCoeff() >= 0.0f);
  CHECK(prob.data.maxCoeff() <= 1.0f);
  CHECK(prob.data.mean() > 0.01f);
  CHECK(prob.data.mean() < 0.99f);

  // Repeated eval-mode passes are bit-identical.
  const auto prob2 = model.forward_eval(x);
  CHECK(prob.data == prob2.data);

  // Same seed rebuilds the same parameters.
  AttentionResUNet<float> twin;
  twin.build(tiny_config(), 99);
  const auto prob3 = twin.forward_eval(x);
  CHECK(prob.data == prob3.data);

  FeatureMap<float> wrong(3, 8, 8);
  wrong.data.setZero();
  CHECK_THROWS_AS(model.forward_eval(wrong), data_error);
}

TEST_CASE("segmodel train forward with dropout needs an rng") {
  SegModelConfig cfg = tiny_config();
  cfg.dropout_rate = 0.2;
  AttentionResUNet<float> model;
  model.build(cfg, 3);
  const auto x = random_input<float>(cfg, 2);
  CHECK_THROWS_AS(model.forward(x, Mode::train, nullptr, nullptr), config_error);
  std::mt19937_64 rng(1);
  CHECK_NOTHROW(model.forward(x, Mode::train, &rng, nullptr));
}

TEST_CASE("attention coefficients sit at one half when the psi projection is zeroed") {
  AttentionResUNet<float> model;
  model.build(tiny_config(), 17);
  for (int l = 0; l < model.config().depth; ++l) {
    const auto& gate = model.attention_gate(l);
    model.params()[gate.psi.w].setZero();
    model.params()[gate.psi.b].setZero();
  }
  const auto x = random_input<float>(model.config(), 5);
  typename AttentionResUNet<float>::ForwardCache cache;
  model.forward(x, Mode::eval, nullptr, &cache);
  for (int l = 0; l < model.config().depth; ++l) {
    const auto& att = cache.gate[static_cast<std::size_t>(l)].att;
    REQUIRE(att.channels == 1);
    CHECK((att.data.array() - 0.5f).abs().maxCoeff() == 0.0f);
  }
}

TEST_CASE("segmodel backward matches finite differences") {
  SegModelConfig cfg;
  cfg.input_size = 8;
  cfg.depth = 1;
  cfg.base_filters = 2;
  cfg.dropout_rate = 0.0;

  AttentionResUNet<double> model;
  model.build(cfg, 7);
  // Zero-initialized biases leave the attention gate's additive pre-ReLU map
  // exactly on the kink wherever both inputs are ReLU-clipped; central
  // differences disagree with any subgradient there. Nudge all biases off it.
  {
    std::mt19937_64 brng(101);
    std::uniform_real_distribution<double> buni(-0.1, 0.1);
    for (auto& entry : model.params().entries())
      if (entry.name.ends_with(".b") || entry.name.ends_with(".beta"))
        for (Eigen::Index i = 0; i < entry.value.size(); ++i)
          entry.value.data()[i] = buni(brng);
  }
  const auto x = random_input<double>(cfg, 11);

  std::mt19937_64 rrng(13);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  FeatureMap<double> r(1, cfg.input_size, cfg.input_size);
  for (Eigen::Index i = 0; i < r.data.size(); ++i) r.data.data()[i] = uni(rrng);

  // L = <prob, r>; the head backward wants dL/dz = r * p * (1 - p).
  auto loss = [&]() {
    const auto p = model.forward(x, Mode::train, nullptr, nullptr);
    return (p.data.array() * r.data.array()).sum();
  };

  typename AttentionResUNet<double>::ForwardCache cache;
  model.forward(x, Mode::train, nullptr, &cache);
  FeatureMap<double> dlogits(1, cfg.input_size, cfg.input_size);
  dlogits.data = (r.data.array() * cache.prob.data.array() *
                  (1.0 - cache.prob.data.array()))
                     .matrix();
  nn::GradStore<double> grads(model.params());
  model.backward(cache, dlogits, grads);

  // Probe a few entries from every tensor.
  const double eps = 1e-6;
  std::mt19937_64 pick(19);
  int checked = 0;
  for (int t = 0; t < model.params().size(); ++t) {
    auto& P = model.params()[t];
    for (int probe = 0; probe < 2; ++probe) {
      const Eigen::Index i =
          static_cast<Eigen::Index>(pick() % static_cast<std::uint64_t>(P.size()));
      const double keep = P.data()[i];
      P.data()[i] = keep + eps;
      const double hi = loss();
      P.data()[i] = keep - eps;
      const double lo = loss();
      P.data()[i] = keep;
      const double fd = (hi - lo) / (2 * eps);
      const double an = grads[t].data()[i];
      CAPTURE(model.params().entries()[static_cast<std::size_t>(t)].name);
      // Mixed tolerance: biases ahead of train-mode batchnorm have a true
      // gradient of zero, where central differences only deliver ~1e-10.
      CHECK(std::abs(fd - an) <= 1e-7 + 1e-5 * std::max(std::abs(fd), std::abs(an)));
      ++checked;
    }
  }
  CHECK(checked >= 40);
}

TEST_CASE("segmodel checkpoint round trip is bit exact") {
  ScopedTempDir tmp("segmodel");
  const auto path = tmp.path() / "model.bdcp";

  AttentionResUNet<float> model;
  model.build(tiny_config(), 23);
  model.save(path);

  const auto loaded = AttentionResUNet<float>::load(path);
  CHECK(loaded.config().depth == model.config().depth);
  CHECK(loaded.config().base_filters == model.config().base_filters);
  CHECK(loaded.seed() == model.seed());
  REQUIRE(loaded.params().size() == model.params().size());
  for (int t = 0; t < model.params().size(); ++t) {
    CHECK(loaded.params()[t] == model.params()[t]);
    CHECK(loaded.params().entries()[static_cast<std::size_t>(t)].name ==
          model.params().entries()[static_cast<std::size_t>(t)].name);
  }
  for (int t = 0; t < model.state().size(); ++t) CHECK(loaded.state()[t] == model.state()[t]);

  const auto x = random_input<float>(model.config(), 29);
  CHECK(model.forward_eval(x).data == loaded.forward_eval(x).data);
}

TEST_CASE("segmodel checkpoint rejects damaged or foreign files") {
  ScopedTempDir tmp("segmodel_bad");

  CHECK_THROWS_AS(AttentionResUNet<float>::load(tmp.path() / "absent.bdcp"), io_error);

  AttentionResUNet<float> model;
  model.build(tiny_config(), 31);

  const auto mangled = tmp.path() / "mangled.bdcp";
  model.save(mangled);
  {
    std::fstream f(mangled, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(0);
    f.write("XXXX", 4);  // clobber the magic
  }
  CHECK_THROWS_AS(AttentionResUNet<float>::load(mangled), io_error);

  const auto truncated = tmp.path() / "truncated.bdcp";
  model.save(truncated);
  std::filesystem::resize_file(truncated, std::filesystem::file_size(truncated) / 2);
  CHECK_THROWS_AS(AttentionResUNet<float>::load(truncated), io_error);

  // A checkpoint of a different container kind is refused up front.
  const auto foreign = tmp.path() / "foreign.bdcp";
  nn::save_checkpoint(foreign, "other", nlohmann::json::object(), model.params(),
                      model.state());
  CHECK_THROWS_AS(AttentionResUNet<float>::load(foreign), io_error);

  // dtype must match the requested scalar type.
  const auto asfloat = tmp.path() / "float.bdcp";
  model.save(asfloat);
  CHECK_THROWS_AS(AttentionResUNet<double>::load(asfloat), io_error);
}

TEST_CASE("binarize thresholds a probability plane") {
  FeatureMap<float> prob(1, 2, 3);
  prob.data << 0.1f, 0.5f, 0.9f, 0.49f, 0.51f, 0.0f;
  const auto mask = binarize(prob, 0.5, "img");
  CHECK(mask.image_id == "img");
  REQUIRE(mask.bits.rows() == 2);
  REQUIRE(mask.bits.cols() == 3);
  CHECK(mask.bits(0, 0) == 0);
  CHECK(mask.bits(0, 1) == 1);  // >= threshold is foreground
  CHECK(mask.bits(0, 2) == 1);
  CHECK(mask.bits(1, 0) == 0);
  CHECK(mask.bits(1, 1) == 1);
  CHECK(mask.bits(1, 2) == 0);

  const auto strict = binarize(prob, 0.95);
  CHECK(strict.bits.sum() == 0);
}
