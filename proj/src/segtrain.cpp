#include "bacdet/segtrain.hpp"

#include "bacdet/image_io.hpp"
#include "bacdet/parallel.hpp"
#include "bacdet/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

namespace bacdet {

std::string to_string(LossKind kind) {
  return kind == LossKind::bce ? "bce" : "bce_plus_dice";
}

LossKind loss_kind_from_string(const std::string& name) {
  if (name == "bce") return LossKind::bce;
  if (name == "bce_plus_dice") return LossKind::bce_plus_dice;
  throw config_error("unknown loss kind '" + name + "' (expected bce or bce_plus_dice)");
}

void TrainConfig::validate() const {
  if (max_epochs < 1) throw config_error("max_epochs must be >= 1");
  if (patience < 0 || patience >= max_epochs)
    throw config_error("patience must satisfy 0 <= patience < max_epochs");
  if (min_delta < 0.0) throw config_error("min_delta must be >= 0");
  if (batch_size < 1) throw config_error("batch_size must be >= 1");
  if (learning_rate <= 0.0) throw config_error("learning_rate must be > 0");
  if (validation_fraction <= 0.0 || validation_fraction >= 1.0)
    throw config_error("validation_fraction must lie in (0,1)");
  if (workers < 1) throw config_error("workers must be >= 1");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"max_epochs", max_epochs},
          {"patience", patience},
          {"min_delta", min_delta},
          {"batch_size", batch_size},
          {"learning_rate", learning_rate},
          {"validation_fraction", validation_fraction},
          {"seed", seed},
          {"loss", to_string(loss)},
          {"augment_flips", augment_flips},
          {"workers", workers}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.max_epochs = j.at("max_epochs").get<int>();
  c.patience = j.at("patience").get<int>();
  c.min_delta = j.at("min_delta").get<double>();
  c.batch_size = j.at("batch_size").get<int>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.validation_fraction = j.at("validation_fraction").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.loss = loss_kind_from_string(j.at("loss").get<std::string>());
  c.augment_flips = j.at("augment_flips").get<bool>();
  c.workers = j.at("workers").get<int>();
  return c;
}

std::string format_epoch_line(const EpochRecord& rec) {
  char buf[192];
  std::snprintf(buf, sizeof buf,
                "epoch=%d train_loss=%.6f train_accuracy=%.6f train_jaccard=%.6f "
                "val_accuracy=%.6f",
                rec.epoch, rec.train_loss, rec.train_accuracy, rec.train_jaccard,
                rec.val_accuracy);
  return buf;
}

std::vector<TrainSample> build_patch_dataset(const DatasetManifest& manifest, Split split,
                                             int patch_size, TilePolicy policy) {
  std::vector<TrainSample> out;
  for (const ManifestEntry* e : manifest.split_entries(split)) {
    Image img = load_image(e->image_path, e->image_id);
    BinaryMask mask = load_mask(e->mask_path, img.height(), img.width(), e->image_id);
    std::vector<Patch> patches = tile(img, patch_size, policy);
    std::vector<MaskPatch> mask_patches = tile_mask(mask, patch_size, policy);
    for (std::size_t i = 0; i < patches.size(); ++i) {
      TrainSample s;
      s.input = nn::to_feature_map<float>(patches[i].pixels);
      s.target = nn::mask_to_target<float>(mask_patches[i].bits);
      out.push_back(std::move(s));
    }
  }
  return out;
}

namespace {

nn::FeatureMap<float> flipped_copy(const nn::FeatureMap<float>& f, bool horizontal,
                                   bool vertical) {
  nn::FeatureMap<float> out = f;
  if (!horizontal && !vertical) return out;
  for (int c = 0; c < f.channels; ++c) {
    const auto src = f.plane(c);
    auto dst = out.plane(c);
    if (horizontal && vertical)
      dst = src.reverse();
    else if (horizontal)
      dst = src.rowwise().reverse();
    else
      dst = src.colwise().reverse();
  }
  return out;
}

struct SampleStats {
  double loss = 0.0;
  std::int64_t correct = 0;
  std::int64_t pixels = 0;
  std::int64_t inter = 0;
  std::int64_t uni = 0;
};

SampleStats prediction_stats(const nn::FeatureMap<float>& prob,
                             const nn::FeatureMap<float>& target) {
  SampleStats s;
  const auto pred = (prob.data.array() >= 0.5f).eval();
  const auto truth = (target.data.array() >= 0.5f).eval();
  s.pixels = prob.data.size();
  s.correct = (pred == truth).count();
  s.inter = (pred && truth).count();
  s.uni = (pred || truth).count();
  return s;
}

using BnStats = std::vector<std::pair<nn::DenseVector<float>, nn::DenseVector<float>>>;

}  // namespace

TrainResult train_segmenter_on(const std::vector<TrainSample>& samples,
                               const SegModelConfig& seg_config, const TrainConfig& tc,
                               const TrainHooks& hooks) {
  seg_config.validate();
  tc.validate();
  if (samples.empty()) throw data_error("training set is empty");
  for (const TrainSample& s : samples)
    if (s.input.height != seg_config.input_size || s.input.width != seg_config.input_size ||
        s.input.channels != seg_config.input_channels)
      throw data_error("training sample shape does not match the model input size");

  std::mt19937_64 rng(tc.seed);
  std::vector<int> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  const int n = static_cast<int>(samples.size());
  const int n_val = static_cast<int>(std::floor(n * tc.validation_fraction));
  std::vector<int> val_idx, train_idx;
  if (n_val == 0) {
    // Too few samples to carve a holdout; monitor on the training set.
    train_idx = order;
    val_idx = order;
  } else {
    val_idx.assign(order.begin(), order.begin() + n_val);
    train_idx.assign(order.begin() + n_val, order.end());
  }

  nn::AttentionResUNet<float> model;
  model.build(seg_config, tc.seed);
  auto& params = model.params();

  nn::GradStore<float> adam_m(params), adam_v(params), batch_grad(params);
  const float beta1 = 0.9f, beta2 = 0.999f, adam_eps = 1e-8f;
  long step = 0;

  const int max_batch = std::min<int>(tc.batch_size, static_cast<int>(train_idx.size()));
  std::vector<nn::GradStore<float>> sample_grads;
  sample_grads.reserve(static_cast<std::size_t>(max_batch));
  for (int k = 0; k < max_batch; ++k) sample_grads.emplace_back(params);
  std::vector<typename nn::AttentionResUNet<float>::ForwardCache> sample_caches(
      static_cast<std::size_t>(max_batch));
  std::vector<SampleStats> sample_stats(static_cast<std::size_t>(max_batch));
  std::vector<BnStats> sample_bn(static_cast<std::size_t>(max_batch));

  EarlyStopper stopper(tc.patience, tc.min_delta);
  nn::ParamStore<float> best_params = params;
  nn::ParamStore<float> best_state = model.state();

  TrainResult result;
  for (int epoch = 1; epoch <= tc.max_epochs; ++epoch) {
    std::shuffle(train_idx.begin(), train_idx.end(), rng);

    double loss_sum = 0.0;
    std::int64_t correct = 0, pixels = 0, inter = 0, uni = 0;
    for (std::size_t start = 0; start < train_idx.size(); start += tc.batch_size) {
      const int bn =
          static_cast<int>(std::min<std::size_t>(tc.batch_size, train_idx.size() - start));
      parallel_for(bn, tc.workers, [&](int k) {
        const int idx = train_idx[start + static_cast<std::size_t>(k)];
        std::mt19937_64 srng(derive_seed(tc.seed, static_cast<std::uint64_t>(epoch),
                                         static_cast<std::uint64_t>(idx)));
        const TrainSample* s = &samples[static_cast<std::size_t>(idx)];
        TrainSample augmented;
        if (tc.augment_flips) {
          const bool h = (srng() & 1u) != 0, v = (srng() & 1u) != 0;
          augmented.input = flipped_copy(s->input, h, v);
          augmented.target = flipped_copy(s->target, h, v);
          s = &augmented;
        }
        auto& cache = sample_caches[static_cast<std::size_t>(k)];
        nn::FeatureMap<float> prob = model.forward(s->input, nn::Mode::train, &srng, &cache);
        sample_stats[static_cast<std::size_t>(k)] = prediction_stats(prob, s->target);
        sample_stats[static_cast<std::size_t>(k)].loss = seg_loss(prob, s->target, tc.loss);
        nn::FeatureMap<float> dz = seg_loss_logit_grad(prob, s->target, tc.loss);
        sample_grads[static_cast<std::size_t>(k)].zero();
        model.backward(cache, dz, sample_grads[static_cast<std::size_t>(k)]);
        auto& stats = sample_bn[static_cast<std::size_t>(k)];
        stats.clear();
        model.visit_bn(cache, [&stats](const auto&, const auto& bc) {
          stats.emplace_back(bc.mu, bc.var);
        });
      });

      // Fixed-order reduction keeps results independent of the worker count.
      batch_grad.zero();
      for (int k = 0; k < bn; ++k) {
        const SampleStats& st = sample_stats[static_cast<std::size_t>(k)];
        if (!std::isfinite(st.loss))
          throw data_error("non-finite training loss at epoch " + std::to_string(epoch));
        loss_sum += st.loss;
        correct += st.correct;
        pixels += st.pixels;
        inter += st.inter;
        uni += st.uni;
        batch_grad.accumulate(sample_grads[static_cast<std::size_t>(k)]);
      }
      batch_grad.scale(1.0f / static_cast<float>(bn));

      ++step;
      const float bc1 = 1.0f - std::pow(beta1, static_cast<float>(step));
      const float bc2 = 1.0f - std::pow(beta2, static_cast<float>(step));
      for (int h = 0; h < params.size(); ++h) {
        auto& g = batch_grad[h];
        adam_m[h] = beta1 * adam_m[h] + (1.0f - beta1) * g;
        adam_v[h] = beta2 * adam_v[h] + (1.0f - beta2) * g.cwiseProduct(g);
        params[h].array() -= static_cast<float>(tc.learning_rate) * (adam_m[h].array() / bc1) /
                             ((adam_v[h].array() / bc2).sqrt() + adam_eps);
      }

      // Commit batch-averaged normalization statistics.
      const std::size_t n_bn = sample_bn[0].size();
      std::vector<nn::DenseVector<float>> mu_avg(n_bn), var_avg(n_bn);
      for (std::size_t j = 0; j < n_bn; ++j) {
        mu_avg[j] = sample_bn[0][j].first;
        var_avg[j] = sample_bn[0][j].second;
        for (int k = 1; k < bn; ++k) {
          mu_avg[j] += sample_bn[static_cast<std::size_t>(k)][j].first;
          var_avg[j] += sample_bn[static_cast<std::size_t>(k)][j].second;
        }
        mu_avg[j] /= static_cast<float>(bn);
        var_avg[j] /= static_cast<float>(bn);
      }
      std::size_t j = 0;
      model.visit_bn(sample_caches[0], [&](const auto& bn_layer, const auto&) {
        bn_layer.update_running(model.state(), mu_avg[j], var_avg[j], 0.9f);
        ++j;
      });
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(train_idx.size());
    rec.train_accuracy = static_cast<double>(correct) / static_cast<double>(pixels);
    rec.train_jaccard = uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);

    std::vector<SampleStats> val_stats(val_idx.size());
    parallel_for(static_cast<int>(val_idx.size()), tc.workers, [&](int k) {
      const TrainSample& s = samples[static_cast<std::size_t>(val_idx[static_cast<std::size_t>(k)])];
      nn::FeatureMap<float> prob = model.forward_eval(s.input);
      val_stats[static_cast<std::size_t>(k)] = prediction_stats(prob, s.target);
    });
    std::int64_t val_correct = 0, val_pixels = 0;
    for (const SampleStats& st : val_stats) {
      val_correct += st.correct;
      val_pixels += st.pixels;
    }
    rec.val_accuracy = static_cast<double>(val_correct) / static_cast<double>(val_pixels);

    result.records.push_back(rec);
    if (hooks.on_epoch) hooks.on_epoch(rec);

    const bool stop = stopper.observe(rec.val_accuracy);
    if (stopper.improved_last()) {
      best_params = params;
      best_state = model.state();
      if (hooks.on_improvement) hooks.on_improvement(model, rec);
    }
    if (stop) break;
  }

  model.params() = best_params;
  model.state() = best_state;
  result.model = std::move(model);
  result.best_epoch = stopper.best_epoch();
  return result;
}

TrainResult train_segmenter(const DatasetManifest& manifest, const SegModelConfig& seg_config,
                            const TrainConfig& train_config, TilePolicy policy,
                            const TrainHooks& hooks) {
  std::vector<TrainSample> samples =
      build_patch_dataset(manifest, Split::train, seg_config.input_size, policy);
  if (samples.empty()) throw data_error("manifest has no train-split entries to tile");
  return train_segmenter_on(samples, seg_config, train_config, hooks);
}

}  // namespace bacdet
