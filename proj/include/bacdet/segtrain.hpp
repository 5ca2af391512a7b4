#pragma once

#include "bacdet/manifest.hpp"
#include "bacdet/metrics.hpp"
#include "bacdet/segmodel.hpp"
#include "bacdet/tiling.hpp"

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace bacdet {

enum class LossKind { bce, bce_plus_dice };

std::string to_string(LossKind kind);
LossKind loss_kind_from_string(const std::string& name);

struct TrainConfig {
  int max_epochs = 20;
  int patience = 3;
  double min_delta = 1e-4;
  int batch_size = 8;
  double learning_rate = 1e-3;
  double validation_fraction = 0.1;
  std::uint64_t seed = 0;
  LossKind loss = LossKind::bce_plus_dice;
  bool augment_flips = false;
  int workers = 1;

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_accuracy = 0.0;
  double train_jaccard = 0.0;
  double train_loss = 0.0;
  double val_accuracy = 0.0;
};

std::string format_epoch_line(const EpochRecord& rec);

// ---------------------------------------------------------------------------
// Loss. The sigmoid head is folded into the logit gradient, so backward needs
// dL/dz rather than dL/dp.

namespace detail {
constexpr double kProbClamp = 1e-7;
constexpr double kDiceSmoothing = 1.0;
}  // namespace detail

template <typename S>
double seg_loss(const nn::FeatureMap<S>& prob, const nn::FeatureMap<S>& target, LossKind kind) {
  if (!prob.same_shape(target)) throw data_error("loss: probability/target shape mismatch");
  const auto p = prob.data.array().template cast<double>().max(detail::kProbClamp).min(
      1.0 - detail::kProbClamp);
  const auto t = target.data.array().template cast<double>();
  const double n = static_cast<double>(prob.data.size());
  double loss = -((t * p.log()) + (1.0 - t) * (1.0 - p).log()).sum() / n;
  if (kind == LossKind::bce_plus_dice) {
    const double s = detail::kDiceSmoothing;
    const double inter = (p * t).sum();
    const double soft_dice = (2.0 * inter + s) / (p.sum() + t.sum() + s);
    loss += 1.0 - soft_dice;
  }
  return loss;
}

template <typename S>
double seg_loss(const nn::FeatureMap<S>& prob, const BinaryMask& truth, LossKind kind) {
  if (prob.channels != 1 || prob.height != truth.height() || prob.width != truth.width())
    throw data_error("loss: probability/mask shape mismatch");
  return seg_loss(prob, nn::mask_to_target<S>(truth.bits), kind);
}

/// dL/dz at the pre-sigmoid head output.
template <typename S>
nn::FeatureMap<S> seg_loss_logit_grad(const nn::FeatureMap<S>& prob,
                                      const nn::FeatureMap<S>& target, LossKind kind) {
  if (!prob.same_shape(target)) throw data_error("loss: probability/target shape mismatch");
  const double n = static_cast<double>(prob.data.size());
  nn::FeatureMap<S> dz(prob.channels, prob.height, prob.width);
  const auto p = prob.data.array().template cast<double>();
  const auto t = target.data.array().template cast<double>();
  Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> g = (p - t) / n;
  if (kind == LossKind::bce_plus_dice) {
    const double s = detail::kDiceSmoothing;
    const double a = 2.0 * (p * t).sum() + s;  // soft-dice numerator
    const double b = p.sum() + t.sum() + s;    // soft-dice denominator
    // d(1 - A/B)/dp = (A - 2tB)/B^2, chained through sigmoid' = p(1-p)
    g += ((a - 2.0 * t * b) / (b * b)) * p * (1.0 - p);
  }
  dz.data = g.template cast<S>().matrix();
  return dz;
}

// ---------------------------------------------------------------------------

/// Improvement rule: metric - best >= min_delta. Tracks the best epoch and
/// signals a stop after `patience` consecutive non-improving epochs.
class EarlyStopper {
 public:
  EarlyStopper(int patience, double min_delta) : patience_(patience), min_delta_(min_delta) {}

  /// Returns true when training should stop after this epoch's observation.
  bool observe(double metric) {
    ++seen_;
    if (best_epoch_ == 0 || metric - best_ >= min_delta_) {
      best_ = metric;
      best_epoch_ = seen_;
      since_best_ = 0;
      improved_ = true;
      return false;
    }
    improved_ = false;
    ++since_best_;
    return since_best_ >= patience_;
  }

  int best_epoch() const { return best_epoch_; }  // 1-based, 0 before any observation
  double best_value() const { return best_; }
  bool improved_last() const { return improved_; }

 private:
  int patience_;
  double min_delta_;
  int seen_ = 0;
  int best_epoch_ = 0;
  int since_best_ = 0;
  double best_ = -std::numeric_limits<double>::infinity();
  bool improved_ = false;
};

// ---------------------------------------------------------------------------

struct TrainSample {
  nn::FeatureMap<float> input;   // 3 x s x s, [0,1]
  nn::FeatureMap<float> target;  // 1 x s x s, {0,1}
};

/// Tiles every image of the requested split into normalized training samples.
std::vector<TrainSample> build_patch_dataset(const DatasetManifest& manifest, Split split,
                                             int patch_size,
                                             TilePolicy policy = TilePolicy::crop);

struct TrainHooks {
  std::function<void(const EpochRecord&)> on_epoch;
  /// Called whenever validation improves, with the current (not yet
  /// best-restored) model.
  std::function<void(const nn::AttentionResUNet<float>&, const EpochRecord&)> on_improvement;
};

struct TrainResult {
  nn::AttentionResUNet<float> model;  // parameters of the best-validation epoch
  std::vector<EpochRecord> records;
  int best_epoch = 0;  // 1-based
};

/// Core loop over pre-tiled samples; seeded shuffle carves the validation
/// subset (falling back to the training set itself when the fraction rounds
/// to zero samples).
TrainResult train_segmenter_on(const std::vector<TrainSample>& samples,
                               const SegModelConfig& seg_config, const TrainConfig& train_config,
                               const TrainHooks& hooks = {});

TrainResult train_segmenter(const DatasetManifest& manifest, const SegModelConfig& seg_config,
                            const TrainConfig& train_config,
                            TilePolicy policy = TilePolicy::crop, const TrainHooks& hooks = {});

}  // namespace bacdet
