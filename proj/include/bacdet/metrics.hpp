#pragma once

#include "bacdet/types.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace bacdet {

struct ConfusionCounts {
  std::int64_t tp = 0;
  std::int64_t tn = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;

  std::int64_t total() const { return tp + tn + fp + fn; }
  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    tn += o.tn;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
};

struct SegScore {
  double jaccard = 0.0;
  double dice = 0.0;
};

/// Accuracy, precision, recall, F1. A rate whose denominator is zero is
/// reported as nullopt ("n/a"), never silently 0.
struct ClassificationScores {
  std::optional<double> accuracy;
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> f1;
};

/// |A n B| / |A u B|; 1.0 when both masks are empty.
double jaccard(const BinaryMask& pred, const BinaryMask& truth);

/// 2|A n B| / (|A| + |B|); 1.0 when both masks are empty.
double dice(const BinaryMask& pred, const BinaryMask& truth);

SegScore seg_score(const BinaryMask& pred, const BinaryMask& truth);

/// Per-pixel confusion counts between prediction and truth.
ConfusionCounts pixel_confusion(const BinaryMask& pred, const BinaryMask& truth);

ClassificationScores classification_scores(const ConfusionCounts& counts);

/// Dataset aggregation: unweighted mean of per-image scores (default
/// reporting mode) plus the pixel-pooled alternative.
struct AggregateSegScore {
  SegScore averaged;  // mean of per-image scores
  SegScore pooled;    // computed from pooled pixel counts
  int n_images = 0;
};

AggregateSegScore aggregate_seg_scores(const std::vector<SegScore>& per_image,
                                       const std::vector<ConfusionCounts>& per_image_counts);

}  // namespace bacdet
