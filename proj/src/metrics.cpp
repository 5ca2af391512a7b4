#include "bacdet/metrics.hpp"

namespace bacdet {
namespace {

void check_dims(const BinaryMask& a, const BinaryMask& b) {
  if (a.height() != b.height() || a.width() != b.width())
    throw data_error("mask dimension mismatch: " + std::to_string(a.height()) + "x" +
                     std::to_string(a.width()) + " vs " + std::to_string(b.height()) + "x" +
                     std::to_string(b.width()));
}

struct Overlap {
  std::int64_t inter = 0;
  std::int64_t a = 0;
  std::int64_t b = 0;
};

Overlap overlap(const BinaryMask& pred, const BinaryMask& truth) {
  check_dims(pred, truth);
  Overlap o;
  const auto pa = (pred.bits != 0);
  const auto pb = (truth.bits != 0);
  o.a = pa.count();
  o.b = pb.count();
  o.inter = (pa && pb).count();
  return o;
}

}  // namespace

double jaccard(const BinaryMask& pred, const BinaryMask& truth) {
  const Overlap o = overlap(pred, truth);
  const std::int64_t uni = o.a + o.b - o.inter;
  if (uni == 0) return 1.0;  // both empty: perfect agreement
  return static_cast<double>(o.inter) / static_cast<double>(uni);
}

double dice(const BinaryMask& pred, const BinaryMask& truth) {
  const Overlap o = overlap(pred, truth);
  if (o.a + o.b == 0) return 1.0;
  return 2.0 * static_cast<double>(o.inter) / static_cast<double>(o.a + o.b);
}

SegScore seg_score(const BinaryMask& pred, const BinaryMask& truth) {
  const Overlap o = overlap(pred, truth);
  SegScore s;
  const std::int64_t uni = o.a + o.b - o.inter;
  s.jaccard = uni == 0 ? 1.0 : static_cast<double>(o.inter) / static_cast<double>(uni);
  s.dice = (o.a + o.b) == 0 ? 1.0 : 2.0 * static_cast<double>(o.inter) / static_cast<double>(o.a + o.b);
  return s;
}

ConfusionCounts pixel_confusion(const BinaryMask& pred, const BinaryMask& truth) {
  check_dims(pred, truth);
  const auto p = (pred.bits != 0);
  const auto t = (truth.bits != 0);
  ConfusionCounts c;
  c.tp = (p && t).count();
  c.fp = (p && !t).count();
  c.fn = (!p && t).count();
  c.tn = (!p && !t).count();
  return c;
}

ClassificationScores classification_scores(const ConfusionCounts& c) {
  ClassificationScores s;
  if (c.total() > 0)
    s.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
  if (c.tp + c.fp > 0)
    s.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  if (c.tp + c.fn > 0)
    s.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  if (s.precision && s.recall && (*s.precision + *s.recall) > 0)
    s.f1 = 2.0 * (*s.precision) * (*s.recall) / (*s.precision + *s.recall);
  return s;
}

AggregateSegScore aggregate_seg_scores(const std::vector<SegScore>& per_image,
                                       const std::vector<ConfusionCounts>& per_image_counts) {
  if (per_image.empty()) throw data_error("cannot aggregate zero segmentation scores");
  if (per_image.size() != per_image_counts.size())
    throw data_error("aggregate_seg_scores: score/count list length mismatch");
  AggregateSegScore agg;
  agg.n_images = static_cast<int>(per_image.size());

  for (const auto& s : per_image) {
    agg.averaged.jaccard += s.jaccard;
    agg.averaged.dice += s.dice;
  }
  agg.averaged.jaccard /= agg.n_images;
  agg.averaged.dice /= agg.n_images;

  ConfusionCounts pooled;
  for (const auto& c : per_image_counts) pooled += c;
  const std::int64_t inter = pooled.tp;
  const std::int64_t uni = pooled.tp + pooled.fp + pooled.fn;
  const std::int64_t sum = 2 * pooled.tp + pooled.fp + pooled.fn;
  agg.pooled.jaccard = uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
  agg.pooled.dice = sum == 0 ? 1.0 : 2.0 * static_cast<double>(inter) / static_cast<double>(sum);
  return agg;
}

}  // namespace bacdet
