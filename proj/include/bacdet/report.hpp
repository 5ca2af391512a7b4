#pragma once

#include "bacdet/metrics.hpp"
#include "bacdet/types.hpp"

#include "json.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace bacdet {

/// Plain-text table with padded, left-aligned columns. Rendering is
/// deterministic so reports can be compared byte-for-byte.
class TextTable {
 public:
  explicit TextTable(std::vector<std::string> headers);

  void add_row(std::vector<std::string> cells);
  std::string render() const;

 private:
  std::vector<std::string> headers_;
  std::vector<std::vector<std::string>> rows_;
};

std::string fmt_fixed(double value, int digits = 4);
/// Undefined rates render as "n/a".
std::string fmt_metric(const std::optional<double>& value, int digits = 4);

struct SegReportRow {
  std::string method;
  AggregateSegScore score;
};

struct TrainingAccuracyRow {
  std::string classifier;
  std::int64_t n_bacilli = 0;
  std::int64_t n_non_bacilli = 0;
  double accuracy = 0.0;
};

struct ClassificationReportRow {
  std::string method;
  ClassificationScores scores;
};

/// One row per segmentation method: Jaccard index and Dice coefficient
/// averaged over test images.
std::string render_segmentation_table(const std::vector<SegReportRow>& rows);
nlohmann::json segmentation_records(const std::vector<SegReportRow>& rows);

/// One row per base classifier plus the ensemble: pool sizes and training
/// accuracy.
std::string render_training_accuracy_table(const std::vector<TrainingAccuracyRow>& rows);
nlohmann::json training_accuracy_records(const std::vector<TrainingAccuracyRow>& rows);

/// One row per method: accuracy, precision, recall, F1.
std::string render_classification_table(const std::vector<ClassificationReportRow>& rows);
nlohmann::json classification_records(const std::vector<ClassificationReportRow>& rows);

struct DetectionRecord {
  std::string image_id;
  BBox bbox;
  std::int64_t area_px = 0;
  RegionLabel label = RegionLabel::non_bacilli;
  std::vector<std::pair<std::string, int>> votes;  // (base kind, 0/1)
};

/// One JSON object per line; stable field layout.
std::string detection_record_line(const DetectionRecord& record);

}  // namespace bacdet
