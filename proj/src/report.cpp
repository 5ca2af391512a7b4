#include "bacdet/report.hpp"

#include <algorithm>
#include <cstdio>
#include <stdexcept>

namespace bacdet {

TextTable::TextTable(std::vector<std::string> headers) : headers_(std::move(headers)) {}

void TextTable::add_row(std::vector<std::string> cells) {
  if (cells.size() != headers_.size())
    throw std::logic_error("TextTable row width does not match header");
  rows_.push_back(std::move(cells));
}

std::string TextTable::render() const {
  std::vector<std::size_t> widths(headers_.size());
  for (std::size_t c = 0; c < headers_.size(); ++c) widths[c] = headers_[c].size();
  for (const auto& row : rows_)
    for (std::size_t c = 0; c < row.size(); ++c) widths[c] = std::max(widths[c], row[c].size());

  auto emit = [&](std::string& out, const std::vector<std::string>& cells) {
    for (std::size_t c = 0; c < cells.size(); ++c) {
      out += cells[c];
      if (c + 1 < cells.size()) out.append(widths[c] - cells[c].size() + 2, ' ');
    }
    out += '\n';
  };

  std::string out;
  emit(out, headers_);
  std::string rule;
  for (std::size_t c = 0; c < widths.size(); ++c) {
    rule.append(widths[c], '-');
    if (c + 1 < widths.size()) rule.append(2, ' ');
  }
  out += rule;
  out += '\n';
  for (const auto& row : rows_) emit(out, row);
  return out;
}

std::string fmt_fixed(double value, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, value);
  return buf;
}

std::string fmt_metric(const std::optional<double>& value, int digits) {
  return value ? fmt_fixed(*value, digits) : "n/a";
}

std::string render_segmentation_table(const std::vector<SegReportRow>& rows) {
  TextTable t({"Method", "Jaccard index", "Dice coefficient", "Images"});
  for (const auto& r : rows)
    t.add_row({r.method, fmt_fixed(r.score.averaged.jaccard), fmt_fixed(r.score.averaged.dice),
               std::to_string(r.score.n_images)});
  return t.render();
}

nlohmann::json segmentation_records(const std::vector<SegReportRow>& rows) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : rows)
    arr.push_back({{"method", r.method},
                   {"jaccard", fmt_fixed(r.score.averaged.jaccard, 6)},
                   {"dice", fmt_fixed(r.score.averaged.dice, 6)},
                   {"pooled_jaccard", fmt_fixed(r.score.pooled.jaccard, 6)},
                   {"pooled_dice", fmt_fixed(r.score.pooled.dice, 6)},
                   {"n_images", r.score.n_images}});
  return arr;
}

std::string render_training_accuracy_table(const std::vector<TrainingAccuracyRow>& rows) {
  TextTable t({"Classifier", "Bacilli regions", "Non-bacilli regions", "Training accuracy"});
  for (const auto& r : rows)
    t.add_row({r.classifier, std::to_string(r.n_bacilli), std::to_string(r.n_non_bacilli),
               fmt_fixed(r.accuracy, 6)});
  return t.render();
}

nlohmann::json training_accuracy_records(const std::vector<TrainingAccuracyRow>& rows) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : rows)
    arr.push_back({{"classifier", r.classifier},
                   {"n_bacilli", r.n_bacilli},
                   {"n_non_bacilli", r.n_non_bacilli},
                   {"accuracy", fmt_fixed(r.accuracy, 6)}});
  return arr;
}

std::string render_classification_table(const std::vector<ClassificationReportRow>& rows) {
  TextTable t({"Method", "Accuracy", "Precision", "Recall", "F1-score"});
  for (const auto& r : rows)
    t.add_row({r.method, fmt_metric(r.scores.accuracy), fmt_metric(r.scores.precision),
               fmt_metric(r.scores.recall), fmt_metric(r.scores.f1)});
  return t.render();
}

nlohmann::json classification_records(const std::vector<ClassificationReportRow>& rows) {
  auto field = [](const std::optional<double>& v) -> nlohmann::json {
    if (!v) return nullptr;
    return fmt_fixed(*v, 6);
  };
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : rows)
    arr.push_back({{"method", r.method},
                   {"accuracy", field(r.scores.accuracy)},
                   {"precision", field(r.scores.precision)},
                   {"recall", field(r.scores.recall)},
                   {"f1", field(r.scores.f1)}});
  return arr;
}

std::string detection_record_line(const DetectionRecord& record) {
  nlohmann::json votes = nlohmann::json::object();
  for (const auto& [kind, vote] : record.votes) votes[kind] = vote;
  nlohmann::json j = {{"image", record.image_id},
                      {"bbox", {record.bbox.x, record.bbox.y, record.bbox.w, record.bbox.h}},
                      {"area", record.area_px},
                      {"label", to_string(record.label)},
                      {"votes", votes}};
  return j.dump();
}

}  // namespace bacdet
