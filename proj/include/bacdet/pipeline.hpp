#pragma once

#include "bacdet/classify/ensemble.hpp"
#include "bacdet/manifest.hpp"
#include "bacdet/otsu.hpp"
#include "bacdet/report.hpp"
#include "bacdet/roiext.hpp"
#include "bacdet/segmodel.hpp"
#include "bacdet/segtrain.hpp"
#include "bacdet/synthgen.hpp"
#include "bacdet/tiling.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace bacdet {

struct HarvestConfig {
  int n_pos = 150;  // per classifier pool
  int n_neg = 150;
};

/// Everything the command surface needs in one document. Loading starts from
/// the defaults below and applies the file's keys on top; unknown keys are
/// rejected with their full path.
struct PipelineConfig {
  std::filesystem::path manifest_path;
  std::filesystem::path out_dir = "out";
  std::filesystem::path seg_checkpoint;  // empty -> out_dir/segmodel.bdcp
  std::filesystem::path clf_checkpoint;  // empty -> out_dir/ensemble.bdcp

  int patch_size = 256;
  TilePolicy tile_policy = TilePolicy::crop;
  std::string segmenter = "unet";  // unet | otsu:gray | otsu:rg
  double binarize_threshold = 0.5;

  SegModelConfig model;
  TrainConfig train;
  RoiFilter roi_filter;
  std::string feature_spec = kDefaultFeatureSpec;
  ClassifierHyper classifier;
  SynthConfig synth;
  int n_images = 100;
  HarvestConfig harvest;

  std::filesystem::path seg_checkpoint_path() const {
    return seg_checkpoint.empty() ? out_dir / "segmodel.bdcp" : seg_checkpoint;
  }
  std::filesystem::path clf_checkpoint_path() const {
    return clf_checkpoint.empty() ? out_dir / "ensemble.bdcp" : clf_checkpoint;
  }

  void validate() const;
  nlohmann::json to_json() const;
  static PipelineConfig from_json(const nlohmann::json& j);
  static PipelineConfig load(const std::filesystem::path& path);
};

/// Unified full-image segmentation front end: the U-Net path tiles, predicts
/// and stitches; the Otsu paths binarize directly and are cropped to the same
/// patch-aligned region so all methods score identical pixels.
class Segmenter {
 public:
  static Segmenter make(const PipelineConfig& config, const std::string& name);

  const std::string& name() const { return name_; }
  BinaryMask segment(const Image& image) const;

 private:
  std::string name_;
  int patch_size_ = 256;
  TilePolicy policy_ = TilePolicy::crop;
  double threshold_ = 0.5;
  std::optional<nn::AttentionResUNet<float>> model_;
  OtsuConfig otsu_;
};

struct EvaluateOptions {
  std::vector<std::string> segmenters;  // empty -> {config.segmenter}
  Split split = Split::test;
  bool classification = true;  // needs the classifier checkpoint when set
};

struct EvaluateResult {
  std::vector<SegReportRow> segmentation;
  std::vector<ClassificationReportRow> classification;
  std::string report_text;
  nlohmann::json report_json;
};

DatasetManifest cmd_synth(const PipelineConfig& config, int n_images,
                          const std::filesystem::path& out_dir, std::ostream& log);

int cmd_tile(const PipelineConfig& config, Split split, const std::filesystem::path& out_dir,
             std::ostream& log);

TrainResult cmd_train_seg(const PipelineConfig& config, std::ostream& log);

int cmd_infer_seg(const PipelineConfig& config, Split split,
                  const std::filesystem::path& mask_dir, std::ostream& log);

int cmd_extract_rois(const PipelineConfig& config, Split split,
                     const std::filesystem::path& mask_dir,
                     const std::filesystem::path& out_dir, std::ostream& log);

std::vector<TrainingAccuracyRow> cmd_train_clf(const PipelineConfig& config, std::ostream& log);

std::vector<DetectionRecord> cmd_detect(const PipelineConfig& config, Split split,
                                        std::ostream& log);

EvaluateResult cmd_evaluate(const PipelineConfig& config, const EvaluateOptions& options,
                            std::ostream& log);

/// Truth-derived labeled regions pooled across a split, shuffled with a
/// seeded generator. Positives and negatives are returned separately.
struct HarvestedPool {
  std::vector<LabeledRegion> positives;
  std::vector<LabeledRegion> negatives;
};
HarvestedPool harvest_split(const PipelineConfig& config, const DatasetManifest& manifest,
                            Split split, std::uint64_t seed);

Image draw_boxes(const Image& image, const std::vector<DetectionRecord>& records);

}  // namespace bacdet
