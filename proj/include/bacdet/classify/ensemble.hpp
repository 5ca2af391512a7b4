#pragma once

#include "bacdet/classify/boost.hpp"
#include "bacdet/classify/features.hpp"
#include "bacdet/classify/forest.hpp"
#include "bacdet/classify/svm.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace bacdet {

enum class BaseKind { svm_rbf, random_forest, gradient_boosted_trees };

const char* to_string(BaseKind kind);
BaseKind base_kind_from_string(const std::string& name);

struct ClassifierHyper {
  SvmConfig svm;
  RfConfig forest;
  GbtConfig boost;

  nlohmann::json to_json() const;
  static ClassifierHyper from_json(const nlohmann::json& j);
};

struct TrainingItem {
  FeatureVector features;
  RegionLabel label = RegionLabel::non_bacilli;
  std::string region_id;
};

/// One fitted base classifier behind a uniform predict interface.
class BaseModel {
 public:
  BaseModel() = default;

  static BaseModel fit(BaseKind kind, const std::vector<TrainingItem>& data,
                       const ClassifierHyper& hyper, std::uint64_t seed);

  BaseKind kind() const { return kind_; }
  const std::string& feature_spec() const { return spec_; }

  RegionLabel predict(const FeatureVector& fv) const;
  RegionLabel predict_values(const Eigen::VectorXd& values) const;

  nlohmann::json to_json() const;
  static BaseModel from_json(const nlohmann::json& j);

 private:
  BaseKind kind_ = BaseKind::svm_rbf;
  std::string spec_;
  SvmRbf svm_;
  RandomForest forest_;
  GradientBoostedTrees boost_;
};

inline constexpr std::array<BaseKind, 3> kEnsembleKinds = {
    BaseKind::svm_rbf, BaseKind::random_forest, BaseKind::gradient_boosted_trees};

/// Hard-voting three-member ensemble. base_models are fitted on the union of
/// the pools; individual_variants keep the per-pool fits for side-by-side
/// reporting.
class TrainedEnsemble {
 public:
  std::string feature_spec_id;
  std::uint64_t seed = 0;
  std::array<BaseModel, 3> base_models;
  std::array<BaseModel, 3> individual_variants;

  std::array<RegionLabel, 3> votes(const FeatureVector& fv) const;
  RegionLabel predict(const FeatureVector& fv) const;
  RegionLabel predict_roi(const Roi& roi) const;

  void save(const std::filesystem::path& path) const;
  static TrainedEnsemble load(const std::filesystem::path& path);
};

BaseModel train_base(BaseKind kind, const std::vector<TrainingItem>& data,
                     const ClassifierHyper& hyper, std::uint64_t seed);

/// Fits the three kinds on their own pools (variants), then refits on the
/// pooled union. Pools must be disjoint by region id, non-empty and
/// class-balanced within +/-10%.
TrainedEnsemble train_ensemble(const std::array<std::vector<TrainingItem>, 3>& pools,
                               const ClassifierHyper& hyper, std::uint64_t seed);

}  // namespace bacdet
