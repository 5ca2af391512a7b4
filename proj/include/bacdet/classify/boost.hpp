#pragma once

#include "bacdet/classify/tree.hpp"

#include <cstdint>

namespace bacdet {

struct GbtConfig {
  int n_rounds = 100;
  int max_depth = 3;
  double learning_rate = 0.1;
  double lambda_reg = 1.0;  // L2 on leaf weights
  int min_samples_leaf = 1;
  int workers = 1;  // parallel split search over features

  nlohmann::json to_json() const;
  static GbtConfig from_json(const nlohmann::json& j);
};

/// Boosted regression trees on the logistic loss. Trees are grown by exact
/// greedy search with second-order gain and L2-regularized leaf weights; the
/// learning rate is folded into stored leaf values so prediction is a plain
/// sum over trees. Fitting is deterministic (no subsampling), independent of
/// the worker count.
class GradientBoostedTrees {
 public:
  void fit(const Eigen::MatrixXd& x, const std::vector<int>& y01, const GbtConfig& config);

  double decision_value(const Eigen::VectorXd& x) const;  // log-odds score
  int predict(const Eigen::VectorXd& x) const { return decision_value(x) >= 0.0 ? 1 : 0; }

  nlohmann::json to_json() const;
  static GradientBoostedTrees from_json(const nlohmann::json& j);

 private:
  std::vector<std::vector<TreeNode>> trees_;
};

}  // namespace bacdet
