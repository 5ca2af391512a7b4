#pragma once

#include "bacdet/classify/tree.hpp"

#include <cstdint>
#include <random>

namespace bacdet {

struct RfConfig {
  int n_trees = 100;
  int max_depth = 32;
  int min_samples_leaf = 1;

  nlohmann::json to_json() const;
  static RfConfig from_json(const nlohmann::json& j);
};

/// CART classification tree, Gini impurity, midpoint thresholds. Feature
/// subsampling (without replacement) is drawn per node when enabled.
class GiniTree {
 public:
  struct FitOptions {
    int max_depth = 32;
    int min_samples_leaf = 1;
    int features_per_node = 0;  // 0 = consider every feature
  };

  void fit(const Eigen::MatrixXd& x, const std::vector<int>& y01,
           const std::vector<int>& sample_idx, const FitOptions& options,
           std::mt19937_64& rng);

  int predict(const Eigen::VectorXd& x) const {
    return tree_predict_value(nodes_, x) >= 0.5 ? 1 : 0;
  }
  double predict_fraction(const Eigen::VectorXd& x) const {
    return tree_predict_value(nodes_, x);
  }

  const std::vector<TreeNode>& nodes() const { return nodes_; }
  void set_nodes(std::vector<TreeNode> nodes) { nodes_ = std::move(nodes); }

 private:
  int grow(const Eigen::MatrixXd& x, const std::vector<int>& y01, std::vector<int>& idx,
           int begin, int end, int depth, const FitOptions& options, std::mt19937_64& rng);

  std::vector<TreeNode> nodes_;
};

/// Bootstrap-aggregated Gini trees with sqrt-feature subsampling per node;
/// prediction is the majority vote of the trees (tie -> negative class).
class RandomForest {
 public:
  void fit(const Eigen::MatrixXd& x, const std::vector<int>& y01, const RfConfig& config,
           std::uint64_t seed);

  int predict(const Eigen::VectorXd& x) const;

  nlohmann::json to_json() const;
  static RandomForest from_json(const nlohmann::json& j);

 private:
  std::vector<GiniTree> trees_;
};

}  // namespace bacdet
