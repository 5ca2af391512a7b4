#pragma once

#include "bacdet/types.hpp"

#include "json.hpp"

#include <Eigen/Core>

#include <vector>

namespace bacdet {

/// Node of a binary decision tree over dense feature vectors. Interior nodes
/// route `value <= threshold` to the left child; leaves carry a payload
/// (class fraction for classification trees, additive weight for boosting).
struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;
};

inline double tree_predict_value(const std::vector<TreeNode>& nodes, const Eigen::VectorXd& x) {
  int at = 0;
  while (nodes[static_cast<std::size_t>(at)].feature >= 0) {
    const TreeNode& n = nodes[static_cast<std::size_t>(at)];
    at = x(n.feature) <= n.threshold ? n.left : n.right;
  }
  return nodes[static_cast<std::size_t>(at)].value;
}

inline nlohmann::json tree_to_json(const std::vector<TreeNode>& nodes) {
  nlohmann::json arr = nlohmann::json::array();
  for (const TreeNode& n : nodes)
    arr.push_back({n.feature, n.threshold, n.left, n.right, n.value});
  return arr;
}

inline std::vector<TreeNode> tree_from_json(const nlohmann::json& j) {
  std::vector<TreeNode> nodes;
  nodes.reserve(j.size());
  for (const auto& e : j) {
    TreeNode n;
    n.feature = e[0].get<int>();
    n.threshold = e[1].get<double>();
    n.left = e[2].get<int>();
    n.right = e[3].get<int>();
    n.value = e[4].get<double>();
    nodes.push_back(n);
  }
  return nodes;
}

}  // namespace bacdet
