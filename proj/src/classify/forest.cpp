#include "bacdet/classify/forest.hpp"

#include "bacdet/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace bacdet {

nlohmann::json RfConfig::to_json() const {
  return {{"n_trees", n_trees},
          {"max_depth", max_depth},
          {"min_samples_leaf", min_samples_leaf}};
}

RfConfig RfConfig::from_json(const nlohmann::json& j) {
  RfConfig c;
  c.n_trees = j.at("n_trees").get<int>();
  c.max_depth = j.at("max_depth").get<int>();
  c.min_samples_leaf = j.at("min_samples_leaf").get<int>();
  return c;
}

void GiniTree::fit(const Eigen::MatrixXd& x, const std::vector<int>& y01,
                   const std::vector<int>& sample_idx, const FitOptions& options,
                   std::mt19937_64& rng) {
  nodes_.clear();
  std::vector<int> idx = sample_idx;
  grow(x, y01, idx, 0, static_cast<int>(idx.size()), 0, options, rng);
}

int GiniTree::grow(const Eigen::MatrixXd& x, const std::vector<int>& y01,
                   std::vector<int>& idx, int begin, int end, int depth,
                   const FitOptions& options, std::mt19937_64& rng) {
  const int m = end - begin;
  int n1 = 0;
  for (int i = begin; i < end; ++i) n1 += y01[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])];
  const double frac = static_cast<double>(n1) / m;

  const int node_id = static_cast<int>(nodes_.size());
  nodes_.push_back(TreeNode{});
  nodes_[static_cast<std::size_t>(node_id)].value = frac;

  if (n1 == 0 || n1 == m || depth >= options.max_depth || m < 2 * options.min_samples_leaf)
    return node_id;

  const int d = static_cast<int>(x.cols());
  std::vector<int> feats;
  if (options.features_per_node > 0 && options.features_per_node < d) {
    std::vector<int> all(static_cast<std::size_t>(d));
    std::iota(all.begin(), all.end(), 0);
    std::sample(all.begin(), all.end(), std::back_inserter(feats), options.features_per_node,
                rng);
  } else {
    feats.resize(static_cast<std::size_t>(d));
    std::iota(feats.begin(), feats.end(), 0);
  }

  const double p = frac;
  const double node_gini = 1.0 - p * p - (1.0 - p) * (1.0 - p);
  double best_gini = node_gini;
  int best_feature = -1;
  double best_threshold = 0.0;

  std::vector<std::pair<double, int>> vals(static_cast<std::size_t>(m));
  for (int f : feats) {
    for (int i = 0; i < m; ++i) {
      const int s = idx[static_cast<std::size_t>(begin + i)];
      vals[static_cast<std::size_t>(i)] = {x(s, f), y01[static_cast<std::size_t>(s)]};
    }
    std::sort(vals.begin(), vals.end());
    int l1 = 0;
    for (int k = 1; k < m; ++k) {
      l1 += vals[static_cast<std::size_t>(k - 1)].second;
      if (vals[static_cast<std::size_t>(k - 1)].first == vals[static_cast<std::size_t>(k)].first)
        continue;
      if (k < options.min_samples_leaf || m - k < options.min_samples_leaf) continue;
      const double pl = static_cast<double>(l1) / k;
      const double pr = static_cast<double>(n1 - l1) / (m - k);
      const double gl = 1.0 - pl * pl - (1.0 - pl) * (1.0 - pl);
      const double gr = 1.0 - pr * pr - (1.0 - pr) * (1.0 - pr);
      const double g = (k * gl + (m - k) * gr) / m;
      if (g < best_gini) {
        best_gini = g;
        best_feature = f;
        best_threshold = (vals[static_cast<std::size_t>(k - 1)].first +
                          vals[static_cast<std::size_t>(k)].first) /
                         2.0;
      }
    }
  }
  if (best_feature < 0) return node_id;

  auto mid_it = std::stable_partition(
      idx.begin() + begin, idx.begin() + end,
      [&](int s) { return x(s, best_feature) <= best_threshold; });
  const int mid = static_cast<int>(mid_it - idx.begin());
  if (mid == begin || mid == end) return node_id;  // numerically degenerate split

  nodes_[static_cast<std::size_t>(node_id)].feature = best_feature;
  nodes_[static_cast<std::size_t>(node_id)].threshold = best_threshold;
  const int left = grow(x, y01, idx, begin, mid, depth + 1, options, rng);
  const int right = grow(x, y01, idx, mid, end, depth + 1, options, rng);
  nodes_[static_cast<std::size_t>(node_id)].left = left;
  nodes_[static_cast<std::size_t>(node_id)].right = right;
  return node_id;
}

void RandomForest::fit(const Eigen::MatrixXd& x, const std::vector<int>& y01,
                       const RfConfig& config, std::uint64_t seed) {
  if (config.n_trees < 1) throw config_error("random forest needs n_trees >= 1");
  const int n = static_cast<int>(x.rows());
  const int d = static_cast<int>(x.cols());
  GiniTree::FitOptions options;
  options.max_depth = config.max_depth;
  options.min_samples_leaf = config.min_samples_leaf;
  options.features_per_node =
      std::max(1, static_cast<int>(std::floor(std::sqrt(static_cast<double>(d)))));

  trees_.assign(static_cast<std::size_t>(config.n_trees), {});
  for (int t = 0; t < config.n_trees; ++t) {
    std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(t), 0xf0f0f0f0ull));
    std::uniform_int_distribution<int> pick(0, n - 1);
    std::vector<int> bootstrap(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) bootstrap[static_cast<std::size_t>(i)] = pick(rng);
    trees_[static_cast<std::size_t>(t)].fit(x, y01, bootstrap, options, rng);
  }
}

int RandomForest::predict(const Eigen::VectorXd& x) const {
  int votes = 0;
  for (const GiniTree& t : trees_) votes += t.predict(x);
  return 2 * votes > static_cast<int>(trees_.size()) ? 1 : 0;
}

nlohmann::json RandomForest::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const GiniTree& t : trees_) arr.push_back(tree_to_json(t.nodes()));
  return {{"trees", arr}};
}

RandomForest RandomForest::from_json(const nlohmann::json& j) {
  RandomForest rf;
  for (const auto& tj : j.at("trees")) {
    GiniTree t;
    t.set_nodes(tree_from_json(tj));
    rf.trees_.push_back(std::move(t));
  }
  return rf;
}

}  // namespace bacdet
