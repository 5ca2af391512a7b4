#include "bacdet/classify/boost.hpp"

#include "bacdet/parallel.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

namespace bacdet {

nlohmann::json GbtConfig::to_json() const {
  return {{"n_rounds", n_rounds},
          {"max_depth", max_depth},
          {"learning_rate", learning_rate},
          {"lambda_reg", lambda_reg},
          {"min_samples_leaf", min_samples_leaf},
          {"workers", workers}};
}

GbtConfig GbtConfig::from_json(const nlohmann::json& j) {
  GbtConfig c;
  c.n_rounds = j.at("n_rounds").get<int>();
  c.max_depth = j.at("max_depth").get<int>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.lambda_reg = j.at("lambda_reg").get<double>();
  c.min_samples_leaf = j.at("min_samples_leaf").get<int>();
  c.workers = j.at("workers").get<int>();
  return c;
}

namespace {

struct SplitChoice {
  double gain = 0.0;
  int feature = -1;
  double threshold = 0.0;
};

struct TreeBuilder {
  const Eigen::MatrixXd& x;
  const Eigen::VectorXd& grad;
  const Eigen::VectorXd& hess;
  const GbtConfig& cfg;
  std::vector<TreeNode> nodes;
  std::vector<int> idx;

  int grow(int begin, int end, int depth) {
    const int m = end - begin;
    double g_sum = 0.0, h_sum = 0.0;
    for (int i = begin; i < end; ++i) {
      g_sum += grad(idx[static_cast<std::size_t>(i)]);
      h_sum += hess(idx[static_cast<std::size_t>(i)]);
    }
    const int node_id = static_cast<int>(nodes.size());
    nodes.push_back(TreeNode{});
    nodes[static_cast<std::size_t>(node_id)].value =
        cfg.learning_rate * (-g_sum / (h_sum + cfg.lambda_reg));

    if (depth >= cfg.max_depth || m < 2 * cfg.min_samples_leaf) return node_id;

    const int d = static_cast<int>(x.cols());
    const double parent_score = g_sum * g_sum / (h_sum + cfg.lambda_reg);
    std::vector<SplitChoice> per_feature(static_cast<std::size_t>(d));

    parallel_for(d, cfg.workers, [&](int f) {
      std::vector<std::array<double, 3>> vals(static_cast<std::size_t>(m));
      for (int i = 0; i < m; ++i) {
        const int s = idx[static_cast<std::size_t>(begin + i)];
        vals[static_cast<std::size_t>(i)] = {x(s, f), grad(s), hess(s)};
      }
      std::sort(vals.begin(), vals.end(),
                [](const auto& a, const auto& b) { return a[0] < b[0]; });
      double gl = 0.0, hl = 0.0;
      SplitChoice best;
      for (int k = 1; k < m; ++k) {
        gl += vals[static_cast<std::size_t>(k - 1)][1];
        hl += vals[static_cast<std::size_t>(k - 1)][2];
        if (vals[static_cast<std::size_t>(k - 1)][0] == vals[static_cast<std::size_t>(k)][0])
          continue;
        if (k < cfg.min_samples_leaf || m - k < cfg.min_samples_leaf) continue;
        const double gr = g_sum - gl, hr = h_sum - hl;
        const double gain = 0.5 * (gl * gl / (hl + cfg.lambda_reg) +
                                   gr * gr / (hr + cfg.lambda_reg) - parent_score);
        if (gain > best.gain) {
          best.gain = gain;
          best.feature = f;
          best.threshold =
              (vals[static_cast<std::size_t>(k - 1)][0] + vals[static_cast<std::size_t>(k)][0]) /
              2.0;
        }
      }
      per_feature[static_cast<std::size_t>(f)] = best;
    });

    SplitChoice best;
    for (int f = 0; f < d; ++f)  // fixed-order reduce: lowest feature wins ties
      if (per_feature[static_cast<std::size_t>(f)].gain > best.gain)
        best = per_feature[static_cast<std::size_t>(f)];
    if (best.feature < 0 || best.gain <= 1e-12) return node_id;

    auto mid_it = std::stable_partition(
        idx.begin() + begin, idx.begin() + end,
        [&](int s) { return x(s, best.feature) <= best.threshold; });
    const int mid = static_cast<int>(mid_it - idx.begin());
    if (mid == begin || mid == end) return node_id;

    nodes[static_cast<std::size_t>(node_id)].feature = best.feature;
    nodes[static_cast<std::size_t>(node_id)].threshold = best.threshold;
    const int left = grow(begin, mid, depth + 1);
    const int right = grow(mid, end, depth + 1);
    nodes[static_cast<std::size_t>(node_id)].left = left;
    nodes[static_cast<std::size_t>(node_id)].right = right;
    return node_id;
  }
};

}  // namespace

void GradientBoostedTrees::fit(const Eigen::MatrixXd& x, const std::vector<int>& y01,
                               const GbtConfig& config) {
  if (config.n_rounds < 1) throw config_error("boosting needs n_rounds >= 1");
  const int n = static_cast<int>(x.rows());
  Eigen::VectorXd score = Eigen::VectorXd::Zero(n);  // log-odds; base rate 0.5
  Eigen::VectorXd grad(n), hess(n);

  trees_.clear();
  trees_.reserve(static_cast<std::size_t>(config.n_rounds));
  for (int round = 0; round < config.n_rounds; ++round) {
    for (int i = 0; i < n; ++i) {
      const double p = 1.0 / (1.0 + std::exp(-score(i)));
      grad(i) = p - static_cast<double>(y01[static_cast<std::size_t>(i)]);
      hess(i) = p * (1.0 - p);
    }
    TreeBuilder builder{x, grad, hess, config, {}, {}};
    builder.idx.resize(static_cast<std::size_t>(n));
    std::iota(builder.idx.begin(), builder.idx.end(), 0);
    builder.grow(0, n, 0);
    for (int i = 0; i < n; ++i)
      score(i) += tree_predict_value(builder.nodes, x.row(i).transpose());
    trees_.push_back(std::move(builder.nodes));
  }
}

double GradientBoostedTrees::decision_value(const Eigen::VectorXd& x) const {
  double s = 0.0;
  for (const auto& t : trees_) s += tree_predict_value(t, x);
  return s;
}

nlohmann::json GradientBoostedTrees::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& t : trees_) arr.push_back(tree_to_json(t));
  return {{"trees", arr}};
}

GradientBoostedTrees GradientBoostedTrees::from_json(const nlohmann::json& j) {
  GradientBoostedTrees g;
  for (const auto& tj : j.at("trees")) g.trees_.push_back(tree_from_json(tj));
  return g;
}

}  // namespace bacdet
