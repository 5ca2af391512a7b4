#pragma once

#include "bacdet/types.hpp"

#include "json.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <vector>

namespace bacdet {

struct SvmConfig {
  double c = 1.0;
  double gamma = 0.0;  // 0 selects 1/feature_dim
  double tol = 1e-3;
  long max_iter = 200000;  // pair updates

  nlohmann::json to_json() const;
  static SvmConfig from_json(const nlohmann::json& j);
};

/// Soft-margin RBF-kernel classifier fitted by sequential minimal
/// optimization with maximal-violating-pair selection. Features are
/// z-score standardized internally so the 1/d default kernel width is
/// scale-free.
class SvmRbf {
 public:
  void fit(const Eigen::MatrixXd& x, const std::vector<int>& y01, const SvmConfig& config);

  int predict(const Eigen::VectorXd& x) const;  // {0,1}
  double decision_value(const Eigen::VectorXd& x) const;

  int support_vector_count() const { return static_cast<int>(support_.rows()); }

  nlohmann::json to_json() const;
  static SvmRbf from_json(const nlohmann::json& j);

 private:
  Eigen::MatrixXd support_;      // standardized support vectors, row-major samples
  Eigen::VectorXd dual_coef_;    // alpha_i * y_i
  Eigen::VectorXd mean_, scale_;
  double bias_ = 0.0;
  double gamma_ = 0.0;
};

}  // namespace bacdet
