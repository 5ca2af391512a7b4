#include "bacdet/classify/svm.hpp"

#include <cmath>
#include <limits>

namespace bacdet {

nlohmann::json SvmConfig::to_json() const {
  return {{"c", c}, {"gamma", gamma}, {"tol", tol}, {"max_iter", max_iter}};
}

SvmConfig SvmConfig::from_json(const nlohmann::json& j) {
  SvmConfig cfg;
  cfg.c = j.at("c").get<double>();
  cfg.gamma = j.at("gamma").get<double>();
  cfg.tol = j.at("tol").get<double>();
  cfg.max_iter = j.at("max_iter").get<long>();
  return cfg;
}

void SvmRbf::fit(const Eigen::MatrixXd& x, const std::vector<int>& y01,
                 const SvmConfig& config) {
  const Eigen::Index n = x.rows(), d = x.cols();
  if (n < 2 || static_cast<Eigen::Index>(y01.size()) != n)
    throw data_error("svm: need at least two labeled samples");
  if (config.c <= 0.0) throw config_error("svm: margin penalty must be > 0");

  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) y(i) = y01[static_cast<std::size_t>(i)] ? 1.0 : -1.0;

  mean_ = x.colwise().mean();
  scale_.resize(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    const double var = (x.col(j).array() - mean_(j)).square().mean();
    scale_(j) = var > 0.0 ? std::sqrt(var) : 1.0;
  }
  Eigen::MatrixXd xs = ((x.rowwise() - mean_.transpose()).array().rowwise() /
                        scale_.transpose().array())
                           .matrix();

  gamma_ = config.gamma > 0.0 ? config.gamma : 1.0 / static_cast<double>(d);

  // Full kernel matrix via ||a-b||^2 = |a|^2 + |b|^2 - 2 a.b
  Eigen::VectorXd sq = xs.rowwise().squaredNorm();
  Eigen::MatrixXd kernel = xs * xs.transpose();
  kernel = ((-2.0 * kernel).colwise() + sq).rowwise() + sq.transpose();
  kernel = (-gamma_ * kernel.array()).exp().matrix();

  const double c = config.c;
  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd f = Eigen::VectorXd::Zero(n);  // f_i = sum_j alpha_j y_j K_ij

  double m_up = 0.0, m_low = 0.0;
  for (long iter = 0; iter < config.max_iter; ++iter) {
    // Maximal violating pair over -E = y - f.
    int i = -1, j = -1;
    m_up = -std::numeric_limits<double>::infinity();
    m_low = std::numeric_limits<double>::infinity();
    for (Eigen::Index t = 0; t < n; ++t) {
      const double v = y(t) - f(t);
      const bool in_up = (y(t) > 0 && alpha(t) < c) || (y(t) < 0 && alpha(t) > 0);
      const bool in_low = (y(t) < 0 && alpha(t) < c) || (y(t) > 0 && alpha(t) > 0);
      if (in_up && v > m_up) {
        m_up = v;
        i = static_cast<int>(t);
      }
      if (in_low && v < m_low) {
        m_low = v;
        j = static_cast<int>(t);
      }
    }
    if (i < 0 || j < 0 || m_up - m_low <= config.tol) break;

    const double eta = kernel(i, i) + kernel(j, j) - 2.0 * kernel(i, j);
    if (eta <= 1e-12) break;

    double lo, hi;
    if (y(i) != y(j)) {
      lo = std::max(0.0, alpha(j) - alpha(i));
      hi = std::min(c, c + alpha(j) - alpha(i));
    } else {
      lo = std::max(0.0, alpha(i) + alpha(j) - c);
      hi = std::min(c, alpha(i) + alpha(j));
    }
    const double ei = f(i) - y(i), ej = f(j) - y(j);
    double aj = alpha(j) + y(j) * (ei - ej) / eta;
    aj = std::min(hi, std::max(lo, aj));
    const double dj = aj - alpha(j);
    if (std::abs(dj) < 1e-12) break;
    const double ai = alpha(i) + y(i) * y(j) * (alpha(j) - aj);
    const double di = ai - alpha(i);

    f += di * y(i) * kernel.col(i) + dj * y(j) * kernel.col(j);
    alpha(i) = ai;
    alpha(j) = aj;
  }

  bias_ = (m_up + m_low) / 2.0;

  std::vector<Eigen::Index> sv;
  for (Eigen::Index t = 0; t < n; ++t)
    if (alpha(t) > 1e-12) sv.push_back(t);
  support_.resize(static_cast<Eigen::Index>(sv.size()), d);
  dual_coef_.resize(static_cast<Eigen::Index>(sv.size()));
  for (std::size_t k = 0; k < sv.size(); ++k) {
    support_.row(static_cast<Eigen::Index>(k)) = xs.row(sv[k]);
    dual_coef_(static_cast<Eigen::Index>(k)) = alpha(sv[k]) * y(sv[k]);
  }
}

double SvmRbf::decision_value(const Eigen::VectorXd& x) const {
  Eigen::VectorXd xsv = ((x - mean_).array() / scale_.array()).matrix();
  const Eigen::VectorXd dist =
      (support_.rowwise() - xsv.transpose()).rowwise().squaredNorm();
  return dual_coef_.dot((-gamma_ * dist.array()).exp().matrix()) + bias_;
}

int SvmRbf::predict(const Eigen::VectorXd& x) const {
  return decision_value(x) >= 0.0 ? 1 : 0;
}

namespace {
nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
  const Eigen::Index cols = rows > 0 ? static_cast<Eigen::Index>(j[0].size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index k = 0; k < cols; ++k)
      m(i, k) = j[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)].get<double>();
  return m;
}

nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = j[static_cast<std::size_t>(i)].get<double>();
  return v;
}
}  // namespace

nlohmann::json SvmRbf::to_json() const {
  return {{"support", matrix_to_json(support_)},
          {"dual_coef", vector_to_json(dual_coef_)},
          {"mean", vector_to_json(mean_)},
          {"scale", vector_to_json(scale_)},
          {"bias", bias_},
          {"gamma", gamma_}};
}

SvmRbf SvmRbf::from_json(const nlohmann::json& j) {
  SvmRbf m;
  m.support_ = matrix_from_json(j.at("support"));
  m.dual_coef_ = vector_from_json(j.at("dual_coef"));
  m.mean_ = vector_from_json(j.at("mean"));
  m.scale_ = vector_from_json(j.at("scale"));
  m.bias_ = j.at("bias").get<double>();
  m.gamma_ = j.at("gamma").get<double>();
  return m;
}

}  // namespace bacdet
