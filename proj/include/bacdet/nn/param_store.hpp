#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

namespace bacdet::nn {

/// Flat registry of named tensors. Layers hold handles (indices) into a
/// store, so the same layer graph can run against the live parameters, a
/// snapshot, or per-sample gradient buffers.
template <typename Scalar>
class ParamStore {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  struct Entry {
    std::string name;
    Matrix value;
  };

  int add(std::string name, int rows, int cols) {
    entries_.push_back({std::move(name), Matrix::Zero(rows, cols)});
    return static_cast<int>(entries_.size()) - 1;
  }

  Matrix& operator[](int handle) { return entries_[static_cast<size_t>(handle)].value; }
  const Matrix& operator[](int handle) const {
    return entries_[static_cast<size_t>(handle)].value;
  }

  std::vector<Entry>& entries() { return entries_; }
  const std::vector<Entry>& entries() const { return entries_; }
  int size() const { return static_cast<int>(entries_.size()); }

  std::int64_t scalar_count() const {
    std::int64_t n = 0;
    for (const auto& e : entries_) n += e.value.size();
    return n;
  }

 private:
  std::vector<Entry> entries_;
};

/// Gradient buffers parallel to a ParamStore's entries.
template <typename Scalar>
class GradStore {
 public:
  using Matrix = typename ParamStore<Scalar>::Matrix;

  explicit GradStore(const ParamStore<Scalar>& params) {
    grads_.reserve(params.entries().size());
    for (const auto& e : params.entries())
      grads_.push_back(Matrix::Zero(e.value.rows(), e.value.cols()));
  }

  void zero() {
    for (auto& g : grads_) g.setZero();
  }

  void accumulate(const GradStore& other) {
    for (size_t i = 0; i < grads_.size(); ++i) grads_[i] += other.grads_[i];
  }

  void scale(Scalar s) {
    for (auto& g : grads_) g *= s;
  }

  Matrix& operator[](int handle) { return grads_[static_cast<size_t>(handle)]; }
  const Matrix& operator[](int handle) const { return grads_[static_cast<size_t>(handle)]; }
  size_t size() const { return grads_.size(); }

 private:
  std::vector<Matrix> grads_;
};

}  // namespace bacdet::nn
