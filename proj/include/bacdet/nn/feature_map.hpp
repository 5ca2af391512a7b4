#pragma once

#include "bacdet/types.hpp"

#include <Eigen/Core>

namespace bacdet::nn {

/// Dense C x H x W activation tensor. Storage is a row-major channels x (H*W)
/// matrix so convolutions reduce to GEMMs against im2col buffers; each row is
/// one row-major spatial plane.
template <typename Scalar>
struct FeatureMap {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using PlaneMap = Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
  using ConstPlaneMap =
      Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

  int channels = 0;
  int height = 0;
  int width = 0;
  Matrix data;

  FeatureMap() = default;
  FeatureMap(int c, int h, int w) : channels(c), height(h), width(w), data(c, h * w) {}

  static FeatureMap zeros(int c, int h, int w) {
    FeatureMap f(c, h, w);
    f.data.setZero();
    return f;
  }

  int plane_size() const { return height * width; }

  PlaneMap plane(int c) { return PlaneMap(data.row(c).data(), height, width); }
  ConstPlaneMap plane(int c) const { return ConstPlaneMap(data.row(c).data(), height, width); }

  Scalar& at(int c, int y, int x) { return data(c, y * width + x); }
  Scalar at(int c, int y, int x) const { return data(c, y * width + x); }

  bool same_shape(const FeatureMap& o) const {
    return channels == o.channels && height == o.height && width == o.width;
  }
};

/// Converts an 8-bit RGB patch to a [0,1]-normalized feature map.
template <typename Scalar>
FeatureMap<Scalar> to_feature_map(const std::array<BytePlane, 3>& rgb) {
  const int h = static_cast<int>(rgb[0].rows());
  const int w = static_cast<int>(rgb[0].cols());
  FeatureMap<Scalar> f(3, h, w);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        f.at(c, y, x) = static_cast<Scalar>(rgb[static_cast<size_t>(c)](y, x)) / Scalar(255);
  return f;
}

/// Target plane from a {0,1} mask, shaped like a single-channel feature map.
template <typename Scalar>
FeatureMap<Scalar> mask_to_target(const BytePlane& bits) {
  const int h = static_cast<int>(bits.rows());
  const int w = static_cast<int>(bits.cols());
  FeatureMap<Scalar> f(1, h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) f.at(0, y, x) = bits(y, x) ? Scalar(1) : Scalar(0);
  return f;
}

}  // namespace bacdet::nn
