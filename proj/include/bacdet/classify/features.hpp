#pragma once

#include "bacdet/types.hpp"

#include <Eigen/Core>

#include <string>

namespace bacdet {

struct FeatureVector {
  Eigen::VectorXd values;
  std::string spec_id;
};

/// 32x32 bilinear crop resize, channels normalized to [0,1] and flattened
/// (3072 values), plus 6 shape/color scalars: component area, bbox aspect
/// ratio (w/h), extent (area / bbox area), mean and std of the (R-G)/255
/// difference, mean HSV saturation.
inline constexpr const char* kDefaultFeatureSpec = "pix32+shape6";

/// The 6 shape/color scalars alone (rank-preserving under exact channel
/// scaling; used by the tree-invariance checks).
inline constexpr const char* kShapeFeatureSpec = "shape6";

int feature_length(const std::string& spec_id);

FeatureVector featurize(const Roi& roi, const std::string& spec_id = kDefaultFeatureSpec);

}  // namespace bacdet
