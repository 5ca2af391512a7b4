#include "bacdet/classify/features.hpp"

#include "bacdet/tiling.hpp"

#include <algorithm>
#include <cmath>

namespace bacdet {

namespace {

constexpr int kPixSide = 32;
constexpr int kPixValues = 3 * kPixSide * kPixSide;
constexpr int kShapeValues = 6;

void append_shape_scalars(const Roi& roi, Eigen::VectorXd& v, int offset) {
  const int w = roi.bbox.w, h = roi.bbox.h;
  const double n = static_cast<double>(w) * h;

  double rg_sum = 0.0, rg_sq = 0.0, sat_sum = 0.0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double r = roi.pixels[0](y, x), g = roi.pixels[1](y, x), b = roi.pixels[2](y, x);
      const double rg = (r - g) / 255.0;
      rg_sum += rg;
      rg_sq += rg * rg;
      const double hi = std::max({r, g, b}), lo = std::min({r, g, b});
      sat_sum += hi > 0.0 ? (hi - lo) / hi : 0.0;
    }
  const double rg_mean = rg_sum / n;
  const double rg_var = std::max(0.0, rg_sq / n - rg_mean * rg_mean);

  v(offset + 0) = static_cast<double>(roi.area_px);
  v(offset + 1) = static_cast<double>(w) / h;
  v(offset + 2) = static_cast<double>(roi.area_px) / n;
  v(offset + 3) = rg_mean;
  v(offset + 4) = std::sqrt(rg_var);
  v(offset + 5) = sat_sum / n;
}

}  // namespace

int feature_length(const std::string& spec_id) {
  if (spec_id == kDefaultFeatureSpec) return kPixValues + kShapeValues;
  if (spec_id == kShapeFeatureSpec) return kShapeValues;
  throw config_error("unknown feature spec '" + spec_id + "'");
}

FeatureVector featurize(const Roi& roi, const std::string& spec_id) {
  if (roi.bbox.w <= 0 || roi.bbox.h <= 0)
    throw data_error("degenerate roi " + roi.region_id() + ": empty bounding box");

  FeatureVector fv;
  fv.spec_id = spec_id;
  fv.values.resize(feature_length(spec_id));

  if (spec_id == kDefaultFeatureSpec) {
    Image crop;
    crop.channels = roi.pixels;
    Image resized = resize_bilinear(crop, kPixSide, kPixSide);
    int k = 0;
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < kPixSide; ++y)
        for (int x = 0; x < kPixSide; ++x)
          fv.values(k++) = resized.channels[static_cast<std::size_t>(c)](y, x) / 255.0;
    append_shape_scalars(roi, fv.values, kPixValues);
  } else {
    append_shape_scalars(roi, fv.values, 0);
  }
  return fv;
}

}  // namespace bacdet
