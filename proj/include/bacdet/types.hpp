#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace bacdet {

/// Row-major 2-D raster plane, indexed (y, x).
template <typename Scalar>
using Plane = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using BytePlane = Plane<std::uint8_t>;

// Raised when a referenced artifact (file, checkpoint) is missing or unreadable.
struct io_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Raised for malformed configuration (bad keys, invalid parameter combinations).
struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Raised when data violates an invariant (dimension mismatch, bad split, ...).
struct data_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// 8-bit RGB image, planar channel layout.
struct Image {
  std::array<BytePlane, 3> channels;  // r, g, b
  std::string id;
  std::string source_path;

  int height() const { return static_cast<int>(channels[0].rows()); }
  int width() const { return static_cast<int>(channels[0].cols()); }
};

/// H x W {0,1} raster aligned to an Image (or to a patch when patch-scoped).
struct BinaryMask {
  BytePlane bits;
  std::string image_id;

  int height() const { return static_cast<int>(bits.rows()); }
  int width() const { return static_cast<int>(bits.cols()); }
  std::int64_t count_ones() const {
    return static_cast<std::int64_t>((bits != 0).count());
  }
};

struct BBox {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;
};

/// One connected-component crop taken from a source image.
struct Roi {
  BBox bbox;                    // in source-image pixels
  std::array<BytePlane, 3> pixels;  // RGB crop, bbox-sized
  int component_id = 0;
  std::string source_image_id;
  std::int64_t area_px = 0;     // component area, not bbox area

  std::string region_id() const {
    return source_image_id + "_c" + std::to_string(component_id);
  }
};

enum class RegionLabel { bacilli, non_bacilli };

inline const char* to_string(RegionLabel l) {
  return l == RegionLabel::bacilli ? "bacilli" : "non_bacilli";
}

struct LabeledRegion {
  Roi roi;
  RegionLabel label = RegionLabel::non_bacilli;
  std::string region_id;  // unique within a harvest
};

}  // namespace bacdet
