#pragma once

#include "bacdet/types.hpp"

#include <cstdint>
#include <vector>

namespace bacdet {

struct Component {
  int id = 0;                      // raster order of the first pixel
  std::vector<std::pair<int, int>> pixels;  // (y, x)
  BBox bbox;
  std::int64_t area() const { return static_cast<std::int64_t>(pixels.size()); }
};

/// Partitions the mask's 1-pixels into maximal connected sets (default
/// 8-connectivity). Components are labeled in raster order of their first
/// pixel, starting at 0.
std::vector<Component> connected_components(const BinaryMask& mask, int connectivity = 8);

struct RoiFilter {
  std::int64_t min_area = 20;
  std::int64_t max_area = 5000;
  int margin = 4;  // bbox expansion, clamped to image bounds
  int connectivity = 8;
};

/// One Roi per component whose area lies in [min_area, max_area]; crops come
/// from the original RGB image with the margin-expanded bbox.
std::vector<Roi> extract_rois(const Image& image, const BinaryMask& mask,
                              const RoiFilter& filter = {});

struct HarvestResult {
  std::vector<LabeledRegion> regions;
  bool insufficient_positives = false;  // fewer components than n_pos
};

/// Harvests classifier training material from ground truth: up to n_pos
/// component crops as positives and n_neg seeded random crops with zero truth
/// overlap as negatives, size-matched to the positive bbox distribution.
HarvestResult harvest_labeled_regions(const Image& image, const BinaryMask& truth_mask,
                                      int n_pos, int n_neg, std::uint64_t seed,
                                      const RoiFilter& filter = {});

}  // namespace bacdet
