#include "bacdet/roiext.hpp"

#include <algorithm>
#include <deque>
#include <numeric>
#include <random>

namespace bacdet {

std::vector<Component> connected_components(const BinaryMask& mask, int connectivity) {
  if (connectivity != 4 && connectivity != 8)
    throw config_error("connectivity must be 4 or 8, got " + std::to_string(connectivity));

  const int h = mask.height(), w = mask.width();
  Plane<std::int32_t> label = Plane<std::int32_t>::Constant(h, w, -1);
  std::vector<Component> components;

  static constexpr int dy8[] = {-1, -1, -1, 0, 0, 1, 1, 1};
  static constexpr int dx8[] = {-1, 0, 1, -1, 1, -1, 0, 1};
  static constexpr int dy4[] = {-1, 0, 0, 1};
  static constexpr int dx4[] = {0, -1, 1, 0};
  const int* dy = connectivity == 8 ? dy8 : dy4;
  const int* dx = connectivity == 8 ? dx8 : dx4;
  const int n_dir = connectivity;

  std::deque<std::pair<int, int>> frontier;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (mask.bits(y, x) == 0 || label(y, x) >= 0) continue;
      Component comp;
      comp.id = static_cast<int>(components.size());
      int min_x = x, max_x = x, min_y = y, max_y = y;
      label(y, x) = comp.id;
      frontier.clear();
      frontier.emplace_back(y, x);
      while (!frontier.empty()) {
        const auto [cy, cx] = frontier.front();
        frontier.pop_front();
        comp.pixels.emplace_back(cy, cx);
        min_x = std::min(min_x, cx);
        max_x = std::max(max_x, cx);
        min_y = std::min(min_y, cy);
        max_y = std::max(max_y, cy);
        for (int d = 0; d < n_dir; ++d) {
          const int ny = cy + dy[d], nx = cx + dx[d];
          if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
          if (mask.bits(ny, nx) == 0 || label(ny, nx) >= 0) continue;
          label(ny, nx) = comp.id;
          frontier.emplace_back(ny, nx);
        }
      }
      comp.bbox = {min_x, min_y, max_x - min_x + 1, max_y - min_y + 1};
      components.push_back(std::move(comp));
    }
  }
  return components;
}

namespace {

BBox expand_clamped(const BBox& b, int margin, int img_w, int img_h) {
  const int x0 = std::max(0, b.x - margin);
  const int y0 = std::max(0, b.y - margin);
  const int x1 = std::min(img_w, b.x + b.w + margin);
  const int y1 = std::min(img_h, b.y + b.h + margin);
  return {x0, y0, x1 - x0, y1 - y0};
}

std::array<BytePlane, 3> crop_channels(const Image& image, const BBox& b) {
  std::array<BytePlane, 3> out;
  for (int ch = 0; ch < 3; ++ch)
    out[static_cast<size_t>(ch)] = image.channels[static_cast<size_t>(ch)].block(b.y, b.x, b.h, b.w);
  return out;
}

}  // namespace

std::vector<Roi> extract_rois(const Image& image, const BinaryMask& mask, const RoiFilter& filter) {
  if (image.height() != mask.height() || image.width() != mask.width())
    throw data_error("image/mask dimension mismatch in extract_rois");

  std::vector<Roi> rois;
  for (const auto& comp : connected_components(mask, filter.connectivity)) {
    if (comp.area() < filter.min_area || comp.area() > filter.max_area) continue;
    Roi roi;
    roi.bbox = expand_clamped(comp.bbox, filter.margin, image.width(), image.height());
    roi.pixels = crop_channels(image, roi.bbox);
    roi.component_id = comp.id;
    roi.source_image_id = image.id;
    roi.area_px = comp.area();
    rois.push_back(std::move(roi));
  }
  return rois;
}

HarvestResult harvest_labeled_regions(const Image& image, const BinaryMask& truth_mask,
                                      int n_pos, int n_neg, std::uint64_t seed,
                                      const RoiFilter& filter) {
  if (image.height() != truth_mask.height() || image.width() != truth_mask.width())
    throw data_error("image/mask dimension mismatch in harvest_labeled_regions");

  HarvestResult result;
  std::mt19937_64 rng(seed);

  std::vector<Roi> candidates = extract_rois(image, truth_mask, filter);
  if (n_pos > 0 && candidates.empty()) result.insufficient_positives = true;

  std::vector<size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  const int take = std::min<int>(n_pos, static_cast<int>(candidates.size()));
  if (take < n_pos) result.insufficient_positives = true;
  for (int i = 0; i < take; ++i) {
    const Roi& roi = candidates[order[static_cast<size_t>(i)]];
    result.regions.push_back({roi, RegionLabel::bacilli, roi.region_id()});
  }

  // Negative crops are size-matched to the positive bbox distribution; when no
  // positives exist a nominal rod-like size stands in.
  std::vector<std::pair<int, int>> sizes;  // (w, h)
  for (const auto& c : candidates) sizes.emplace_back(c.bbox.w, c.bbox.h);
  if (sizes.empty()) sizes.emplace_back(32, 16);

  const int img_w = image.width(), img_h = image.height();
  int emitted = 0;
  constexpr int kMaxTries = 2000;
  for (int tries = 0; emitted < n_neg && tries < kMaxTries * std::max(1, n_neg); ++tries) {
    const auto [bw, bh] = sizes[std::uniform_int_distribution<size_t>(0, sizes.size() - 1)(rng)];
    const int w = std::min(bw, img_w), h = std::min(bh, img_h);
    const int x = std::uniform_int_distribution<int>(0, img_w - w)(rng);
    const int y = std::uniform_int_distribution<int>(0, img_h - h)(rng);
    if ((truth_mask.bits.block(y, x, h, w) != 0).any()) continue;  // must not touch truth

    Roi roi;
    roi.bbox = {x, y, w, h};
    roi.pixels = crop_channels(image, roi.bbox);
    roi.component_id = -(emitted + 1);  // negatives carry no mask component
    roi.source_image_id = image.id;
    roi.area_px = 0;
    result.regions.push_back(
        {roi, RegionLabel::non_bacilli, image.id + "_n" + std::to_string(emitted)});
    ++emitted;
  }
  if (emitted < n_neg)
    throw data_error("could not place " + std::to_string(n_neg) +
                     " negative regions with zero truth overlap (placed " +
                     std::to_string(emitted) + ")");
  return result;
}

}  // namespace bacdet
