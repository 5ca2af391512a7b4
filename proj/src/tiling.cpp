#include "bacdet/tiling.hpp"

#include <algorithm>
#include <cmath>

namespace bacdet {
namespace {

template <typename Scalar>
Plane<Scalar> tile_plane(const Plane<Scalar>& src, int r, int c, int ps) {
  Plane<Scalar> out = Plane<Scalar>::Zero(ps, ps);
  const int y0 = r * ps, x0 = c * ps;
  const int h = std::min<int>(ps, static_cast<int>(src.rows()) - y0);
  const int w = std::min<int>(ps, static_cast<int>(src.cols()) - x0);
  if (h > 0 && w > 0) out.block(0, 0, h, w) = src.block(y0, x0, h, w);
  return out;
}

void check_pre(int h, int w, int ps, TilePolicy policy) {
  if (ps < 8) throw config_error("patch_size must be >= 8, got " + std::to_string(ps));
  if (h < 1 || w < 1)
    throw data_error("cannot tile an empty image (" + std::to_string(h) + "x" +
                     std::to_string(w) + ")");
  if (policy == TilePolicy::crop && (h < ps || w < ps))
    throw data_error("image " + std::to_string(h) + "x" + std::to_string(w) +
                     " smaller than one " + std::to_string(ps) + "px patch under crop policy");
}

}  // namespace

PatchGrid make_grid(int height, int width, int patch_size, TilePolicy policy,
                    const std::string& image_id) {
  check_pre(height, width, patch_size, policy);
  PatchGrid grid;
  grid.image_id = image_id;
  grid.patch_size = patch_size;
  grid.policy = policy;
  if (policy == TilePolicy::crop) {
    grid.rows = height / patch_size;
    grid.cols = width / patch_size;
  } else {
    grid.rows = (height + patch_size - 1) / patch_size;
    grid.cols = (width + patch_size - 1) / patch_size;
  }
  return grid;
}

std::vector<Patch> tile(const Image& image, int patch_size, TilePolicy policy) {
  const PatchGrid grid = make_grid(image.height(), image.width(), patch_size, policy, image.id);
  std::vector<Patch> patches;
  patches.reserve(static_cast<size_t>(grid.patch_count()));
  for (int r = 0; r < grid.rows; ++r)
    for (int c = 0; c < grid.cols; ++c) {
      Patch p;
      for (int ch = 0; ch < 3; ++ch)
        p.pixels[static_cast<size_t>(ch)] =
            tile_plane(image.channels[static_cast<size_t>(ch)], r, c, patch_size);
      p.row = r;
      p.col = c;
      p.image_id = image.id;
      patches.push_back(std::move(p));
    }
  return patches;
}

std::vector<MaskPatch> tile_mask(const BinaryMask& mask, int patch_size, TilePolicy policy) {
  const PatchGrid grid = make_grid(mask.height(), mask.width(), patch_size, policy, mask.image_id);
  std::vector<MaskPatch> patches;
  patches.reserve(static_cast<size_t>(grid.patch_count()));
  for (int r = 0; r < grid.rows; ++r)
    for (int c = 0; c < grid.cols; ++c)
      patches.push_back({tile_plane(mask.bits, r, c, patch_size), r, c});
  return patches;
}

BinaryMask stitch(const std::vector<MaskPatch>& patch_masks, const PatchGrid& grid) {
  const int ps = grid.patch_size;
  BinaryMask out;
  out.image_id = grid.image_id;
  out.bits = BytePlane::Zero(grid.rows * ps, grid.cols * ps);

  std::vector<char> filled(static_cast<size_t>(grid.patch_count()), 0);
  for (const auto& pm : patch_masks) {
    if (pm.row < 0 || pm.row >= grid.rows || pm.col < 0 || pm.col >= grid.cols)
      throw data_error("patch cell (" + std::to_string(pm.row) + "," + std::to_string(pm.col) +
                       ") outside grid");
    if (pm.bits.rows() != ps || pm.bits.cols() != ps)
      throw data_error("patch mask size mismatch at cell (" + std::to_string(pm.row) + "," +
                       std::to_string(pm.col) + ")");
    char& f = filled[static_cast<size_t>(pm.row) * grid.cols + pm.col];
    if (f)
      throw data_error("duplicate patch cell (" + std::to_string(pm.row) + "," +
                       std::to_string(pm.col) + ")");
    f = 1;
    out.bits.block(pm.row * ps, pm.col * ps, ps, ps) = pm.bits;
  }
  for (int r = 0; r < grid.rows; ++r)
    for (int c = 0; c < grid.cols; ++c)
      if (!filled[static_cast<size_t>(r) * grid.cols + c])
        throw data_error("missing patch cell (" + std::to_string(r) + "," + std::to_string(c) +
                         ")");
  return out;
}

std::string patch_name(const std::string& image_id, int row, int col) {
  return image_id + "_r" + std::to_string(row) + "_c" + std::to_string(col);
}

namespace {

BytePlane resize_plane_bilinear(const BytePlane& src, int out_h, int out_w) {
  const int h = static_cast<int>(src.rows()), w = static_cast<int>(src.cols());
  BytePlane out(out_h, out_w);
  const double sy = static_cast<double>(h) / out_h;
  const double sx = static_cast<double>(w) / out_w;
  for (int y = 0; y < out_h; ++y) {
    // pixel-center alignment
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(h - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, h - 1);
    const double wy = fy - y0;
    for (int x = 0; x < out_w; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(w - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, w - 1);
      const double wx = fx - x0;
      const double v = (1 - wy) * ((1 - wx) * src(y0, x0) + wx * src(y0, x1)) +
                       wy * ((1 - wx) * src(y1, x0) + wx * src(y1, x1));
      out(y, x) = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
    }
  }
  return out;
}

}  // namespace

Image resize_bilinear(const Image& image, int out_h, int out_w) {
  if (out_h < 1 || out_w < 1) throw config_error("resize target must be >= 1x1");
  Image out;
  out.id = image.id;
  out.source_path = image.source_path;
  for (int ch = 0; ch < 3; ++ch)
    out.channels[static_cast<size_t>(ch)] =
        resize_plane_bilinear(image.channels[static_cast<size_t>(ch)], out_h, out_w);
  return out;
}

BinaryMask resize_nearest(const BinaryMask& mask, int out_h, int out_w) {
  if (out_h < 1 || out_w < 1) throw config_error("resize target must be >= 1x1");
  const int h = mask.height(), w = mask.width();
  BinaryMask out;
  out.image_id = mask.image_id;
  out.bits.resize(out_h, out_w);
  for (int y = 0; y < out_h; ++y) {
    const int sy = std::min(static_cast<int>((y + 0.5) * h / out_h), h - 1);
    for (int x = 0; x < out_w; ++x) {
      const int sx = std::min(static_cast<int>((x + 0.5) * w / out_w), w - 1);
      out.bits(y, x) = mask.bits(sy, sx);
    }
  }
  return out;
}

Image crop_center(const Image& image, int out_h, int out_w) {
  if (out_h > image.height() || out_w > image.width())
    throw data_error("center crop larger than source image");
  const int y0 = (image.height() - out_h) / 2;
  const int x0 = (image.width() - out_w) / 2;
  Image out;
  out.id = image.id;
  out.source_path = image.source_path;
  for (int ch = 0; ch < 3; ++ch)
    out.channels[static_cast<size_t>(ch)] =
        image.channels[static_cast<size_t>(ch)].block(y0, x0, out_h, out_w);
  return out;
}

BinaryMask crop_center(const BinaryMask& mask, int out_h, int out_w) {
  if (out_h > mask.height() || out_w > mask.width())
    throw data_error("center crop larger than source mask");
  const int y0 = (mask.height() - out_h) / 2;
  const int x0 = (mask.width() - out_w) / 2;
  BinaryMask out;
  out.image_id = mask.image_id;
  out.bits = mask.bits.block(y0, x0, out_h, out_w);
  return out;
}

}  // namespace bacdet
