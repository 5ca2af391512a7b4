#pragma once

#include "bacdet/types.hpp"

#include <string>
#include <vector>

namespace bacdet {

enum class TilePolicy {
  crop,  // discard right/bottom remainder (default)
  pad    // zero-pad to the next multiple of patch_size
};

/// Deterministic mapping between an image and its patch_size x patch_size
/// tiles. Patch (r, c) has pixel origin (r*patch_size, c*patch_size).
struct PatchGrid {
  std::string image_id;
  int patch_size = 256;
  int rows = 0;
  int cols = 0;
  TilePolicy policy = TilePolicy::crop;

  int patch_count() const { return rows * cols; }
};

struct Patch {
  std::array<BytePlane, 3> pixels;  // exactly patch_size x patch_size
  int row = 0;
  int col = 0;
  std::string image_id;
};

struct MaskPatch {
  BytePlane bits;
  int row = 0;
  int col = 0;
};

PatchGrid make_grid(int height, int width, int patch_size, TilePolicy policy,
                    const std::string& image_id = "");

/// Row-major decomposition into patches. Under crop policy, residual
/// right/bottom margins are discarded and the image must cover at least one
/// patch; under pad policy the image is zero-padded to the next multiple.
std::vector<Patch> tile(const Image& image, int patch_size = 256,
                        TilePolicy policy = TilePolicy::crop);

std::vector<MaskPatch> tile_mask(const BinaryMask& mask, int patch_size = 256,
                                 TilePolicy policy = TilePolicy::crop);

/// Reassembles exactly one mask per grid cell into a (rows*ps) x (cols*ps)
/// mask. Input order is irrelevant; missing, duplicate or mis-sized cells are
/// errors.
BinaryMask stitch(const std::vector<MaskPatch>& patch_masks, const PatchGrid& grid);

/// Stable dump name for a patch: `<image_id>_r<r>_c<c>`.
std::string patch_name(const std::string& image_id, int row, int col);

/// Bilinear resize for images (used when a dataset needs a fixed working
/// resolution before tiling).
Image resize_bilinear(const Image& image, int out_h, int out_w);

/// Nearest-neighbor resize for masks.
BinaryMask resize_nearest(const BinaryMask& mask, int out_h, int out_w);

/// Center-crop alternative to resizing (kept for datasets where the intended
/// reduction is unknown).
Image crop_center(const Image& image, int out_h, int out_w);
BinaryMask crop_center(const BinaryMask& mask, int out_h, int out_w);

}  // namespace bacdet
