#pragma once

#include "bacdet/types.hpp"

#include <filesystem>

namespace bacdet {

/// Loads an 8-bit RGB raster (PNG, JPEG or baseline TIFF; sniffed by magic
/// bytes). Grayscale and paletted inputs are expanded to RGB; 16-bit rasters
/// are rejected. `id` defaults to the file stem.
Image load_image(const std::filesystem::path& path, std::string id = "");

/// Loads a ground-truth/prediction mask: first channel > 127 maps to 1.
/// Dimensions must equal (expected_h, expected_w).
BinaryMask load_mask(const std::filesystem::path& path, int expected_h, int expected_w,
                     std::string image_id = "");

/// Loads a mask without a dimension check (dims taken from the file).
BinaryMask load_mask_any_size(const std::filesystem::path& path, std::string image_id = "");

void save_image_png(const Image& image, const std::filesystem::path& path);

/// Masks are stored as 8-bit grayscale PNG, bit 1 -> 255. Round-trips
/// bit-exactly through load_mask.
void save_mask_png(const BinaryMask& mask, const std::filesystem::path& path);

void save_image_jpeg(const Image& image, const std::filesystem::path& path, int quality = 95);

}  // namespace bacdet
