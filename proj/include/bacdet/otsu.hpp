#pragma once

#include "bacdet/types.hpp"

#include <array>
#include <cstdint>
#include <string>

namespace bacdet {

enum class OtsuChannel { grayscale, red_minus_green };

struct OtsuConfig {
  OtsuChannel channel = OtsuChannel::grayscale;
  bool invert = false;           // flip bits so bacilli-colored pixels map to 1
  int open_radius = 0;           // morphological open (erode+dilate), square SE
  int close_radius = 0;          // morphological close (dilate+erode)
};

struct OtsuThreshold {
  int threshold = 0;   // split point: bins [0..t] vs [t+1..255]
  bool degenerate = false;  // histogram had a single occupied bin
};

using Histogram256 = std::array<std::int64_t, 256>;

/// Threshold maximizing between-class variance; ties break toward the lower
/// threshold. A single-occupied-bin histogram is degenerate and returns that
/// bin.
OtsuThreshold otsu_threshold(const Histogram256& histogram);

/// Channel projection used by the baselines: grayscale is Rec.601 luma,
/// red_minus_green maps R-G from [-255,255] onto [0,255].
BytePlane project_channel(const Image& image, OtsuChannel channel);

/// Global Otsu binarization of the projected channel (pixel > threshold -> 1),
/// optional inversion, then optional morphological open/close.
BinaryMask otsu_segment(const Image& image, const OtsuConfig& config);

/// Named baseline presets selectable as `otsu:gray` / `otsu:rg`. These stand
/// in for previously published Otsu variants whose exact preprocessing is not
/// fully specified; they are meant for directional comparison only.
OtsuConfig otsu_preset(const std::string& name);

BinaryMask morph_open(const BinaryMask& mask, int radius);
BinaryMask morph_close(const BinaryMask& mask, int radius);

}  // namespace bacdet
