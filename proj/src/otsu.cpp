#include "bacdet/otsu.hpp"

#include <algorithm>
#include <cmath>

namespace bacdet {

OtsuThreshold otsu_threshold(const Histogram256& histogram) {
  std::int64_t total = 0;
  int occupied = 0, only_bin = 0;
  double weighted_total = 0.0;
  for (int i = 0; i < 256; ++i) {
    total += histogram[static_cast<size_t>(i)];
    if (histogram[static_cast<size_t>(i)] > 0) {
      ++occupied;
      only_bin = i;
    }
    weighted_total += static_cast<double>(i) * histogram[static_cast<size_t>(i)];
  }
  if (total <= 0) throw data_error("empty histogram");
  if (occupied == 1) return {only_bin, true};

  // Between-class variance sigma_b^2(t) = w0*w1*(mu0-mu1)^2 over the split
  // [0..t] | [t+1..255]; strict '>' keeps the lowest maximizing threshold.
  std::int64_t w0 = 0;
  double sum0 = 0.0;
  double best = -1.0;
  int best_t = 0;
  for (int t = 0; t < 255; ++t) {
    w0 += histogram[static_cast<size_t>(t)];
    sum0 += static_cast<double>(t) * histogram[static_cast<size_t>(t)];
    const std::int64_t w1 = total - w0;
    if (w0 == 0 || w1 == 0) continue;
    const double mu0 = sum0 / w0;
    const double mu1 = (weighted_total - sum0) / w1;
    const double var_between =
        static_cast<double>(w0) * static_cast<double>(w1) * (mu0 - mu1) * (mu0 - mu1);
    if (var_between > best) {
      best = var_between;
      best_t = t;
    }
  }
  return {best_t, false};
}

BytePlane project_channel(const Image& image, OtsuChannel channel) {
  const int h = image.height(), w = image.width();
  BytePlane out(h, w);
  const auto& r = image.channels[0];
  const auto& g = image.channels[1];
  const auto& b = image.channels[2];
  if (channel == OtsuChannel::grayscale) {
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        out(y, x) = static_cast<std::uint8_t>(
            (299 * r(y, x) + 587 * g(y, x) + 114 * b(y, x) + 500) / 1000);
  } else {
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const int diff = static_cast<int>(r(y, x)) - static_cast<int>(g(y, x));  // [-255,255]
        out(y, x) = static_cast<std::uint8_t>((diff + 255) / 2);
      }
  }
  return out;
}

namespace {

BinaryMask dilate(const BinaryMask& mask, int radius) {
  const int h = mask.height(), w = mask.width();
  BinaryMask out;
  out.image_id = mask.image_id;
  out.bits = BytePlane::Zero(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (mask.bits(y, x) == 0) continue;
      const int y0 = std::max(0, y - radius), y1 = std::min(h - 1, y + radius);
      const int x0 = std::max(0, x - radius), x1 = std::min(w - 1, x + radius);
      out.bits.block(y0, x0, y1 - y0 + 1, x1 - x0 + 1).setConstant(1);
    }
  return out;
}

BinaryMask erode(const BinaryMask& mask, int radius) {
  const int h = mask.height(), w = mask.width();
  BinaryMask out;
  out.image_id = mask.image_id;
  out.bits = BytePlane::Zero(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int y0 = std::max(0, y - radius), y1 = std::min(h - 1, y + radius);
      const int x0 = std::max(0, x - radius), x1 = std::min(w - 1, x + radius);
      out.bits(y, x) =
          (mask.bits.block(y0, x0, y1 - y0 + 1, x1 - x0 + 1) != 0).all() ? 1 : 0;
    }
  return out;
}

}  // namespace

BinaryMask morph_open(const BinaryMask& mask, int radius) {
  if (radius <= 0) return mask;
  return dilate(erode(mask, radius), radius);
}

BinaryMask morph_close(const BinaryMask& mask, int radius) {
  if (radius <= 0) return mask;
  return erode(dilate(mask, radius), radius);
}

BinaryMask otsu_segment(const Image& image, const OtsuConfig& config) {
  const BytePlane proj = project_channel(image, config.channel);
  Histogram256 hist{};
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x) ++hist[proj(y, x)];

  const OtsuThreshold t = otsu_threshold(hist);
  BinaryMask mask;
  mask.image_id = image.id;
  mask.bits = (proj > static_cast<std::uint8_t>(t.threshold)).cast<std::uint8_t>();
  if (config.invert) mask.bits = std::uint8_t{1} - mask.bits;
  if (config.open_radius > 0) mask = morph_open(mask, config.open_radius);
  if (config.close_radius > 0) mask = morph_close(mask, config.close_radius);
  return mask;
}

OtsuConfig otsu_preset(const std::string& name) {
  if (name == "otsu:gray") {
    // Stained rods are darker than the counterstained background in luma.
    OtsuConfig c;
    c.channel = OtsuChannel::grayscale;
    c.invert = true;
    c.open_radius = 1;
    return c;
  }
  if (name == "otsu:rg") {
    OtsuConfig c;
    c.channel = OtsuChannel::red_minus_green;
    c.invert = false;
    c.close_radius = 1;
    return c;
  }
  throw config_error("unknown segmenter preset '" + name + "' (expected otsu:gray or otsu:rg)");
}

}  // namespace bacdet
