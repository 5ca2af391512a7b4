#pragma once

#include "bacdet/manifest.hpp"
#include "bacdet/types.hpp"

#include "json.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace bacdet {

template <typename T>
struct ValueRange {
  T lo{};
  T hi{};
  bool empty() const { return hi < lo; }
};

/// Stain-smear-style scene: curved magenta-ish rods over a blue/cyan-ish
/// background, plus distractors (debris blobs, streaks, sub-filter specks)
/// drawn in background-adjacent hues and excluded from the truth mask.
struct SynthConfig {
  int width = 256;
  int height = 256;
  ValueRange<int> n_rods{6, 12};
  ValueRange<double> rod_length{15.0, 60.0};
  ValueRange<double> rod_width{4.0, 8.0};
  double rod_curvature = 0.25;  // max bend as a fraction of rod length
  ValueRange<double> rod_hue{300.0, 340.0};        // degrees, magenta window
  ValueRange<double> background_hue{180.0, 220.0}; // degrees, blue/cyan window
  ValueRange<int> n_distractors{5, 15};
  double noise_sigma = 4.0;
  std::uint64_t seed = 0;
  bool allow_overlap = false;

  void validate() const;
  nlohmann::json to_json() const;
  static SynthConfig from_json(const nlohmann::json& j);
};

/// Constant-width stroke along a quadratic Bezier arc. The footprint is
/// defined as every pixel whose center lies within half_width of the arc's
/// deterministic polyline; the renderer and the mask-exactness oracle share
/// this definition.
struct RodGeometry {
  std::array<double, 2> p0{}, p1{}, p2{};  // control points (x, y)
  double half_width = 0.0;

  std::vector<std::array<double, 2>> polyline() const;
  double distance(double x, double y) const;
  bool contains(double x, double y) const { return distance(x, y) <= half_width; }
};

struct SynthResult {
  Image image;
  BinaryMask mask;
  std::vector<LabeledRegion> regions;  // per-rod positives then negatives
  std::vector<RodGeometry> rods;
};

SynthResult generate(const SynthConfig& config, const std::string& image_id = "synth");

/// Writes images/, masks/ and manifest.tsv under out_dir; the last
/// floor(n/5) images form the test split. Per-image seeds are derived from
/// config.seed + index, so corpora are reproducible and images independent.
DatasetManifest generate_corpus(const SynthConfig& config, int n_images,
                                const std::filesystem::path& out_dir,
                                std::vector<std::string>* warnings = nullptr);

}  // namespace bacdet
