#include "bacdet/synthgen.hpp"

#include "bacdet/image_io.hpp"
#include "bacdet/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>

namespace bacdet {

void SynthConfig::validate() const {
  if (width < 32 || height < 32) throw config_error("synth images must be at least 32x32");
  if (n_rods.empty() || n_rods.lo < 0) throw config_error("invalid n_rods range");
  if (rod_length.empty() || rod_length.lo <= 0) throw config_error("invalid rod_length range");
  if (rod_width.empty() || rod_width.lo < 1.0) throw config_error("invalid rod_width range");
  if (rod_curvature < 0.0 || rod_curvature > 0.5)
    throw config_error("rod_curvature must lie in [0, 0.5]");
  if (n_distractors.empty() || n_distractors.lo < 0)
    throw config_error("invalid n_distractors range");
  if (noise_sigma < 0.0) throw config_error("noise_sigma must be >= 0");
  if (rod_hue.empty() || background_hue.empty())
    throw config_error("hue windows must be non-empty");
  if (std::max(rod_hue.lo, background_hue.lo) <= std::min(rod_hue.hi, background_hue.hi))
    throw config_error("rod and background hue windows must be disjoint");
}

nlohmann::json SynthConfig::to_json() const {
  return {{"width", width},
          {"height", height},
          {"n_rods", {n_rods.lo, n_rods.hi}},
          {"rod_length", {rod_length.lo, rod_length.hi}},
          {"rod_width", {rod_width.lo, rod_width.hi}},
          {"rod_curvature", rod_curvature},
          {"rod_hue", {rod_hue.lo, rod_hue.hi}},
          {"background_hue", {background_hue.lo, background_hue.hi}},
          {"n_distractors", {n_distractors.lo, n_distractors.hi}},
          {"noise_sigma", noise_sigma},
          {"seed", seed},
          {"allow_overlap", allow_overlap}};
}

SynthConfig SynthConfig::from_json(const nlohmann::json& j) {
  SynthConfig c;
  c.width = j.at("width").get<int>();
  c.height = j.at("height").get<int>();
  c.n_rods = {j.at("n_rods")[0].get<int>(), j.at("n_rods")[1].get<int>()};
  c.rod_length = {j.at("rod_length")[0].get<double>(), j.at("rod_length")[1].get<double>()};
  c.rod_width = {j.at("rod_width")[0].get<double>(), j.at("rod_width")[1].get<double>()};
  c.rod_curvature = j.at("rod_curvature").get<double>();
  c.rod_hue = {j.at("rod_hue")[0].get<double>(), j.at("rod_hue")[1].get<double>()};
  c.background_hue = {j.at("background_hue")[0].get<double>(),
                      j.at("background_hue")[1].get<double>()};
  c.n_distractors = {j.at("n_distractors")[0].get<int>(), j.at("n_distractors")[1].get<int>()};
  c.noise_sigma = j.at("noise_sigma").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.allow_overlap = j.at("allow_overlap").get<bool>();
  return c;
}

std::vector<std::array<double, 2>> RodGeometry::polyline() const {
  const double approx_len = std::hypot(p1[0] - p0[0], p1[1] - p0[1]) +
                            std::hypot(p2[0] - p1[0], p2[1] - p1[1]);
  const int n = std::max(8, static_cast<int>(std::ceil(approx_len * 2.0)));
  std::vector<std::array<double, 2>> pts(static_cast<std::size_t>(n) + 1);
  for (int i = 0; i <= n; ++i) {
    const double t = static_cast<double>(i) / n;
    const double u = 1.0 - t;
    pts[static_cast<std::size_t>(i)] = {
        u * u * p0[0] + 2.0 * u * t * p1[0] + t * t * p2[0],
        u * u * p0[1] + 2.0 * u * t * p1[1] + t * t * p2[1]};
  }
  return pts;
}

double RodGeometry::distance(double x, double y) const {
  const auto pts = polyline();
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const double ax = pts[i][0], ay = pts[i][1];
    const double bx = pts[i + 1][0], by = pts[i + 1][1];
    const double dx = bx - ax, dy = by - ay;
    const double len2 = dx * dx + dy * dy;
    double t = len2 > 0.0 ? ((x - ax) * dx + (y - ay) * dy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    best = std::min(best, std::hypot(x - (ax + t * dx), y - (ay + t * dy)));
  }
  return best;
}

namespace {

struct Rgb {
  double r, g, b;
};

Rgb hsv_to_rgb(double h, double s, double v) {
  h = std::fmod(h, 360.0);
  if (h < 0.0) h += 360.0;
  const double c = v * s;
  const double hp = h / 60.0;
  const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  if (hp < 1)      { r = c; g = x; }
  else if (hp < 2) { r = x; g = c; }
  else if (hp < 3) { g = c; b = x; }
  else if (hp < 4) { g = x; b = c; }
  else if (hp < 5) { r = x; b = c; }
  else             { r = c; b = x; }
  const double m = v - c;
  return {(r + m) * 255.0, (g + m) * 255.0, (b + m) * 255.0};
}

using Canvas = std::array<Plane<double>, 3>;

double uni(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

int uni_int(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

/// Anti-aliased composite of `inside(x,y)` over the canvas within a bbox;
/// 4x4 subsamples per pixel.
template <typename InsideFn>
void composite_shape(Canvas& canvas, int x0, int y0, int x1, int y1, const Rgb& color,
                     const InsideFn& inside) {
  const int w = static_cast<int>(canvas[0].cols()), h = static_cast<int>(canvas[0].rows());
  x0 = std::max(0, x0);
  y0 = std::max(0, y0);
  x1 = std::min(w - 1, x1);
  y1 = std::min(h - 1, y1);
  static constexpr double kOffsets[4] = {-0.375, -0.125, 0.125, 0.375};
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      int hits = 0;
      for (double oy : kOffsets)
        for (double ox : kOffsets) hits += inside(x + ox, y + oy) ? 1 : 0;
      if (hits == 0) continue;
      const double a = hits / 16.0;
      canvas[0](y, x) = (1.0 - a) * canvas[0](y, x) + a * color.r;
      canvas[1](y, x) = (1.0 - a) * canvas[1](y, x) + a * color.g;
      canvas[2](y, x) = (1.0 - a) * canvas[2](y, x) + a * color.b;
    }
}

struct PlacedRod {
  RodGeometry geom;
  std::vector<std::pair<int, int>> pixels;  // footprint (y, x)
  BBox bbox;                                // tight footprint bounds
};

std::array<BytePlane, 3> crop_channels(const Image& img, const BBox& b) {
  std::array<BytePlane, 3> out;
  for (int c = 0; c < 3; ++c)
    out[static_cast<std::size_t>(c)] = img.channels[static_cast<std::size_t>(c)].block(
        b.y, b.x, b.h, b.w);
  return out;
}

BBox clamp_bbox(int cx, int cy, int bw, int bh, int img_w, int img_h) {
  BBox b;
  b.w = std::min(bw, img_w);
  b.h = std::min(bh, img_h);
  b.x = std::clamp(cx - b.w / 2, 0, img_w - b.w);
  b.y = std::clamp(cy - b.h / 2, 0, img_h - b.h);
  return b;
}

}  // namespace

SynthResult generate(const SynthConfig& config, const std::string& image_id) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  const int w = config.width, h = config.height;

  // Background: base color plus two low-frequency shading waves.
  Canvas canvas;
  for (auto& p : canvas) p.resize(h, w);
  {
    const double hue = uni(rng, config.background_hue.lo, config.background_hue.hi);
    const Rgb base = hsv_to_rgb(hue, uni(rng, 0.25, 0.45), uni(rng, 0.65, 0.85));
    const double fx = uni(rng, 0.5, 1.5) / w, fy = uni(rng, 0.5, 1.5) / h;
    const double ph1 = uni(rng, 0.0, 6.28318), ph2 = uni(rng, 0.0, 6.28318);
    const double amp = uni(rng, 0.02, 0.05);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double shade = 1.0 + amp * std::cos(6.28318 * (fx * x) + ph1) +
                             amp * std::cos(6.28318 * (fy * y) + ph2);
        canvas[0](y, x) = base.r * shade;
        canvas[1](y, x) = base.g * shade;
        canvas[2](y, x) = base.b * shade;
      }
  }

  BinaryMask mask;
  mask.image_id = image_id;
  mask.bits = BytePlane::Zero(h, w);
  BytePlane occupied = BytePlane::Zero(h, w);  // rod footprints dilated by 2

  auto stamp_occupied = [&](int y, int x) {
    for (int dy = -2; dy <= 2; ++dy)
      for (int dx = -2; dx <= 2; ++dx) {
        const int yy = y + dy, xx = x + dx;
        if (yy >= 0 && yy < h && xx >= 0 && xx < w) occupied(yy, xx) = 1;
      }
  };

  // Rods.
  const int n_rods = uni_int(rng, config.n_rods.lo, config.n_rods.hi);
  std::vector<PlacedRod> rods;
  constexpr int kPlacementTries = 200;
  for (int r = 0; r < n_rods; ++r) {
    bool placed = false;
    for (int attempt = 0; attempt < kPlacementTries && !placed; ++attempt) {
      const double len = uni(rng, config.rod_length.lo, config.rod_length.hi);
      const double width = uni(rng, config.rod_width.lo, config.rod_width.hi);
      const double theta = uni(rng, 0.0, 3.14159265358979);
      const double bend = uni(rng, -config.rod_curvature, config.rod_curvature);
      const double margin = len / 2.0 + width + 2.0;
      if (2.0 * margin >= std::min(w, h)) continue;
      const double cx = uni(rng, margin, w - margin);
      const double cy = uni(rng, margin, h - margin);
      const double dx = std::cos(theta), dy = std::sin(theta);

      RodGeometry geom;
      geom.p0 = {cx - dx * len / 2.0, cy - dy * len / 2.0};
      geom.p2 = {cx + dx * len / 2.0, cy + dy * len / 2.0};
      geom.p1 = {cx - dy * bend * len, cy + dx * bend * len};
      geom.half_width = width / 2.0;

      const double lox = std::min({geom.p0[0], geom.p1[0], geom.p2[0]}) - geom.half_width - 1;
      const double hix = std::max({geom.p0[0], geom.p1[0], geom.p2[0]}) + geom.half_width + 1;
      const double loy = std::min({geom.p0[1], geom.p1[1], geom.p2[1]}) - geom.half_width - 1;
      const double hiy = std::max({geom.p0[1], geom.p1[1], geom.p2[1]}) + geom.half_width + 1;

      PlacedRod rod;
      rod.geom = geom;
      bool collides = false;
      int min_x = w, max_x = -1, min_y = h, max_y = -1;
      for (int y = std::max(0, static_cast<int>(std::floor(loy)));
           y <= std::min(h - 1, static_cast<int>(std::ceil(hiy))) && !collides; ++y)
        for (int x = std::max(0, static_cast<int>(std::floor(lox)));
             x <= std::min(w - 1, static_cast<int>(std::ceil(hix))); ++x) {
          if (!geom.contains(x, y)) continue;
          if (!config.allow_overlap && occupied(y, x)) {
            collides = true;
            break;
          }
          rod.pixels.emplace_back(y, x);
          min_x = std::min(min_x, x);
          max_x = std::max(max_x, x);
          min_y = std::min(min_y, y);
          max_y = std::max(max_y, y);
        }
      if (collides || rod.pixels.empty()) continue;
      rod.bbox = {min_x, min_y, max_x - min_x + 1, max_y - min_y + 1};

      for (auto [py, px] : rod.pixels) {
        mask.bits(py, px) = 1;
        stamp_occupied(py, px);
      }
      const Rgb color = hsv_to_rgb(uni(rng, config.rod_hue.lo, config.rod_hue.hi),
                                   uni(rng, 0.6, 0.9), uni(rng, 0.5, 0.75));
      composite_shape(canvas, static_cast<int>(std::floor(lox)),
                      static_cast<int>(std::floor(loy)), static_cast<int>(std::ceil(hix)),
                      static_cast<int>(std::ceil(hiy)), color,
                      [&](double sx, double sy) { return geom.contains(sx, sy); });
      rods.push_back(std::move(rod));
      placed = true;
    }
    if (!placed)
      throw data_error("synth: could not place rod " + std::to_string(r + 1) + " of " +
                       std::to_string(n_rods) + " without overlap (image too crowded)");
  }

  // Distractors: debris blobs, faint streaks, sub-filter specks. They avoid
  // rod territory but may overlap each other; none reach the mask.
  const int n_distractors = uni_int(rng, config.n_distractors.lo, config.n_distractors.hi);
  std::vector<std::pair<int, int>> distractor_centers;
  const double bg_span = config.background_hue.hi - config.background_hue.lo;
  for (int d = 0; d < n_distractors; ++d) {
    const int type = uni_int(rng, 0, 2);
    double hue = uni(rng, config.background_hue.lo - 0.5 * bg_span,
                     config.background_hue.hi + 0.5 * bg_span);
    if (hue >= config.rod_hue.lo && hue <= config.rod_hue.hi)
      hue = 0.5 * (config.background_hue.lo + config.background_hue.hi);

    for (int attempt = 0; attempt < 50; ++attempt) {
      if (type == 0) {  // debris ellipse
        const double a = uni(rng, 4.0, 10.0), b = uni(rng, 3.0, 8.0);
        const double theta = uni(rng, 0.0, 3.14159265358979);
        const double m = std::max(a, b) + 2.0;
        if (2.0 * m >= std::min(w, h)) break;
        const double cx = uni(rng, m, w - m), cy = uni(rng, m, h - m);
        const double ct = std::cos(theta), st = std::sin(theta);
        auto inside = [&](double sx, double sy) {
          const double ux = (sx - cx) * ct + (sy - cy) * st;
          const double uy = -(sx - cx) * st + (sy - cy) * ct;
          return (ux * ux) / (a * a) + (uy * uy) / (b * b) <= 1.0;
        };
        bool clear = true;
        for (int y = static_cast<int>(cy - m); y <= static_cast<int>(cy + m) && clear; ++y)
          for (int x = static_cast<int>(cx - m); x <= static_cast<int>(cx + m); ++x)
            if (inside(x, y) && occupied(y, x)) {
              clear = false;
              break;
            }
        if (!clear) continue;
        const Rgb color = hsv_to_rgb(hue, uni(rng, 0.3, 0.6), uni(rng, 0.45, 0.6));
        composite_shape(canvas, static_cast<int>(cx - m), static_cast<int>(cy - m),
                        static_cast<int>(cx + m), static_cast<int>(cy + m), color, inside);
        distractor_centers.emplace_back(static_cast<int>(cy), static_cast<int>(cx));
      } else if (type == 1) {  // faint streak
        const double len = uni(rng, 30.0, 80.0), width = uni(rng, 1.0, 2.0);
        const double theta = uni(rng, 0.0, 3.14159265358979);
        const double m = len / 2.0 + width + 2.0;
        if (2.0 * m >= std::min(w, h)) break;
        const double cx = uni(rng, m, w - m), cy = uni(rng, m, h - m);
        RodGeometry streak;
        streak.p0 = {cx - std::cos(theta) * len / 2.0, cy - std::sin(theta) * len / 2.0};
        streak.p2 = {cx + std::cos(theta) * len / 2.0, cy + std::sin(theta) * len / 2.0};
        streak.p1 = {cx, cy};
        streak.half_width = width / 2.0;
        bool clear = true;
        for (int y = static_cast<int>(cy - m); y <= static_cast<int>(cy + m) && clear; ++y)
          for (int x = static_cast<int>(cx - m); x <= static_cast<int>(cx + m); ++x)
            if (streak.contains(x, y) && occupied(y, x)) {
              clear = false;
              break;
            }
        if (!clear) continue;
        const Rgb color = hsv_to_rgb(hue, uni(rng, 0.25, 0.5), uni(rng, 0.55, 0.7));
        composite_shape(canvas, static_cast<int>(cx - m), static_cast<int>(cy - m),
                        static_cast<int>(cx + m), static_cast<int>(cy + m), color,
                        [&](double sx, double sy) { return streak.contains(sx, sy); });
        distractor_centers.emplace_back(static_cast<int>(cy), static_cast<int>(cx));
      } else {  // speck, below the default min-area filter
        const double radius = uni(rng, 0.8, 2.0);
        const double m = radius + 2.0;
        const double cx = uni(rng, m, w - m), cy = uni(rng, m, h - m);
        bool clear = true;
        for (int y = static_cast<int>(cy - m); y <= static_cast<int>(cy + m) && clear; ++y)
          for (int x = static_cast<int>(cx - m); x <= static_cast<int>(cx + m); ++x)
            if (std::hypot(x - cx, y - cy) <= radius && occupied(y, x)) {
              clear = false;
              break;
            }
        if (!clear) continue;
        const Rgb color = hsv_to_rgb(hue, uni(rng, 0.4, 0.7), uni(rng, 0.3, 0.5));
        composite_shape(canvas, static_cast<int>(cx - m), static_cast<int>(cy - m),
                        static_cast<int>(cx + m), static_cast<int>(cy + m), color,
                        [&](double sx, double sy) { return std::hypot(sx - cx, sy - cy) <= radius; });
        distractor_centers.emplace_back(static_cast<int>(cy), static_cast<int>(cx));
      }
      break;
    }
  }

  // Sensor noise, then quantization.
  SynthResult result;
  result.image.id = image_id;
  std::normal_distribution<double> noise(0.0, config.noise_sigma);
  for (int c = 0; c < 3; ++c) result.image.channels[static_cast<std::size_t>(c)].resize(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) {
        double v = canvas[static_cast<std::size_t>(c)](y, x);
        if (config.noise_sigma > 0.0) v += noise(rng);
        result.image.channels[static_cast<std::size_t>(c)](y, x) =
            static_cast<std::uint8_t>(std::clamp(std::lround(v), 0l, 255l));
      }

  result.mask = std::move(mask);
  for (const PlacedRod& rod : rods) result.rods.push_back(rod.geom);

  // Labeled regions: one positive per rod, an equal number of negatives.
  int component_id = 0;
  for (const PlacedRod& rod : rods) {
    Roi roi;
    const int pad = 2;
    const int x0 = std::max(0, rod.bbox.x - pad), y0 = std::max(0, rod.bbox.y - pad);
    const int x1 = std::min(w - 1, rod.bbox.x + rod.bbox.w - 1 + pad);
    const int y1 = std::min(h - 1, rod.bbox.y + rod.bbox.h - 1 + pad);
    roi.bbox = {x0, y0, x1 - x0 + 1, y1 - y0 + 1};
    roi.pixels = crop_channels(result.image, roi.bbox);
    roi.component_id = ++component_id;
    roi.source_image_id = image_id;
    roi.area_px = static_cast<std::int64_t>(rod.pixels.size());
    LabeledRegion region;
    region.label = RegionLabel::bacilli;
    region.region_id = roi.region_id();
    region.roi = std::move(roi);
    result.regions.push_back(std::move(region));
  }

  const int n_neg = static_cast<int>(rods.size());
  std::size_t next_center = 0;
  for (int k = 0; k < n_neg; ++k) {
    const PlacedRod& like = rods[static_cast<std::size_t>(uni_int(
        rng, 0, static_cast<int>(rods.size()) - 1))];
    const int bw = std::max(4, like.bbox.w), bh = std::max(4, like.bbox.h);
    BBox box;
    bool found = false;
    // Prefer crops centered on distractors so negatives include confusers.
    while (next_center < distractor_centers.size() && !found) {
      const auto [cy, cx] = distractor_centers[next_center++];
      box = clamp_bbox(cx, cy, bw, bh, w, h);
      found = !(result.mask.bits.block(box.y, box.x, box.h, box.w) != 0).any();
    }
    for (int attempt = 0; attempt < 2000 && !found; ++attempt) {
      box = clamp_bbox(uni_int(rng, 0, w - 1), uni_int(rng, 0, h - 1), bw, bh, w, h);
      found = !(result.mask.bits.block(box.y, box.x, box.h, box.w) != 0).any();
    }
    if (!found)
      throw data_error("synth: could not sample a rod-free negative region for " + image_id);
    Roi roi;
    roi.bbox = box;
    roi.pixels = crop_channels(result.image, box);
    roi.component_id = -(k + 1);  // negatives carry no mask component
    roi.source_image_id = image_id;
    roi.area_px = 0;
    LabeledRegion region;
    region.label = RegionLabel::non_bacilli;
    region.region_id = image_id + "_n" + std::to_string(k);
    region.roi = std::move(roi);
    result.regions.push_back(std::move(region));
  }

  return result;
}

DatasetManifest generate_corpus(const SynthConfig& config, int n_images,
                                const std::filesystem::path& out_dir,
                                std::vector<std::string>* warnings) {
  if (n_images < 1) throw config_error("generate_corpus needs n_images >= 1");
  config.validate();
  std::filesystem::create_directories(out_dir / "images");
  std::filesystem::create_directories(out_dir / "masks");

  const int n_test = n_images / 5;
  if (n_test == 0 && warnings)
    warnings->push_back("corpus has no test split (need at least 5 images)");

  DatasetManifest manifest;
  manifest.dataset_name = "manifest";
  for (int i = 0; i < n_images; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "synth_%04d", i);
    SynthConfig per_image = config;
    per_image.seed = derive_seed(config.seed, static_cast<std::uint64_t>(i), 0x51u);
    SynthResult sample = generate(per_image, id);

    ManifestEntry e;
    e.image_id = id;
    e.image_path = out_dir / "images" / (std::string(id) + ".png");
    e.mask_path = out_dir / "masks" / (std::string(id) + ".png");
    e.split = i < n_images - n_test ? Split::train : Split::test;
    save_image_png(sample.image, e.image_path);
    save_mask_png(sample.mask, e.mask_path);
    manifest.entries.push_back(std::move(e));
  }
  save_manifest(manifest, out_dir / "manifest.tsv");
  return manifest;
}

}  // namespace bacdet
