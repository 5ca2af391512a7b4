#include "bacdet/otsu.hpp"

#include "doctest.h"

#include <random>

using namespace bacdet;

namespace {

/// Exhaustive reference: evaluate sigma_b^2 at every split and take the
/// lowest argmax.
int brute_force_otsu(const Histogram256& hist) {
  std::int64_t total = 0;
  for (auto v : hist) total += v;
  double best = -1.0;
  int best_t = 0;
  for (int t = 0; t < 255; ++t) {
    std::int64_t w0 = 0;
    double sum0 = 0.0, sum_all = 0.0;
    for (int i = 0; i <= t; ++i) {
      w0 += hist[static_cast<size_t>(i)];
      sum0 += static_cast<double>(i) * hist[static_cast<size_t>(i)];
    }
    for (int i = 0; i < 256; ++i) sum_all += static_cast<double>(i) * hist[static_cast<size_t>(i)];
    const std::int64_t w1 = total - w0;
    if (w0 == 0 || w1 == 0) continue;
    const double mu0 = sum0 / static_cast<double>(w0);
    const double mu1 = (sum_all - sum0) / static_cast<double>(w1);
    const double v = static_cast<double>(w0) * static_cast<double>(w1) * (mu0 - mu1) * (mu0 - mu1);
    if (v > best) {
      best = v;
      best_t = t;
    }
  }
  return best_t;
}

}  // namespace

TEST_CASE("otsu threshold equals the exhaustive argmax") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    Histogram256 hist{};
    const int occupied = 2 + static_cast<int>(rng() % 40);
    for (int k = 0; k < occupied; ++k)
      hist[rng() % 256] += static_cast<std::int64_t>(rng() % 1000 + 1);
    auto got = otsu_threshold(hist);
    CHECK_FALSE(got.degenerate);
    CHECK(got.threshold == brute_force_otsu(hist));
  }
}

TEST_CASE("bimodal histogram splits between the modes") {
  Histogram256 hist{};
  hist[40] = 1000;
  hist[200] = 1000;
  auto t = otsu_threshold(hist);
  CHECK(t.threshold >= 40);
  CHECK(t.threshold < 200);
  CHECK(t.threshold == brute_force_otsu(hist));
}

TEST_CASE("ties resolve to the lower threshold") {
  // two point masses: every t in [40,199] separates them identically
  Histogram256 hist{};
  hist[40] = 7;
  hist[200] = 7;
  CHECK(otsu_threshold(hist).threshold == 40);
}

TEST_CASE("degenerate and empty histograms") {
  Histogram256 hist{};
  hist[123] = 50;
  auto t = otsu_threshold(hist);
  CHECK(t.degenerate);
  CHECK(t.threshold == 123);

  Histogram256 empty{};
  CHECK_THROWS_AS(otsu_threshold(empty), data_error);
}

TEST_CASE("channel projections") {
  Image img;
  for (auto& c : img.channels) c = BytePlane::Zero(1, 3);
  img.channels[0](0, 0) = 255;  // pure red
  img.channels[1](0, 1) = 255;  // pure green
  img.channels[0](0, 2) = 100;
  img.channels[1](0, 2) = 100;
  img.channels[2](0, 2) = 100;

  BytePlane gray = project_channel(img, OtsuChannel::grayscale);
  CHECK(gray(0, 0) == 76);   // 0.299 * 255 rounded
  CHECK(gray(0, 1) == 150);  // 0.587 * 255 rounded
  CHECK(gray(0, 2) == 100);

  BytePlane rg = project_channel(img, OtsuChannel::red_minus_green);
  CHECK(rg(0, 0) == 255);  // +255 -> top of range
  CHECK(rg(0, 1) == 0);    // -255 -> bottom
  CHECK(rg(0, 2) == 127);  // 0 -> midpoint
}

TEST_CASE("otsu_segment separates a clean two-level image") {
  Image img;
  for (auto& c : img.channels) c = BytePlane::Constant(16, 16, 30);
  for (auto& c : img.channels) c.block(4, 4, 4, 4).setConstant(220);

  OtsuConfig cfg;
  BinaryMask m = otsu_segment(img, cfg);
  CHECK(m.count_ones() == 16);
  CHECK(m.bits(5, 5) == 1);
  CHECK(m.bits(0, 0) == 0);

  cfg.invert = true;
  BinaryMask inv = otsu_segment(img, cfg);
  CHECK(inv.count_ones() == 256 - 16);
}

TEST_CASE("morphological open removes specks but keeps solid blocks") {
  BinaryMask m;
  m.bits = BytePlane::Zero(20, 20);
  m.bits.block(5, 5, 6, 6).setConstant(1);
  m.bits(15, 15) = 1;  // isolated speck

  BinaryMask opened = morph_open(m, 1);
  CHECK(opened.bits(15, 15) == 0);
  CHECK((opened.bits.block(5, 5, 6, 6) == 1).all());
  CHECK(opened.count_ones() == 36);
}

TEST_CASE("morphological close fills pinholes") {
  BinaryMask m;
  m.bits = BytePlane::Zero(20, 20);
  m.bits.block(5, 5, 6, 6).setConstant(1);
  m.bits(7, 7) = 0;  // pinhole

  BinaryMask closed = morph_close(m, 1);
  CHECK(closed.bits(7, 7) == 1);
  CHECK(closed.bits(0, 0) == 0);
  CHECK(closed.count_ones() == 36);
}

TEST_CASE("baseline presets") {
  OtsuConfig gray = otsu_preset("otsu:gray");
  CHECK(gray.channel == OtsuChannel::grayscale);
  CHECK(gray.invert);
  CHECK(gray.open_radius == 1);

  OtsuConfig rg = otsu_preset("otsu:rg");
  CHECK(rg.channel == OtsuChannel::red_minus_green);
  CHECK_FALSE(rg.invert);
  CHECK(rg.close_radius == 1);

  CHECK_THROWS_AS(otsu_preset("otsu:blue"), config_error);
}
