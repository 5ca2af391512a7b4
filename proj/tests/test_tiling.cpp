#include "bacdet/tiling.hpp"

#include "doctest.h"

#include <random>

using namespace bacdet;

namespace {

Image solid_image(int h, int w, std::uint8_t v = 0) {
  Image img;
  for (auto& c : img.channels) c = BytePlane::Constant(h, w, v);
  img.id = "img";
  return img;
}

BinaryMask random_mask(int h, int w, std::mt19937_64& rng) {
  BinaryMask m;
  m.bits.resize(h, w);
  std::bernoulli_distribution bit(0.3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) m.bits(y, x) = bit(rng) ? 1 : 0;
  m.image_id = "m";
  return m;
}

}  // namespace

TEST_CASE("grid dimensions under crop and pad") {
  auto g = make_grid(2816, 2048, 256, TilePolicy::crop);
  CHECK(g.rows == 11);
  CHECK(g.cols == 8);
  CHECK(g.patch_count() == 88);

  g = make_grid(300, 500, 256, TilePolicy::crop);
  CHECK(g.rows == 1);
  CHECK(g.cols == 1);

  g = make_grid(300, 500, 256, TilePolicy::pad);
  CHECK(g.rows == 2);
  CHECK(g.cols == 2);

  CHECK_THROWS_AS(make_grid(100, 500, 256, TilePolicy::crop), data_error);
  CHECK_THROWS_AS(make_grid(0, 0, 256, TilePolicy::pad), data_error);
}

TEST_CASE("tile yields patch_size squares with correct content") {
  Image img = solid_image(520, 300);
  for (int y = 0; y < 520; ++y)
    for (int x = 0; x < 300; ++x)
      img.channels[0](y, x) = static_cast<std::uint8_t>((y * 7 + x * 13) % 251);

  auto patches = tile(img, 256, TilePolicy::crop);
  REQUIRE(patches.size() == 2);
  for (const auto& p : patches) {
    CHECK(p.pixels[0].rows() == 256);
    CHECK(p.pixels[0].cols() == 256);
    CHECK(p.col == 0);
    for (int y = 0; y < 256; y += 37)
      for (int x = 0; x < 256; x += 41)
        CHECK(p.pixels[0](y, x) == img.channels[0](p.row * 256 + y, x));
  }
}

TEST_CASE("pad policy zero-fills the margin") {
  Image img = solid_image(40, 30, 200);
  auto patches = tile(img, 32, TilePolicy::pad);
  REQUIRE(patches.size() == 2);
  const auto& last = patches.back();
  CHECK(last.row == 1);
  CHECK(last.pixels[0](0, 0) == 200);
  CHECK(last.pixels[0](20, 0) == 0);   // below source bottom
  CHECK(last.pixels[0](0, 30) == 0);   // right of source edge
}

TEST_CASE("stitch(tile(M)) equals crop-to-multiple of M") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 8; ++trial) {
    const int h = 257 + static_cast<int>(rng() % 300);
    const int w = 256 + static_cast<int>(rng() % 300);
    BinaryMask m = random_mask(h, w, rng);
    auto grid = make_grid(h, w, 128, TilePolicy::crop, "m");
    auto parts = tile_mask(m, 128, TilePolicy::crop);
    BinaryMask back = stitch(parts, grid);
    CHECK((back.bits == m.bits.topLeftCorner(grid.rows * 128, grid.cols * 128)).all());
  }
}

TEST_CASE("stitch validates the patch set") {
  std::mt19937_64 rng(3);
  BinaryMask m = random_mask(256, 256, rng);
  auto grid = make_grid(256, 256, 128, TilePolicy::crop, "m");
  auto parts = tile_mask(m, 128, TilePolicy::crop);
  REQUIRE(parts.size() == 4);

  auto missing = parts;
  missing.pop_back();
  CHECK_THROWS_AS(stitch(missing, grid), data_error);

  auto duplicated = parts;
  duplicated[0] = duplicated[1];
  CHECK_THROWS_AS(stitch(duplicated, grid), data_error);

  auto misshapen = parts;
  misshapen[2].bits.resize(64, 128);
  CHECK_THROWS_AS(stitch(misshapen, grid), data_error);
}

TEST_CASE("patch names are stable") {
  CHECK(patch_name("slide3", 2, 11) == "slide3_r2_c11");
}

TEST_CASE("bilinear resize preserves constant images and endpoints") {
  Image img = solid_image(31, 17, 99);
  Image out = resize_bilinear(img, 64, 64);
  CHECK(out.height() == 64);
  CHECK((out.channels[1] == 99).all());

  Image grad = solid_image(2, 2);
  grad.channels[0] << 0, 100, 0, 100;
  Image up = resize_bilinear(grad, 2, 3);
  CHECK(up.channels[0](0, 0) == 0);
  CHECK(up.channels[0](0, 2) == 100);
  CHECK(up.channels[0](0, 1) == 50);
}

TEST_CASE("nearest resize keeps masks binary") {
  std::mt19937_64 rng(11);
  BinaryMask m = random_mask(33, 57, rng);
  BinaryMask out = resize_nearest(m, 80, 80);
  CHECK(out.height() == 80);
  CHECK((out.bits == 0 || out.bits == 1).all());
}

TEST_CASE("center crop takes the middle block") {
  Image img = solid_image(10, 10);
  for (int y = 0; y < 10; ++y)
    for (int x = 0; x < 10; ++x) img.channels[2](y, x) = static_cast<std::uint8_t>(10 * y + x);
  Image c = crop_center(img, 4, 6);
  CHECK(c.channels[2](0, 0) == 32);  // origin (3, 2)
  CHECK(c.channels[2](3, 5) == 67);
}
