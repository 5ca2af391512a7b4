#include "bacdet/image_io.hpp"

#include "doctest.h"
#include "temp_dir.hpp"

#include <random>

using namespace bacdet;

namespace {

Image random_image(int h, int w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Image img;
  for (auto& c : img.channels) {
    c.resize(h, w);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) c(y, x) = static_cast<std::uint8_t>(rng() & 0xff);
  }
  img.id = "rand";
  return img;
}

}  // namespace

TEST_CASE("png image round trip is lossless") {
  testutil::ScopedTempDir tmp("imageio");
  Image img = random_image(37, 53, 1);
  const auto path = tmp.path() / "img.png";
  save_image_png(img, path);
  Image back = load_image(path, "back");
  CHECK(back.id == "back");
  CHECK(back.height() == 37);
  CHECK(back.width() == 53);
  for (int c = 0; c < 3; ++c) CHECK((back.channels[c] == img.channels[c]).all());
}

TEST_CASE("default image id is the file stem") {
  testutil::ScopedTempDir tmp("imageio");
  Image img = random_image(8, 8, 2);
  save_image_png(img, tmp.path() / "slide_07.png");
  CHECK(load_image(tmp.path() / "slide_07.png").id == "slide_07");
}

TEST_CASE("mask round trip and >127 binarization rule") {
  testutil::ScopedTempDir tmp("imageio");
  BinaryMask m;
  m.bits.resize(9, 9);
  m.bits.setZero();
  m.bits(2, 3) = 1;
  m.bits(8, 8) = 1;
  const auto path = tmp.path() / "mask.png";
  save_mask_png(m, path);
  BinaryMask back = load_mask(path, 9, 9, "m");
  CHECK((back.bits == m.bits).all());

  // gray PNG written as an image: channel value decides the bit
  Image gray = random_image(4, 4, 3);
  for (auto& c : gray.channels) {
    c.setConstant(127);
    c(0, 0) = 128;
  }
  save_image_png(gray, tmp.path() / "gray.png");
  BinaryMask g = load_mask(tmp.path() / "gray.png", 4, 4, "g");
  CHECK(g.bits(0, 0) == 1);
  CHECK(g.bits(1, 1) == 0);
  CHECK(g.count_ones() == 1);
}

TEST_CASE("mask loader enforces expected dimensions") {
  testutil::ScopedTempDir tmp("imageio");
  BinaryMask m;
  m.bits = BytePlane::Zero(6, 6);
  save_mask_png(m, tmp.path() / "m.png");
  CHECK_THROWS_AS(load_mask(tmp.path() / "m.png", 7, 6, "m"), data_error);
  CHECK(load_mask_any_size(tmp.path() / "m.png", "m").height() == 6);
}

TEST_CASE("missing files raise io_error") {
  CHECK_THROWS_AS(load_image("/nonexistent/file.png"), io_error);
  CHECK_THROWS_AS(load_mask("/nonexistent/file.png", 4, 4), io_error);
}

TEST_CASE("jpeg save produces a loadable image of the same size") {
  testutil::ScopedTempDir tmp("imageio");
  Image img = random_image(33, 21, 4);
  save_image_jpeg(img, tmp.path() / "img.jpg", 90);
  Image back = load_image(tmp.path() / "img.jpg");
  CHECK(back.height() == 33);
  CHECK(back.width() == 21);
}
