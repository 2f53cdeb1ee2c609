#include <fstream>

#include "doctest.h"
#include "gesturegan/image.hpp"
#include "test_support.hpp"

using namespace gesturegan;
using testing::TempDir;

namespace {

Image8 random_image(int w, int h, int c, Rng& rng) {
  Image8 im(w, h, c);
  for (auto& p : im.pixels) p = static_cast<std::uint8_t>(rng.uniform_index(256));
  return im;
}

}  // namespace

TEST_CASE("png round-trip for gray and rgb") {
  TempDir dir("png");
  Rng rng(1);
  for (int c : {1, 3}) {
    const Image8 im = random_image(13, 7, c, rng);
    const auto path = dir / ("im" + std::to_string(c) + ".png");
    write_png(path, im);
    CHECK(read_png(path) == im);
  }
  CHECK_THROWS_AS(read_png(dir / "none.png"), ImageError);
  std::ofstream(dir / "junk.png") << "not a png";
  CHECK_THROWS_AS(read_png(dir / "junk.png"), ImageError);
}

TEST_CASE("tensor conversion round-trips 8-bit values") {
  Rng rng(2);
  const Image8 im = random_image(8, 8, 3, rng);
  const nn::Tensor t = image_to_tensor(im);
  for (float v : t.values()) {
    CHECK(v >= -1.0f);
    CHECK(v <= 1.0f);
  }
  CHECK(tensor_to_image(t) == im);
}

TEST_CASE("area resize") {
  Image8 im(4, 2, 1);
  im.pixels = {0, 10, 20, 30, 40, 50, 60, 70};
  const Image8 half = resize_area(im, 2, 1);
  CHECK(half.pixels == std::vector<std::uint8_t>{25, 45});
  CHECK(resize_area(im, 4, 2) == im);
  const Image8 up = resize_area(im, 8, 4);
  CHECK(up.at(0, 0, 0) == 0);
  CHECK(up.at(1, 1, 0) == 0);
  CHECK(up.at(7, 3, 0) == 70);
}

TEST_CASE("mirror is an involution and side_by_side concatenates") {
  Rng rng(3);
  const Image8 im = random_image(5, 4, 3, rng);
  CHECK(mirror_horizontal(mirror_horizontal(im)) == im);
  CHECK(mirror_horizontal(im).at(0, 2, 1) == im.at(4, 2, 1));
  const Image8 gray = random_image(3, 4, 1, rng);
  const Image8 both = side_by_side({im, gray});
  CHECK(both.width == 8);
  CHECK(both.at(6, 1, 2) == gray.at(1, 1, 0));
}

TEST_CASE("map export rounds 255 * value") {
  ConditioningMap m;
  m.width = 2;
  m.height = 1;
  m.pixels = {0.5f, 1.0f};
  const Image8 im = map_to_image(m);
  CHECK(im.channels == 1);
  CHECK(im.pixels == std::vector<std::uint8_t>{128, 255});
}
