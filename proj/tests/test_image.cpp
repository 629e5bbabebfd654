#include "doctest.h"

#include "curvekit/image.hpp"

using namespace curvekit;

TEST_CASE("image layout is planar") {
  Image img(2, 3, ColorSpace::RGB);
  img.at(1, 1, 2) = 0.5;
  CHECK(img.data()[1 * 6 + 1 * 3 + 2] == 0.5);
  CHECK(img.pixel(5) == Pixel{0.0, 0.5, 0.0});
  img.set_pixel(0, {0.1, 0.2, 0.3});
  CHECK(img.plane(2)[0] == 0.3);
}

TEST_CASE("image constructor rejects bad data size") {
  CHECK_THROWS_AS(Image(2, 2, ColorSpace::RGB, std::vector<double>(5)), DimensionMismatchError);
}

TEST_CASE("space names round trip") {
  for (ColorSpace s : {ColorSpace::RGB, ColorSpace::HSV, ColorSpace::LAB})
    CHECK(color_space_from_string(to_string(s)) == s);
  CHECK(color_space_from_string("lab") == ColorSpace::LAB);
  CHECK_THROWS_AS(color_space_from_string("xyz"), ConfigError);
}

TEST_CASE("shape and space checks") {
  Image a(2, 2, ColorSpace::RGB), b(2, 3, ColorSpace::RGB), h(2, 2, ColorSpace::HSV);
  CHECK_THROWS_AS(require_same_shape(a, b, "t"), DimensionMismatchError);
  CHECK_THROWS_AS(require_space(h, ColorSpace::RGB, "t"), SpaceMismatchError);
  CHECK_NOTHROW(require_space(a, ColorSpace::RGB, "t"));
  Image c(2, 2, ColorSpace::RGB, 0.25);
  CHECK(max_abs_diff(a, c) == 0.25);
}
