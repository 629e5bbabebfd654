#pragma once

#include <random>
#include <string>

#include "curvekit/curve.hpp"
#include "curvekit/image.hpp"
#include "curvekit/io.hpp"

namespace testutil {

inline curvekit::Image random_image(std::size_t h, std::size_t w, std::mt19937_64& rng,
                                    double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  curvekit::Image img(h, w, curvekit::ColorSpace::RGB);
  for (double& v : img.data()) v = u(rng);
  return img;
}

inline curvekit::CurlBlockParams random_params(std::mt19937_64& rng, double lo, double hi,
                                               std::size_t segments = curvekit::kDefaultSegments) {
  std::uniform_real_distribution<double> u(lo, hi);
  auto p = curvekit::CurlBlockParams::identity(segments);
  for (std::size_t i = 0; i < curvekit::kCurveCount; ++i)
    for (double& k : p.curve(i).knots) k = u(rng);
  return p;
}

inline std::string data_path(const std::string& name) {
  return std::string(CURVEKIT_TEST_DATA) + "/" + name;
}

inline curvekit::Image crop(const curvekit::Image& img, std::size_t y0, std::size_t x0,
                            std::size_t h, std::size_t w) {
  curvekit::Image out(h, w, img.space());
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) out.at(c, y, x) = img.at(c, y0 + y, x0 + x);
  return out;
}

}  // namespace testutil
