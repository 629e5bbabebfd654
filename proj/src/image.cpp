#include "curvekit/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace curvekit {

std::string_view to_string(ColorSpace space) {
  switch (space) {
    case ColorSpace::RGB:
      return "RGB";
    case ColorSpace::HSV:
      return "HSV";
    case ColorSpace::LAB:
      return "LAB";
  }
  return "?";
}

ColorSpace color_space_from_string(std::string_view name) {
  std::string upper(name);
  for (char& c : upper) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (upper == "RGB") return ColorSpace::RGB;
  if (upper == "HSV") return ColorSpace::HSV;
  if (upper == "LAB") return ColorSpace::LAB;
  throw ConfigError("unknown colour space '" + std::string(name) + "'");
}

Image::Image(std::size_t height, std::size_t width, ColorSpace space)
    : Image(height, width, space, 0.0) {}

Image::Image(std::size_t height, std::size_t width, ColorSpace space, double fill)
    : height_(height), width_(width), space_(space), data_(height * width * 3, fill) {
  if (height == 0 || width == 0) throw DimensionMismatchError("image dimensions must be positive");
}

Image::Image(std::size_t height, std::size_t width, ColorSpace space, std::vector<double> data)
    : height_(height), width_(width), space_(space), data_(std::move(data)) {
  if (height == 0 || width == 0) throw DimensionMismatchError("image dimensions must be positive");
  if (data_.size() != height * width * 3)
    throw DimensionMismatchError("image data length does not equal height * width * 3");
}

void require_space(const Image& img, ColorSpace expected, std::string_view op) {
  if (img.space() != expected) {
    throw SpaceMismatchError(std::string(op) + ": expected " + std::string(to_string(expected)) +
                             " image, got " + std::string(to_string(img.space())));
  }
}

void require_same_shape(const Image& a, const Image& b, std::string_view op) {
  if (!a.same_shape(b)) {
    throw DimensionMismatchError(std::string(op) + ": image sizes differ (" +
                                 std::to_string(a.height()) + "x" + std::to_string(a.width()) +
                                 " vs " + std::to_string(b.height()) + "x" +
                                 std::to_string(b.width()) + ")");
  }
}

double max_abs_diff(const Image& a, const Image& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  const auto da = a.data();
  const auto db = b.data();
  for (std::size_t i = 0; i < da.size(); ++i) m = std::max(m, std::abs(da[i] - db[i]));
  return m;
}

}  // namespace curvekit
