#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace curvekit {

// Error hierarchy. Every failure raised by the library derives from Error so
// callers (the CLI in particular) can report a one-line diagnostic.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class SpaceMismatchError : public Error {
public:
  using Error::Error;
};

class DimensionMismatchError : public Error {
public:
  using Error::Error;
};

class DomainError : public Error {
public:
  using Error::Error;
};

class ConfigError : public Error {
public:
  using Error::Error;
};

class IoError : public Error {
public:
  using Error::Error;
};

enum class ColorSpace { RGB, HSV, LAB };

std::string_view to_string(ColorSpace space);
ColorSpace color_space_from_string(std::string_view name);

using Pixel = std::array<double, 3>;

// H x W x 3 planar image. Channel c of pixel (y, x) lives at
// data[c * H * W + y * W + x]. Values are normalized to [0, 1]; for HSV the
// hue channel stores angle / 2pi.
class Image {
public:
  Image() = default;
  Image(std::size_t height, std::size_t width, ColorSpace space);
  Image(std::size_t height, std::size_t width, ColorSpace space, double fill);
  Image(std::size_t height, std::size_t width, ColorSpace space,
        std::vector<double> data);

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t pixel_count() const { return height_ * width_; }
  ColorSpace space() const { return space_; }

  std::span<double> plane(std::size_t channel) {
    return {data_.data() + channel * pixel_count(), pixel_count()};
  }
  std::span<const double> plane(std::size_t channel) const {
    return {data_.data() + channel * pixel_count(), pixel_count()};
  }

  double& at(std::size_t channel, std::size_t y, std::size_t x) {
    return data_[channel * pixel_count() + y * width_ + x];
  }
  double at(std::size_t channel, std::size_t y, std::size_t x) const {
    return data_[channel * pixel_count() + y * width_ + x];
  }

  Pixel pixel(std::size_t index) const {
    const std::size_t n = pixel_count();
    return {data_[index], data_[n + index], data_[2 * n + index]};
  }
  void set_pixel(std::size_t index, const Pixel& p) {
    const std::size_t n = pixel_count();
    data_[index] = p[0];
    data_[n + index] = p[1];
    data_[2 * n + index] = p[2];
  }

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }

  bool same_shape(const Image& other) const {
    return height_ == other.height_ && width_ == other.width_;
  }

  friend bool operator==(const Image&, const Image&) = default;

private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  ColorSpace space_ = ColorSpace::RGB;
  std::vector<double> data_;
};

void require_space(const Image& img, ColorSpace expected, std::string_view op);
void require_same_shape(const Image& a, const Image& b, std::string_view op);

// Largest absolute elementwise difference; shapes must match.
double max_abs_diff(const Image& a, const Image& b);

}  // namespace curvekit
