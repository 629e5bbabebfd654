#include "curvekit/colorspace.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace curvekit {

namespace {

using Mat3 = std::array<std::array<double, 3>, 3>;

// sRGB primaries, D65.
constexpr Mat3 kRgbToXyz = {{{0.4124564, 0.3575761, 0.1804375},
                             {0.2126729, 0.7151522, 0.0721750},
                             {0.0193339, 0.1191920, 0.9503041}}};

constexpr Mat3 invert(const Mat3& m) {
  const double c00 = m[1][1] * m[2][2] - m[1][2] * m[2][1];
  const double c01 = m[1][2] * m[2][0] - m[1][0] * m[2][2];
  const double c02 = m[1][0] * m[2][1] - m[1][1] * m[2][0];
  const double det = m[0][0] * c00 + m[0][1] * c01 + m[0][2] * c02;
  Mat3 r{};
  r[0][0] = c00 / det;
  r[1][0] = c01 / det;
  r[2][0] = c02 / det;
  r[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) / det;
  r[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) / det;
  r[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) / det;
  r[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) / det;
  r[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) / det;
  r[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) / det;
  return r;
}

constexpr Mat3 kXyzToRgb = invert(kRgbToXyz);

// White point as the image of RGB (1,1,1) so that white maps to a = b = 0.
constexpr std::array<double, 3> kWhite = {
    kRgbToXyz[0][0] + kRgbToXyz[0][1] + kRgbToXyz[0][2],
    kRgbToXyz[1][0] + kRgbToXyz[1][1] + kRgbToXyz[1][2],
    kRgbToXyz[2][0] + kRgbToXyz[2][1] + kRgbToXyz[2][2]};

constexpr double kEpsilon = 216.0 / 24389.0;
constexpr double kKappa = 24389.0 / 27.0;

constexpr double kSrgbKnee = 0.04045;
constexpr double kLinearKnee = kSrgbKnee / 12.92;

double srgb_to_linear_deriv(double c) {
  if (c <= kSrgbKnee) return 1.0 / 12.92;
  return 2.4 / 1.055 * std::pow((c + 0.055) / 1.055, 1.4);
}

double linear_to_srgb_deriv(double c) {
  if (c <= kLinearKnee) return 12.92;
  return 1.055 / 2.4 * std::pow(c, 1.0 / 2.4 - 1.0);
}

double lab_f(double t) {
  return t > kEpsilon ? std::cbrt(t) : (kKappa * t + 16.0) / 116.0;
}

double lab_f_deriv(double t) {
  if (t > kEpsilon) {
    const double c = std::cbrt(t);
    return 1.0 / (3.0 * c * c);
  }
  return kKappa / 116.0;
}

double lab_finv(double f) {
  const double f3 = f * f * f;
  return f3 > kEpsilon ? f3 : (116.0 * f - 16.0) / kKappa;
}

double lab_finv_deriv(double f) {
  const double f3 = f * f * f;
  return f3 > kEpsilon ? 3.0 * f * f : 116.0 / kKappa;
}

// Clamp to [0,1]; zero the jacobian row when the value leaves the interval.
double clamp_unit(double v, std::array<double, 3>* row) {
  if (v < 0.0 || v > 1.0) {
    if (row) row->fill(0.0);
    return std::clamp(v, 0.0, 1.0);
  }
  return v;
}

std::size_t argmax_first(const Pixel& p) {
  std::size_t i = 0;
  if (p[1] > p[i]) i = 1;
  if (p[2] > p[i]) i = 2;
  return i;
}

std::size_t argmin_first(const Pixel& p) {
  std::size_t i = 0;
  if (p[1] < p[i]) i = 1;
  if (p[2] < p[i]) i = 2;
  return i;
}

template <typename Fn>
Image convert(const Image& img, ColorSpace target, Fn fn) {
  Image out(img.height(), img.width(), target);
  const std::size_t n = img.pixel_count();
  for (std::size_t i = 0; i < n; ++i) out.set_pixel(i, fn(img.pixel(i)));
  return out;
}

}  // namespace

Jacobian3 identity_jacobian() {
  return {{{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}, {0.0, 0.0, 1.0}}};
}

namespace pixel {

double srgb_to_linear(double c) {
  if (c <= kSrgbKnee) return c / 12.92;
  return std::pow((c + 0.055) / 1.055, 2.4);
}

double linear_to_srgb(double c) {
  if (c <= kLinearKnee) return 12.92 * c;
  return 1.055 * std::pow(c, 1.0 / 2.4) - 0.055;
}

Pixel rgb_to_hsv(const Pixel& rgb, Jacobian3* jac) {
  const std::size_t imax = argmax_first(rgb);
  const std::size_t imin = argmin_first(rgb);
  const double v = rgb[imax];
  const double c = v - rgb[imin];
  const double s = v > 0.0 ? c / v : 0.0;

  double h = 0.0;
  std::array<double, 3> dn{};
  double n = 0.0;
  if (c > 0.0) {
    double offset = 0.0;
    switch (imax) {
      case 0:
        n = rgb[1] - rgb[2];
        dn = {0.0, 1.0, -1.0};
        break;
      case 1:
        n = rgb[2] - rgb[0];
        dn = {-1.0, 0.0, 1.0};
        offset = 2.0;
        break;
      default:
        n = rgb[0] - rgb[1];
        dn = {1.0, -1.0, 0.0};
        offset = 4.0;
        break;
    }
    double h6 = offset + n / c;
    if (h6 < 0.0) h6 += 6.0;
    h = h6 / 6.0;
    if (h >= 1.0) h -= 1.0;
  }

  if (jac) {
    Jacobian3& j = *jac;
    j = {};
    j[2][imax] = 1.0;
    if (v > 0.0) {
      j[1][imax] += rgb[imin] / (v * v);
      j[1][imin] -= 1.0 / v;
    }
    if (c > 0.0) {
      std::array<double, 3> dc{};
      dc[imax] += 1.0;
      dc[imin] -= 1.0;
      for (std::size_t k = 0; k < 3; ++k)
        j[0][k] = (dn[k] * c - n * dc[k]) / (6.0 * c * c);
    }
  }
  return {h, s, v};
}

Pixel hsv_to_rgb_unclamped(const Pixel& hsv) {
  const double h6 = 6.0 * (hsv[0] - std::floor(hsv[0]));
  constexpr std::array<double, 3> kPhase = {5.0, 3.0, 1.0};
  Pixel out{};
  for (std::size_t ch = 0; ch < 3; ++ch) {
    const double k = std::fmod(kPhase[ch] + h6, 6.0);
    const double a = std::clamp(std::min(k, 4.0 - k), 0.0, 1.0);
    out[ch] = hsv[2] * (1.0 - hsv[1] * a);
  }
  return out;
}

Pixel hsv_to_rgb(const Pixel& hsv, Jacobian3* jac) {
  const double h6 = 6.0 * (hsv[0] - std::floor(hsv[0]));
  const double s = hsv[1];
  const double v = hsv[2];
  constexpr std::array<double, 3> kPhase = {5.0, 3.0, 1.0};
  Pixel out{};
  for (std::size_t ch = 0; ch < 3; ++ch) {
    const double k = std::fmod(kPhase[ch] + h6, 6.0);
    const double m = std::min(k, 4.0 - k);
    double a = 0.0;
    double da_dk = 0.0;
    if (m >= 1.0) {
      a = 1.0;
    } else if (m > 0.0) {
      a = m;
      da_dk = k <= 4.0 - k ? 1.0 : -1.0;
    }
    out[ch] = v * (1.0 - s * a);
    if (jac) {
      (*jac)[ch] = {-v * s * da_dk * 6.0, -v * a, 1.0 - s * a};
      out[ch] = clamp_unit(out[ch], &(*jac)[ch]);
    } else {
      out[ch] = clamp_unit(out[ch], nullptr);
    }
  }
  return out;
}

Pixel rgb_to_lab_raw(const Pixel& rgb) {
  Pixel lin{};
  for (std::size_t k = 0; k < 3; ++k) lin[k] = srgb_to_linear(rgb[k]);
  Pixel f{};
  for (std::size_t i = 0; i < 3; ++i) {
    const double xyz = kRgbToXyz[i][0] * lin[0] + kRgbToXyz[i][1] * lin[1] +
                       kRgbToXyz[i][2] * lin[2];
    f[i] = lab_f(xyz / kWhite[i]);
  }
  return {116.0 * f[1] - 16.0, 500.0 * (f[0] - f[1]), 200.0 * (f[1] - f[2])};
}

Pixel rgb_to_lab(const Pixel& rgb, Jacobian3* jac) {
  Pixel lin{};
  Pixel dlin{};
  for (std::size_t k = 0; k < 3; ++k) {
    lin[k] = srgb_to_linear(rgb[k]);
    dlin[k] = srgb_to_linear_deriv(rgb[k]);
  }
  Pixel f{};
  Jacobian3 df{};
  for (std::size_t i = 0; i < 3; ++i) {
    const double t = (kRgbToXyz[i][0] * lin[0] + kRgbToXyz[i][1] * lin[1] +
                      kRgbToXyz[i][2] * lin[2]) /
                     kWhite[i];
    f[i] = lab_f(t);
    if (jac) {
      const double fd = lab_f_deriv(t) / kWhite[i];
      for (std::size_t k = 0; k < 3; ++k) df[i][k] = fd * kRgbToXyz[i][k] * dlin[k];
    }
  }
  const double L = 116.0 * f[1] - 16.0;
  const double a = 500.0 * (f[0] - f[1]);
  const double b = 200.0 * (f[1] - f[2]);
  Pixel out = {L / kLabLScale, (a + kLabChromaOffset) / kLabChromaScale,
               (b + kLabChromaOffset) / kLabChromaScale};
  if (jac) {
    Jacobian3& j = *jac;
    for (std::size_t k = 0; k < 3; ++k) {
      j[0][k] = 116.0 * df[1][k] / kLabLScale;
      j[1][k] = 500.0 * (df[0][k] - df[1][k]) / kLabChromaScale;
      j[2][k] = 200.0 * (df[1][k] - df[2][k]) / kLabChromaScale;
    }
    for (std::size_t r = 0; r < 3; ++r) out[r] = clamp_unit(out[r], &j[r]);
  } else {
    for (double& v : out) v = clamp_unit(v, nullptr);
  }
  return out;
}

Pixel lab_to_rgb(const Pixel& lab, Jacobian3* jac) {
  const double L = lab[0] * kLabLScale;
  const double a = lab[1] * kLabChromaScale - kLabChromaOffset;
  const double b = lab[2] * kLabChromaScale - kLabChromaOffset;
  const double fy = (L + 16.0) / 116.0;
  const Pixel f = {fy + a / 500.0, fy, fy - b / 200.0};
  // df[i][k] = d f_i / d lab_k
  constexpr double dL = kLabLScale / 116.0;
  const Jacobian3 df = {{{dL, kLabChromaScale / 500.0, 0.0},
                         {dL, 0.0, 0.0},
                         {dL, 0.0, -kLabChromaScale / 200.0}}};
  Pixel xyz{};
  Pixel dxyz{};
  for (std::size_t i = 0; i < 3; ++i) {
    xyz[i] = kWhite[i] * lab_finv(f[i]);
    dxyz[i] = kWhite[i] * lab_finv_deriv(f[i]);
  }
  Pixel out{};
  for (std::size_t r = 0; r < 3; ++r) {
    const double lin = kXyzToRgb[r][0] * xyz[0] + kXyzToRgb[r][1] * xyz[1] +
                       kXyzToRgb[r][2] * xyz[2];
    out[r] = linear_to_srgb(lin);
    if (jac) {
      const double dc = linear_to_srgb_deriv(lin);
      for (std::size_t k = 0; k < 3; ++k) {
        double d = 0.0;
        for (std::size_t i = 0; i < 3; ++i) d += kXyzToRgb[r][i] * dxyz[i] * df[i][k];
        (*jac)[r][k] = dc * d;
      }
      out[r] = clamp_unit(out[r], &(*jac)[r]);
    } else {
      out[r] = clamp_unit(out[r], nullptr);
    }
  }
  return out;
}

namespace {

std::uint32_t clamp_code(double v) { return v < 0.0 ? 0u : (v > 1.0 ? 2u : 1u); }

std::uint32_t hsv_code(const Pixel& rgb) {
  const std::size_t imax = argmax_first(rgb);
  const std::size_t imin = argmin_first(rgb);
  const double c = rgb[imax] - rgb[imin];
  return static_cast<std::uint32_t>(imax * 3 + imin) + (c > 0.0 ? 9u : 0u) +
         (rgb[imax] > 0.0 ? 18u : 0u);
}

std::uint32_t hsv_to_rgb_code(const Pixel& hsv) {
  const double h6 = 6.0 * (hsv[0] - std::floor(hsv[0]));
  constexpr std::array<double, 3> kPhase = {5.0, 3.0, 1.0};
  const Pixel out = hsv_to_rgb_unclamped(hsv);
  std::uint32_t code = 0;
  for (std::size_t ch = 0; ch < 3; ++ch) {
    const double k = std::fmod(kPhase[ch] + h6, 6.0);
    const double m = std::min(k, 4.0 - k);
    const std::uint32_t region = m >= 1.0 ? 2u : (m > 0.0 ? 1u : 0u);
    code = code * 9u + region * 3u + clamp_code(out[ch]);
  }
  return code;
}

std::uint32_t lab_code(const Pixel& rgb) {
  Pixel lin{};
  std::uint32_t code = 0;
  for (std::size_t k = 0; k < 3; ++k) {
    lin[k] = srgb_to_linear(rgb[k]);
    code = code * 2u + (rgb[k] <= kSrgbKnee ? 1u : 0u);
  }
  for (std::size_t i = 0; i < 3; ++i) {
    const double t = (kRgbToXyz[i][0] * lin[0] + kRgbToXyz[i][1] * lin[1] +
                      kRgbToXyz[i][2] * lin[2]) /
                     kWhite[i];
    code = code * 2u + (t > kEpsilon ? 1u : 0u);
  }
  // Normalized outputs are clamped; reuse the forward conversion without it.
  const Pixel raw = rgb_to_lab_raw(rgb);
  const Pixel normalized = {raw[0] / kLabLScale, (raw[1] + kLabChromaOffset) / kLabChromaScale,
                            (raw[2] + kLabChromaOffset) / kLabChromaScale};
  for (double v : normalized) code = code * 3u + clamp_code(v);
  return code;
}

std::uint32_t lab_to_rgb_code(const Pixel& lab) {
  const double L = lab[0] * kLabLScale;
  const double a = lab[1] * kLabChromaScale - kLabChromaOffset;
  const double b = lab[2] * kLabChromaScale - kLabChromaOffset;
  const double fy = (L + 16.0) / 116.0;
  const Pixel f = {fy + a / 500.0, fy, fy - b / 200.0};
  std::uint32_t code = 0;
  Pixel xyz{};
  for (std::size_t i = 0; i < 3; ++i) {
    code = code * 2u + (f[i] * f[i] * f[i] > kEpsilon ? 1u : 0u);
    xyz[i] = kWhite[i] * lab_finv(f[i]);
  }
  for (std::size_t r = 0; r < 3; ++r) {
    const double lin = kXyzToRgb[r][0] * xyz[0] + kXyzToRgb[r][1] * xyz[1] +
                       kXyzToRgb[r][2] * xyz[2];
    code = code * 2u + (lin <= kLinearKnee ? 1u : 0u);
    code = code * 3u + clamp_code(linear_to_srgb(lin));
  }
  return code;
}

}  // namespace

std::uint32_t branch_code(ColorSpace from, ColorSpace to, const Pixel& in) {
  if (from == ColorSpace::RGB && to == ColorSpace::HSV) return hsv_code(in);
  if (from == ColorSpace::HSV && to == ColorSpace::RGB) return hsv_to_rgb_code(in);
  if (from == ColorSpace::RGB && to == ColorSpace::LAB) return lab_code(in);
  if (from == ColorSpace::LAB && to == ColorSpace::RGB) return lab_to_rgb_code(in);
  return 0;
}

}  // namespace pixel

Image rgb_to_hsv(const Image& img) {
  require_space(img, ColorSpace::RGB, "rgb_to_hsv");
  return convert(img, ColorSpace::HSV, [](const Pixel& p) { return pixel::rgb_to_hsv(p); });
}

Image hsv_to_rgb(const Image& img) {
  require_space(img, ColorSpace::HSV, "hsv_to_rgb");
  return convert(img, ColorSpace::RGB, [](const Pixel& p) { return pixel::hsv_to_rgb(p); });
}

Image rgb_to_lab(const Image& img) {
  require_space(img, ColorSpace::RGB, "rgb_to_lab");
  return convert(img, ColorSpace::LAB, [](const Pixel& p) { return pixel::rgb_to_lab(p); });
}

Image lab_to_rgb(const Image& img) {
  require_space(img, ColorSpace::LAB, "lab_to_rgb");
  return convert(img, ColorSpace::RGB, [](const Pixel& p) { return pixel::lab_to_rgb(p); });
}

Image from_rgb(const Image& rgb, ColorSpace target) {
  switch (target) {
    case ColorSpace::HSV:
      return rgb_to_hsv(rgb);
    case ColorSpace::LAB:
      return rgb_to_lab(rgb);
    case ColorSpace::RGB:
      break;
  }
  require_space(rgb, ColorSpace::RGB, "from_rgb");
  return rgb;
}

Image to_rgb(const Image& img) {
  switch (img.space()) {
    case ColorSpace::HSV:
      return hsv_to_rgb(img);
    case ColorSpace::LAB:
      return lab_to_rgb(img);
    case ColorSpace::RGB:
      break;
  }
  return img;
}

ConicalPlanes hsv_conical(const Image& hsv) {
  require_space(hsv, ColorSpace::HSV, "hsv_conical");
  const std::size_t n = hsv.pixel_count();
  ConicalPlanes planes{std::vector<double>(n), std::vector<double>(n)};
  const auto h = hsv.plane(0);
  const auto s = hsv.plane(1);
  const auto v = hsv.plane(2);
  for (std::size_t i = 0; i < n; ++i) {
    const double angle = 2.0 * std::numbers::pi * h[i];
    const double r = s[i] * v[i];
    planes.x[i] = r * std::cos(angle);
    planes.y[i] = r * std::sin(angle);
  }
  return planes;
}

}  // namespace curvekit
