#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "curvekit/image.hpp"

namespace curvekit {

// jac[i][j] = d out_i / d in_j
using Jacobian3 = std::array<std::array<double, 3>, 3>;

Jacobian3 identity_jacobian();

// Affine Lab encoding: L / 100, (a + 110) / 220, (b + 110) / 220.
inline constexpr double kLabLScale = 100.0;
inline constexpr double kLabChromaOffset = 110.0;
inline constexpr double kLabChromaScale = 220.0;

namespace pixel {

// Hexcone HSV with hue stored as a fraction of a turn in [0, 1).
// Ties for the max/min channel resolve to the first channel in R, G, B order.
Pixel rgb_to_hsv(const Pixel& rgb, Jacobian3* jac = nullptr);
// Output is clamped to [0, 1]; the Jacobian is zeroed on clamped rows.
Pixel hsv_to_rgb(const Pixel& hsv, Jacobian3* jac = nullptr);

// Nonlinear sRGB -> CIELab (D65), in the normalized encoding above.
Pixel rgb_to_lab(const Pixel& rgb, Jacobian3* jac = nullptr);
Pixel lab_to_rgb(const Pixel& lab, Jacobian3* jac = nullptr);

// Unnormalized CIELab (L in [0,100], a/b unbounded) for reference checks.
Pixel rgb_to_lab_raw(const Pixel& rgb);

double srgb_to_linear(double c);
double linear_to_srgb(double c);

// Identifies which piecewise branch each conversion takes for this input
// (hue sector and ties, transfer-curve knee, cube-root knee, output clamp).
// Two inputs with equal codes lie on the same smooth piece.
std::uint32_t branch_code(ColorSpace from, ColorSpace to, const Pixel& in);

}  // namespace pixel

Image rgb_to_hsv(const Image& img);
Image hsv_to_rgb(const Image& img);
Image rgb_to_lab(const Image& img);
Image lab_to_rgb(const Image& img);

// Converts between RGB and `target`; the identity when target is RGB.
Image from_rgb(const Image& rgb, ColorSpace target);
Image to_rgb(const Image& img);

struct ConicalPlanes {
  std::vector<double> x;  // S V cos(2 pi h)
  std::vector<double> y;  // S V sin(2 pi h)
};

ConicalPlanes hsv_conical(const Image& hsv);

}  // namespace curvekit
