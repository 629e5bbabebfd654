#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "curvekit/colorspace.hpp"
#include "curvekit/image.hpp"

namespace curvekit {

inline constexpr std::size_t kDefaultSegments = 15;

// Piecewise-linear scale-factor curve with knots k_0..k_M over M equal
// segments of [0,1]. The curve is indexed by `domain` and scales `target`
// (channel indices within the image's colour space).
struct Curve {
  std::vector<double> knots;
  std::size_t domain = 0;
  std::size_t target = 0;

  std::size_t segments() const { return knots.empty() ? 0 : knots.size() - 1; }

  static Curve identity(std::size_t domain, std::size_t target,
                        std::size_t segments = kDefaultSegments);

  // Throws ConfigError unless there are >= 2 knots, all finite and >= 0,
  // and both channel indices are < 3.
  void validate() const;

  friend bool operator==(const Curve&, const Curve&) = default;
};

// 0 below 0, x on [0,1], 1 above 1.
double delta(double x);

// S(x) = k_0 + sum_m (k_{m+1} - k_m) delta(M x - m). Throws DomainError for
// x outside [0,1].
double curve_scale(const Curve& curve, double x);

// Unchecked evaluation; optionally returns dS/dx using the segment that
// contains x (the last segment at x = 1).
double curve_scale_unchecked(std::span<const double> knots, double x,
                             double* dscale_dx = nullptr);

// Adds weight * dS/dk_j to grad[j] for every knot.
void accumulate_knot_gradient(std::span<const double> knots, double x, double weight,
                              std::span<double> grad);

Image apply_curve(const Image& img, const Curve& curve);

using StageOrder = std::array<ColorSpace, 3>;

inline constexpr StageOrder kDefaultOrder = {ColorSpace::LAB, ColorSpace::RGB, ColorSpace::HSV};

std::string order_to_string(const StageOrder& order, std::string_view sep = ",");
// Accepts "LAB,RGB,HSV" and "LAB->RGB->HSV".
StageOrder order_from_string(std::string_view text);
void validate_order(const StageOrder& order);

// All six stage orderings, in a fixed order starting HSV->RGB->LAB.
std::vector<StageOrder> stage_permutations();

inline constexpr std::size_t kCurveCount = 10;

// Canonical curve order: lab L,a,b; rgb R,G,B; hsv h->h, s->s, h->s, v->v.
inline constexpr std::array<std::string_view, kCurveCount> kCurveNames = {
    "lab.L", "lab.a", "lab.b", "rgb.R", "rgb.G", "rgb.B",
    "hsv.h->h", "hsv.s->s", "hsv.h->s", "hsv.v->v"};

struct CurlBlockParams {
  std::array<Curve, 3> lab;
  std::array<Curve, 3> rgb;
  std::array<Curve, 4> hsv;
  StageOrder order = kDefaultOrder;
  bool skip = false;

  static CurlBlockParams identity(std::size_t segments = kDefaultSegments);

  std::span<const Curve> stage(ColorSpace space) const;
  std::span<Curve> stage(ColorSpace space);

  // Curve by canonical index 0..9.
  const Curve& curve(std::size_t index) const;
  Curve& curve(std::size_t index);

  // Checks channel wiring, knot validity and the ordering.
  void validate() const;

  friend bool operator==(const CurlBlockParams&, const CurlBlockParams&) = default;
};

// Runs every stage of the block on an RGB image.
Image apply_block(const Image& rgb, const CurlBlockParams& params);

// Per-pixel record of the block's forward pass, consumed by the gradient
// module's reverse sweep.
struct CurveStep {
  std::size_t curve_index = 0;  // canonical index
  double domain_value = 0.0;
  double target_value = 0.0;
  double product = 0.0;  // target_value * S(domain_value), before clamp/wrap
};

struct StageTrace {
  ColorSpace space = ColorSpace::RGB;
  Jacobian3 to_space{};
  Jacobian3 to_rgb{};
  std::array<CurveStep, 4> steps{};
  std::size_t step_count = 0;
};

struct BlockTrace {
  Pixel input{};
  Pixel pre_skip{};
  std::array<StageTrace, 3> stages{};
};

Pixel apply_block_pixel(const Pixel& rgb, const CurlBlockParams& params,
                        BlockTrace* trace = nullptr);

// Hue targets wrap modulo 1; every other target is clamped to [0,1].
bool wraps(ColorSpace space, std::size_t channel);
double finish_curve_output(double product, bool wrap);

}  // namespace curvekit
