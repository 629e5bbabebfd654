#include "curvekit/curve.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace curvekit {

namespace {

struct CurveWiring {
  ColorSpace space;
  std::size_t domain;
  std::size_t target;
};

constexpr std::array<CurveWiring, kCurveCount> kWiring = {{
    {ColorSpace::LAB, 0, 0},
    {ColorSpace::LAB, 1, 1},
    {ColorSpace::LAB, 2, 2},
    {ColorSpace::RGB, 0, 0},
    {ColorSpace::RGB, 1, 1},
    {ColorSpace::RGB, 2, 2},
    {ColorSpace::HSV, 0, 0},
    {ColorSpace::HSV, 1, 1},
    {ColorSpace::HSV, 0, 1},
    {ColorSpace::HSV, 2, 2},
}};

constexpr std::size_t stage_offset(ColorSpace space) {
  switch (space) {
    case ColorSpace::LAB:
      return 0;
    case ColorSpace::RGB:
      return 3;
    case ColorSpace::HSV:
      return 6;
  }
  return 0;
}

Pixel convert_from_rgb(const Pixel& rgb, ColorSpace space, Jacobian3* jac) {
  switch (space) {
    case ColorSpace::HSV:
      return pixel::rgb_to_hsv(rgb, jac);
    case ColorSpace::LAB:
      return pixel::rgb_to_lab(rgb, jac);
    case ColorSpace::RGB:
      break;
  }
  if (jac) *jac = identity_jacobian();
  return rgb;
}

Pixel convert_to_rgb(const Pixel& value, ColorSpace space, Jacobian3* jac) {
  switch (space) {
    case ColorSpace::HSV:
      return pixel::hsv_to_rgb(value, jac);
    case ColorSpace::LAB:
      return pixel::lab_to_rgb(value, jac);
    case ColorSpace::RGB:
      break;
  }
  if (jac) *jac = identity_jacobian();
  return value;
}

}  // namespace

Curve Curve::identity(std::size_t domain, std::size_t target, std::size_t segments) {
  if (segments < 1) throw ConfigError("a curve needs at least one segment");
  return Curve{std::vector<double>(segments + 1, 1.0), domain, target};
}

void Curve::validate() const {
  if (knots.size() < 2) throw ConfigError("a curve needs at least 2 knots");
  if (domain > 2 || target > 2) throw ConfigError("curve channel index out of range");
  for (double k : knots) {
    if (!std::isfinite(k) || k < 0.0)
      throw ConfigError("curve knots must be finite and non-negative");
  }
}

double delta(double x) {
  if (x < 0.0) return 0.0;
  if (x > 1.0) return 1.0;
  return x;
}

double curve_scale_unchecked(std::span<const double> knots, double x, double* dscale_dx) {
  const std::size_t M = knots.size() - 1;
  const double Mx = static_cast<double>(M) * x;
  double s = knots[0];
  for (std::size_t m = 0; m < M; ++m)
    s += (knots[m + 1] - knots[m]) * delta(Mx - static_cast<double>(m));
  if (dscale_dx) {
    const auto seg = std::min(static_cast<std::size_t>(std::max(Mx, 0.0)), M - 1);
    *dscale_dx = static_cast<double>(M) * (knots[seg + 1] - knots[seg]);
  }
  return s;
}

double curve_scale(const Curve& curve, double x) {
  if (curve.knots.size() < 2) throw ConfigError("a curve needs at least 2 knots");
  if (!(x >= 0.0 && x <= 1.0))
    throw DomainError("curve_scale: input " + std::to_string(x) + " outside [0,1]");
  return curve_scale_unchecked(curve.knots, x);
}

void accumulate_knot_gradient(std::span<const double> knots, double x, double weight,
                              std::span<double> grad) {
  // dS/dk_j = delta(Mx - (j-1)) - delta(Mx - j), with the k_0 term acting as
  // delta(.) = 1 for j = 0 and no subtraction for j = M.
  const std::size_t M = knots.size() - 1;
  const double Mx = static_cast<double>(M) * x;
  double prev = 1.0;
  for (std::size_t j = 0; j <= M; ++j) {
    const double cur = j < M ? delta(Mx - static_cast<double>(j)) : 0.0;
    const double w = prev - cur;
    if (w != 0.0) grad[j] += weight * w;
    prev = cur;
  }
}

bool wraps(ColorSpace space, std::size_t channel) {
  return space == ColorSpace::HSV && channel == 0;
}

double finish_curve_output(double product, bool wrap) {
  if (wrap) return product - std::floor(product);
  return std::clamp(product, 0.0, 1.0);
}

Image apply_curve(const Image& img, const Curve& curve) {
  curve.validate();
  const bool wrap = wraps(img.space(), curve.target);
  Image out = img;
  const auto domain = img.plane(curve.domain);
  const auto target = img.plane(curve.target);
  auto dst = out.plane(curve.target);
  for (std::size_t i = 0; i < dst.size(); ++i) {
    const double s = curve_scale(curve, domain[i]);
    dst[i] = finish_curve_output(target[i] * s, wrap);
  }
  return out;
}

std::string order_to_string(const StageOrder& order, std::string_view sep) {
  std::string s;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (i) s += sep;
    s += to_string(order[i]);
  }
  return s;
}

StageOrder order_from_string(std::string_view text) {
  std::string normalized(text);
  for (std::size_t pos; (pos = normalized.find("->")) != std::string::npos;)
    normalized.replace(pos, 2, ",");
  std::vector<std::string> parts;
  std::stringstream ss(normalized);
  for (std::string item; std::getline(ss, item, ',');) parts.push_back(item);
  if (parts.size() != 3)
    throw ConfigError("ordering must list three stages, got '" + std::string(text) + "'");
  StageOrder order{};
  for (std::size_t i = 0; i < 3; ++i) order[i] = color_space_from_string(parts[i]);
  validate_order(order);
  return order;
}

void validate_order(const StageOrder& order) {
  for (ColorSpace s : {ColorSpace::LAB, ColorSpace::RGB, ColorSpace::HSV}) {
    if (std::count(order.begin(), order.end(), s) != 1)
      throw ConfigError("ordering must be a permutation of LAB, RGB, HSV");
  }
}

std::vector<StageOrder> stage_permutations() {
  using enum ColorSpace;
  return {{HSV, RGB, LAB}, {RGB, HSV, LAB}, {LAB, RGB, HSV},
          {LAB, HSV, RGB}, {RGB, LAB, HSV}, {HSV, LAB, RGB}};
}

CurlBlockParams CurlBlockParams::identity(std::size_t segments) {
  CurlBlockParams p;
  for (std::size_t i = 0; i < kCurveCount; ++i)
    p.curve(i) = Curve::identity(kWiring[i].domain, kWiring[i].target, segments);
  return p;
}

std::span<const Curve> CurlBlockParams::stage(ColorSpace space) const {
  switch (space) {
    case ColorSpace::LAB:
      return lab;
    case ColorSpace::RGB:
      return rgb;
    case ColorSpace::HSV:
      return hsv;
  }
  return {};
}

std::span<Curve> CurlBlockParams::stage(ColorSpace space) {
  switch (space) {
    case ColorSpace::LAB:
      return lab;
    case ColorSpace::RGB:
      return rgb;
    case ColorSpace::HSV:
      return hsv;
  }
  return {};
}

const Curve& CurlBlockParams::curve(std::size_t index) const {
  if (index < 3) return lab[index];
  if (index < 6) return rgb[index - 3];
  if (index < kCurveCount) return hsv[index - 6];
  throw ConfigError("curve index out of range");
}

Curve& CurlBlockParams::curve(std::size_t index) {
  return const_cast<Curve&>(std::as_const(*this).curve(index));
}

void CurlBlockParams::validate() const {
  validate_order(order);
  for (std::size_t i = 0; i < kCurveCount; ++i) {
    const Curve& c = curve(i);
    try {
      c.validate();
    } catch (const ConfigError& e) {
      throw ConfigError(std::string(kCurveNames[i]) + ": " + e.what());
    }
    if (c.domain != kWiring[i].domain || c.target != kWiring[i].target)
      throw ConfigError(std::string(kCurveNames[i]) + ": unexpected channel wiring");
  }
}

Pixel apply_block_pixel(const Pixel& rgb_in, const CurlBlockParams& params, BlockTrace* trace) {
  Pixel rgb = rgb_in;
  for (std::size_t si = 0; si < params.order.size(); ++si) {
    const ColorSpace space = params.order[si];
    StageTrace* st = trace ? &trace->stages[si] : nullptr;
    Pixel value = convert_from_rgb(rgb, space, st ? &st->to_space : nullptr);
    const auto curves = params.stage(space);
    const std::size_t offset = stage_offset(space);
    for (std::size_t ci = 0; ci < curves.size(); ++ci) {
      const Curve& c = curves[ci];
      const double x = value[c.domain];
      const double t = value[c.target];
      const double product = t * curve_scale_unchecked(c.knots, x);
      if (st) st->steps[ci] = CurveStep{offset + ci, x, t, product};
      value[c.target] = finish_curve_output(product, wraps(space, c.target));
    }
    if (st) {
      st->space = space;
      st->step_count = curves.size();
    }
    rgb = convert_to_rgb(value, space, st ? &st->to_rgb : nullptr);
  }
  if (trace) {
    trace->input = rgb_in;
    trace->pre_skip = rgb;
  }
  if (params.skip) {
    for (std::size_t k = 0; k < 3; ++k) rgb[k] = std::clamp(rgb[k] + rgb_in[k], 0.0, 1.0);
  }
  return rgb;
}

Image apply_block(const Image& rgb, const CurlBlockParams& params) {
  require_space(rgb, ColorSpace::RGB, "apply_block");
  params.validate();
  Image out(rgb.height(), rgb.width(), ColorSpace::RGB);
  const std::size_t n = rgb.pixel_count();
  for (std::size_t i = 0; i < n; ++i) out.set_pixel(i, apply_block_pixel(rgb.pixel(i), params));
  return out;
}

}  // namespace curvekit
