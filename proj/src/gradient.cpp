#include "curvekit/gradient.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace curvekit {

namespace {

Pixel transpose_mul(const Jacobian3& j, const Pixel& g) {
  Pixel out{};
  for (std::size_t k = 0; k < 3; ++k) out[k] = j[0][k] * g[0] + j[1][k] * g[1] + j[2][k] * g[2];
  return out;
}

std::vector<std::size_t> knot_offsets(const CurlBlockParams& params) {
  std::vector<std::size_t> offsets(kCurveCount + 1, 0);
  for (std::size_t i = 0; i < kCurveCount; ++i)
    offsets[i + 1] = offsets[i] + params.curve(i).knots.size();
  return offsets;
}

Pixel convert_from_rgb(const Pixel& rgb, ColorSpace space) {
  switch (space) {
    case ColorSpace::HSV:
      return pixel::rgb_to_hsv(rgb);
    case ColorSpace::LAB:
      return pixel::rgb_to_lab(rgb);
    case ColorSpace::RGB:
      break;
  }
  return rgb;
}

Pixel convert_to_rgb(const Pixel& v, ColorSpace space) {
  switch (space) {
    case ColorSpace::HSV:
      return pixel::hsv_to_rgb(v);
    case ColorSpace::LAB:
      return pixel::lab_to_rgb(v);
    case ColorSpace::RGB:
      break;
  }
  return v;
}

// Forward block pass without validation; knots may be perturbed below zero.
Image forward_unchecked(const Image& input, const CurlBlockParams& params) {
  Image out(input.height(), input.width(), ColorSpace::RGB);
  for (std::size_t i = 0; i < input.pixel_count(); ++i)
    out.set_pixel(i, apply_block_pixel(input.pixel(i), params));
  return out;
}

class Signature {
public:
  void push(std::uint64_t v) {
    hash_ ^= v + 0x9e3779b97f4a7c15ULL + (hash_ << 6) + (hash_ >> 2);
  }
  std::uint64_t value() const { return hash_; }

private:
  std::uint64_t hash_ = 0xcbf29ce484222325ULL;
};

// A crossed kink is tolerated when its predicted shift of the central
// difference stays below this fraction of the data-term slope (or the floor).
constexpr double kKinkTolerance = 3e-4;
constexpr double kKinkFloor = 1e-6;

std::uint64_t clamp_code(double v) { return v < 0.0 ? 0 : (v > 1.0 ? 2 : 1); }
std::uint64_t sign_code(double v) { return v > 0.0 ? 2 : (v < 0.0 ? 0 : 1); }

struct RefPixelCache {
  Pixel rgb;
  Pixel lab;
  double cone_x;
  double cone_y;
};

struct PixelPath {
  std::uint64_t block = 0;  // branches taken inside the block
  std::uint64_t loss = 0;   // branches of the per-pixel loss terms (needs a reference)
  Pixel out{};
  Pixel l1{};  // unweighted per-pixel L1 sums: rgb, lab, conical hsv
};

// Branch signatures of one pixel through the block and, with a reference
// pixel, through the loss. `on_knot` receives (curve index, knot index) for
// domain values lying exactly on an interior knot.
template <typename OnKnot>
PixelPath pixel_path(const Pixel& in, const CurlBlockParams& params, const RefPixelCache* ref,
                     OnKnot&& on_knot) {
  Signature sig;
  Pixel rgb = in;
  for (ColorSpace space : params.order) {
    if (space != ColorSpace::RGB) sig.push(pixel::branch_code(ColorSpace::RGB, space, rgb));
    Pixel value = convert_from_rgb(rgb, space);
    const auto curves = params.stage(space);
    const std::size_t first = space == ColorSpace::LAB ? 0 : (space == ColorSpace::RGB ? 3 : 6);
    for (std::size_t ci = 0; ci < curves.size(); ++ci) {
      const Curve& c = curves[ci];
      const std::size_t M = c.knots.size() - 1;
      const double x = value[c.domain];
      const double Mx = static_cast<double>(M) * x;
      const double fl = std::floor(Mx);
      sig.push(std::min(static_cast<std::uint64_t>(std::max(fl, 0.0)), std::uint64_t{M - 1}));
      if (Mx == fl && fl > 0.0 && fl < static_cast<double>(M))
        on_knot(first + ci, static_cast<std::size_t>(fl));
      const double product = value[c.target] * curve_scale_unchecked(c.knots, x);
      const bool wrap = wraps(space, c.target);
      sig.push(wrap ? static_cast<std::uint64_t>(std::floor(product) + 8.0) : clamp_code(product));
      value[c.target] = finish_curve_output(product, wrap);
    }
    if (space != ColorSpace::RGB) sig.push(pixel::branch_code(space, ColorSpace::RGB, value));
    rgb = convert_to_rgb(value, space);
  }
  if (params.skip) {
    for (std::size_t k = 0; k < 3; ++k) {
      const double s = rgb[k] + in[k];
      sig.push(clamp_code(s));
      rgb[k] = std::clamp(s, 0.0, 1.0);
    }
  }
  PixelPath path{sig.value(), 0, rgb};
  if (ref) {
    Signature ls;
    for (std::size_t k = 0; k < 3; ++k) {
      ls.push(sign_code(rgb[k] - ref->rgb[k]));
      path.l1[0] += std::abs(rgb[k] - ref->rgb[k]);
    }
    ls.push(rgb[0] == 0.0 && rgb[1] == 0.0 && rgb[2] == 0.0 ? 1 : 0);
    ls.push(pixel::branch_code(ColorSpace::RGB, ColorSpace::HSV, rgb));
    const Pixel hsv = pixel::rgb_to_hsv(rgb);
    const double angle = 2.0 * std::numbers::pi * hsv[0];
    const double dx = hsv[1] * hsv[2] * std::cos(angle) - ref->cone_x;
    const double dy = hsv[1] * hsv[2] * std::sin(angle) - ref->cone_y;
    ls.push(sign_code(dx));
    ls.push(sign_code(dy));
    path.l1[2] = std::abs(dx) + std::abs(dy);
    ls.push(pixel::branch_code(ColorSpace::RGB, ColorSpace::LAB, rgb));
    const Pixel lab = pixel::rgb_to_lab(rgb);
    for (std::size_t k = 0; k < 3; ++k) {
      ls.push(sign_code(lab[k] - ref->lab[k]));
      path.l1[1] += std::abs(lab[k] - ref->lab[k]);
    }
    path.loss = ls.value();
  }
  return path;
}

}  // namespace

ParamVector flatten(const CurlBlockParams& params) {
  ParamVector out;
  for (std::size_t i = 0; i < kCurveCount; ++i) {
    const auto& k = params.curve(i).knots;
    out.insert(out.end(), k.begin(), k.end());
  }
  return out;
}

CurlBlockParams unflatten(std::span<const double> values, const StageOrder& order, bool skip) {
  if (values.size() % kCurveCount != 0 || values.size() / kCurveCount < 2)
    throw ConfigError("parameter vector length " + std::to_string(values.size()) +
                      " is not 10 * (M + 1) with M >= 1");
  CurlBlockParams p = CurlBlockParams::identity(values.size() / kCurveCount - 1);
  p.order = order;
  p.skip = skip;
  assign_knots(p, values);
  return p;
}

void assign_knots(CurlBlockParams& params, std::span<const double> values) {
  std::size_t offset = 0;
  for (std::size_t i = 0; i < kCurveCount; ++i) {
    auto& k = params.curve(i).knots;
    if (offset + k.size() > values.size()) throw ConfigError("parameter vector too short");
    std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(offset), k.size(), k.begin());
    offset += k.size();
  }
  if (offset != values.size()) throw ConfigError("parameter vector too long");
}

GradResult loss_and_grad(const Image& input, const LossTarget& target,
                         const CurlBlockParams& params, const LossWeights& w) {
  const Image pred = apply_block(input, params);
  std::vector<Pixel> dpred;
  GradResult result;
  result.loss = target.evaluate(pred, params, w, &dpred);

  const auto offsets = knot_offsets(params);
  result.grad.assign(offsets.back(), 0.0);
  std::span<double> grad(result.grad);

  BlockTrace trace;
  for (std::size_t i = 0; i < input.pixel_count(); ++i) {
    Pixel g = dpred[i];
    if (g[0] == 0.0 && g[1] == 0.0 && g[2] == 0.0) continue;
    apply_block_pixel(input.pixel(i), params, &trace);
    if (params.skip) {
      for (std::size_t k = 0; k < 3; ++k) {
        const double s = trace.pre_skip[k] + trace.input[k];
        if (s < 0.0 || s > 1.0) g[k] = 0.0;
      }
    }
    for (std::size_t si = trace.stages.size(); si-- > 0;) {
      const StageTrace& st = trace.stages[si];
      Pixel gv = transpose_mul(st.to_rgb, g);
      for (std::size_t step = st.step_count; step-- > 0;) {
        const CurveStep& cs = st.steps[step];
        const Curve& curve = params.curve(cs.curve_index);
        const double go = gv[curve.target];
        const bool pass = wraps(st.space, curve.target) || (cs.product >= 0.0 && cs.product <= 1.0);
        if (!pass || go == 0.0) {
          gv[curve.target] = 0.0;
          continue;
        }
        double ds_dx = 0.0;
        const double scale = curve_scale_unchecked(curve.knots, cs.domain_value, &ds_dx);
        accumulate_knot_gradient(
            curve.knots, cs.domain_value, go * cs.target_value,
            grad.subspan(offsets[cs.curve_index], curve.knots.size()));
        gv[curve.target] = go * scale;
        gv[curve.domain] += go * cs.target_value * ds_dx;
      }
      g = transpose_mul(st.to_space, gv);
    }
  }

  if (w.reg != 0.0) reg_loss_gradient(params, w, grad);
  return result;
}

GradResult loss_and_grad(const Image& input, const Image& ref, std::span<const double> params,
                         const StageOrder& order, bool skip, const LossWeights& w) {
  require_same_shape(input, ref, "loss_and_grad");
  return loss_and_grad(input, LossTarget(ref), unflatten(params, order, skip), w);
}

std::vector<double> finite_diff(const std::function<double(std::span<const double>)>& f,
                                std::span<const double> x, double step) {
  if (!(step > 0.0)) throw ConfigError("finite difference step must be positive");
  std::vector<double> point(x.begin(), x.end());
  std::vector<double> out(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double orig = point[j];
    point[j] = orig + step;
    const double up = f(point);
    point[j] = orig - step;
    const double down = f(point);
    point[j] = orig;
    out[j] = (up - down) / (2.0 * step);
  }
  return out;
}

ParamVector finite_diff_grad(const Image& input, const Image& ref, std::span<const double> params,
                             const StageOrder& order, bool skip, const LossWeights& w,
                             double step) {
  require_same_shape(input, ref, "finite_diff_grad");
  const LossTarget target(ref);
  CurlBlockParams layout = unflatten(params, order, skip);
  return finite_diff(
      [&](std::span<const double> p) {
        assign_knots(layout, p);
        return target.evaluate(forward_unchecked(input, layout), layout, w).total;
      },
      params, step);
}

std::vector<bool> kink_mask(const Image& input, std::span<const double> params,
                            const StageOrder& order, bool skip, double step, const Image* ref,
                            const LossWeights& w) {
  if (!(step > 0.0)) throw ConfigError("kink_mask step must be positive");
  CurlBlockParams p = unflatten(params, order, skip);
  const auto offsets = knot_offsets(p);
  std::vector<bool> mask(params.size(), false);
  const std::size_t n = input.pixel_count();

  std::vector<RefPixelCache> ref_cache;
  std::vector<Pixel> dpred;
  if (ref) {
    require_same_shape(input, *ref, "kink_mask");
    ref_cache.resize(ref->pixel_count());
    for (std::size_t i = 0; i < ref_cache.size(); ++i) {
      const Pixel r = ref->pixel(i);
      const Pixel hsv = pixel::rgb_to_hsv(r);
      const double angle = 2.0 * std::numbers::pi * hsv[0];
      ref_cache[i] = {r, pixel::rgb_to_lab(r), hsv[1] * hsv[2] * std::cos(angle),
                      hsv[1] * hsv[2] * std::sin(angle)};
    }
    LossWeights data_w = w;
    data_w.reg = 0.0;
    LossTarget(*ref).evaluate(forward_unchecked(input, p), p, data_w, &dpred);
  }
  const auto ref_at = [&](std::size_t i) { return ref ? &ref_cache[i] : nullptr; };

  std::vector<PixelPath> baseline(n);
  for (std::size_t i = 0; i < n; ++i) {
    baseline[i] = pixel_path(input.pixel(i), p, ref_at(i), [&](std::size_t curve, std::size_t knot) {
      const std::size_t lo = knot > 0 ? knot - 1 : 0;
      const std::size_t hi = std::min(knot + 1, p.curve(curve).knots.size() - 1);
      for (std::size_t k = lo; k <= hi; ++k) mask[offsets[curve] + k] = true;
    });
  }
  const auto no_knot = [](std::size_t, std::size_t) {};

  std::vector<double> point(params.begin(), params.end());
  std::vector<PixelPath> up(n), down(n);
  for (std::size_t j = 0; j < point.size(); ++j) {
    if (mask[j]) continue;
    const double orig = point[j];
    point[j] = orig + step;
    assign_knots(p, point);
    for (std::size_t i = 0; i < n; ++i) up[i] = pixel_path(input.pixel(i), p, ref_at(i), no_knot);
    point[j] = orig - step;
    assign_knots(p, point);
    for (std::size_t i = 0; i < n; ++i) down[i] = pixel_path(input.pixel(i), p, ref_at(i), no_knot);
    point[j] = orig;

    if (!ref) {
      for (std::size_t i = 0; i < n && !mask[j]; ++i)
        mask[j] = up[i].block != baseline[i].block || down[i].block != baseline[i].block;
      continue;
    }
    // With a loss, a branch change only matters through the shift it causes in
    // the central difference. Block kinks enter through the loss gradient
    // times the pixel's output second difference, L1 kinks through the second
    // difference of the pixel's L1 contribution.
    const double inv_n = 1.0 / static_cast<double>(n);
    const Pixel l1_weight = {w.rgb * inv_n / 3.0, w.lab * inv_n / 3.0, w.hsv * inv_n};
    double kink_error = 0.0;
    double slope = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const PixelPath& b = baseline[i];
      for (std::size_t k = 0; k < 3; ++k)
        slope += dpred[i][k] * (up[i].out[k] - down[i].out[k]);
      if (up[i].block != b.block || down[i].block != b.block) {
        for (std::size_t k = 0; k < 3; ++k)
          kink_error += dpred[i][k] * (up[i].out[k] + down[i].out[k] - 2.0 * b.out[k]);
      }
      if (up[i].loss != b.loss || down[i].loss != b.loss) {
        for (std::size_t k = 0; k < 3; ++k)
          kink_error += l1_weight[k] * (up[i].l1[k] + down[i].l1[k] - 2.0 * b.l1[k]);
      }
    }
    slope /= 2.0 * step;
    kink_error /= 2.0 * step;
    mask[j] = std::abs(kink_error) > kKinkTolerance * std::max(std::abs(slope), kKinkFloor);
  }
  return mask;
}

}  // namespace curvekit
