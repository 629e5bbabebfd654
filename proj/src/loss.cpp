#include "curvekit/loss.hpp"

#include <cmath>
#include <numbers>

namespace curvekit {

namespace {

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

double norm3(const Pixel& p) { return std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]); }

void add_transposed(const Jacobian3& j, const Pixel& g, Pixel& out) {
  for (std::size_t k = 0; k < 3; ++k) out[k] += j[0][k] * g[0] + j[1][k] * g[1] + j[2][k] * g[2];
}

LossWeights only(const LossWeights& w, bool rgb, bool hsv, bool lab) {
  LossWeights out = LossWeights::zero();
  if (rgb) {
    out.rgb = w.rgb;
    out.cosine = w.cosine;
  }
  if (hsv) out.hsv = w.hsv;
  if (lab) {
    out.lab = w.lab;
    out.ms_ssim = w.ms_ssim;
  }
  return out;
}

const CurlBlockParams& unused_params() {
  static const CurlBlockParams p = CurlBlockParams::identity(2);
  return p;
}

}  // namespace

void LossWeights::validate() const {
  for (double v : {rgb, hsv, lab, ms_ssim, cosine, reg}) {
    if (!std::isfinite(v) || v < 0.0) throw ConfigError("loss weights must be finite and >= 0");
  }
}

LossTarget::LossTarget(Image ref)
    : ref_(std::move(ref)), ref_lab_(rgb_to_lab(ref_)), ref_cone_(hsv_conical(rgb_to_hsv(ref_))) {
  const std::size_t n = ref_.pixel_count();
  ref_norm_.resize(n);
  for (std::size_t i = 0; i < n; ++i) ref_norm_[i] = norm3(ref_.pixel(i));
  if (ms_ssim_scale_count(ref_.height(), ref_.width()) > 0)
    ms_ref_.emplace(plane_of(ref_lab_, 0));
}

LossBreakdown LossTarget::evaluate(const Image& pred, const CurlBlockParams& params,
                                   const LossWeights& w, std::vector<Pixel>* dpred) const {
  require_space(pred, ColorSpace::RGB, "loss");
  require_same_shape(pred, ref_, "loss");
  w.validate();
  const std::size_t n = pred.pixel_count();
  const double inv_n = 1.0 / static_cast<double>(n);
  const double inv_3n = 1.0 / static_cast<double>(3 * n);
  if (dpred) dpred->assign(n, Pixel{0.0, 0.0, 0.0});

  const bool use_hsv = w.hsv != 0.0;
  const bool use_lab_l1 = w.lab != 0.0;
  const bool use_ms = w.ms_ssim != 0.0;
  const bool use_rgb_l1 = w.rgb != 0.0;
  const bool use_cos = w.cosine != 0.0;
  if (use_ms && !ms_ref_) {
    throw DimensionMismatchError("lab loss: image smaller than the MS-SSIM window (" +
                                 std::to_string(pred.height()) + "x" +
                                 std::to_string(pred.width()) + ")");
  }

  double sum_cone_x = 0.0, sum_cone_y = 0.0, sum_lab = 0.0, sum_rgb = 0.0, sum_cos = 0.0;
  Plane pred_l;
  if (use_ms) pred_l = Plane(pred.height(), pred.width());
  std::vector<Jacobian3> lab_jac;
  if (dpred && use_ms) lab_jac.resize(n);

  Jacobian3 jac{};
  for (std::size_t i = 0; i < n; ++i) {
    const Pixel p = pred.pixel(i);
    const Pixel r = ref_.pixel(i);
    Pixel g{0.0, 0.0, 0.0};

    if (use_rgb_l1) {
      for (std::size_t k = 0; k < 3; ++k) {
        const double d = p[k] - r[k];
        sum_rgb += std::abs(d);
        if (dpred) g[k] += w.rgb * sign(d) * inv_3n;
      }
    }

    if (use_cos) {
      const double np = norm3(p);
      const double nr = ref_norm_[i];
      if (np > 0.0 && nr > 0.0) {
        const double dot = p[0] * r[0] + p[1] * r[1] + p[2] * r[2];
        // sqrt(pp * rr) is exact for p == r, so identical pixels give cos = 1.
        const double pp = p[0] * p[0] + p[1] * p[1] + p[2] * p[2];
        const double rr = r[0] * r[0] + r[1] * r[1] + r[2] * r[2];
        sum_cos += dot / std::sqrt(pp * rr);
        if (dpred) {
          // loss contribution is -w_cos * cos / n
          const double scale = -w.cosine * inv_n;
          for (std::size_t k = 0; k < 3; ++k)
            g[k] += scale * (r[k] / (np * nr) - dot * p[k] / (np * np * np * nr));
        }
      }
    }

    if (use_hsv) {
      const Pixel hsv = pixel::rgb_to_hsv(p, dpred ? &jac : nullptr);
      const double angle = 2.0 * std::numbers::pi * hsv[0];
      const double c = std::cos(angle);
      const double s = std::sin(angle);
      const double cx = hsv[1] * hsv[2] * c;
      const double cy = hsv[1] * hsv[2] * s;
      const double dx = cx - ref_cone_.x[i];
      const double dy = cy - ref_cone_.y[i];
      sum_cone_x += std::abs(dx);
      sum_cone_y += std::abs(dy);
      if (dpred) {
        const double gx = w.hsv * sign(dx) * inv_n;
        const double gy = w.hsv * sign(dy) * inv_n;
        const double sv = hsv[1] * hsv[2];
        const double two_pi = 2.0 * std::numbers::pi;
        const Pixel g_hsv = {two_pi * sv * (-s * gx + c * gy), hsv[2] * (c * gx + s * gy),
                             hsv[1] * (c * gx + s * gy)};
        add_transposed(jac, g_hsv, g);
      }
    }

    if (use_lab_l1 || use_ms) {
      const Pixel lab = pixel::rgb_to_lab(p, dpred ? &jac : nullptr);
      if (use_ms) pred_l.values[i] = lab[0];
      Pixel g_lab{0.0, 0.0, 0.0};
      if (use_lab_l1) {
        for (std::size_t k = 0; k < 3; ++k) {
          const double d = lab[k] - ref_lab_.plane(k)[i];
          sum_lab += std::abs(d);
          if (dpred) g_lab[k] = w.lab * sign(d) * inv_3n;
        }
      }
      if (dpred) {
        add_transposed(jac, g_lab, g);
        if (use_ms) lab_jac[i] = jac;
      }
    }

    if (dpred) (*dpred)[i] = g;
  }

  LossBreakdown out;
  if (use_hsv) out.hsv_term = w.hsv * (sum_cone_x * inv_n + sum_cone_y * inv_n);
  if (use_lab_l1) out.lab_l1 = w.lab * (sum_lab * inv_3n);
  if (use_ms) {
    std::vector<double> g_l;
    const double ms = ms_ref_->evaluate(pred_l, dpred ? &g_l : nullptr);
    out.ms_ssim_term = w.ms_ssim * (1.0 - ms);
    if (dpred) {
      for (std::size_t i = 0; i < n; ++i) {
        const double gl = -w.ms_ssim * g_l[i];
        for (std::size_t k = 0; k < 3; ++k) (*dpred)[i][k] += lab_jac[i][0][k] * gl;
      }
    }
  }
  out.lab_term = out.lab_l1 + out.ms_ssim_term;
  if (use_rgb_l1) out.rgb_l1 = w.rgb * (sum_rgb * inv_3n);
  if (use_cos) out.cosine_term = w.cosine * (1.0 - sum_cos / static_cast<double>(n));
  out.rgb_term = out.rgb_l1 + out.cosine_term;
  if (w.reg != 0.0) out.reg_term = reg_loss(params, w);
  out.total = out.hsv_term + out.lab_term + out.rgb_term + out.reg_term;
  return out;
}

double hsv_loss(const Image& pred, const Image& ref, const LossWeights& w) {
  require_same_shape(pred, ref, "hsv_loss");
  return LossTarget(ref).evaluate(pred, unused_params(), only(w, false, true, false)).hsv_term;
}

double lab_loss(const Image& pred, const Image& ref, const LossWeights& w) {
  require_same_shape(pred, ref, "lab_loss");
  return LossTarget(ref).evaluate(pred, unused_params(), only(w, false, false, true)).lab_term;
}

double rgb_loss(const Image& pred, const Image& ref, const LossWeights& w) {
  require_same_shape(pred, ref, "rgb_loss");
  return LossTarget(ref).evaluate(pred, unused_params(), only(w, true, false, false)).rgb_term;
}

double reg_loss(const CurlBlockParams& params, const LossWeights& w) {
  double sum = 0.0;
  for (std::size_t ci = 0; ci < kCurveCount; ++ci) {
    const auto& k = params.curve(ci).knots;
    if (k.size() < 3)
      throw ConfigError(std::string(kCurveNames[ci]) +
                        ": curvature regularizer needs at least 3 knots");
    const double M = static_cast<double>(k.size() - 1);
    for (std::size_t m = 0; m + 2 < k.size(); ++m) {
      const double d0 = M * (k[m + 1] - k[m]);
      const double d1 = M * (k[m + 2] - k[m + 1]);
      sum += (d1 - d0) * (d1 - d0);
    }
  }
  return w.reg * sum;
}

void reg_loss_gradient(const CurlBlockParams& params, const LossWeights& w,
                       std::span<double> grad) {
  std::size_t offset = 0;
  for (std::size_t ci = 0; ci < kCurveCount; ++ci) {
    const auto& k = params.curve(ci).knots;
    if (k.size() < 3)
      throw ConfigError(std::string(kCurveNames[ci]) +
                        ": curvature regularizer needs at least 3 knots");
    const double M = static_cast<double>(k.size() - 1);
    for (std::size_t m = 0; m + 2 < k.size(); ++m) {
      const double e = M * (k[m + 2] - k[m + 1]) - M * (k[m + 1] - k[m]);
      const double g = 2.0 * w.reg * e * M;
      grad[offset + m] += g;
      grad[offset + m + 1] -= 2.0 * g;
      grad[offset + m + 2] += g;
    }
    offset += k.size();
  }
}

LossBreakdown total_loss(const Image& pred, const Image& ref, const CurlBlockParams& params,
                         const LossWeights& w) {
  return LossTarget(ref).evaluate(pred, params, w);
}

}  // namespace curvekit
