#include "curvekit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace curvekit {

namespace {

// Separable "valid" filtering: out is (h - n + 1) x (w - n + 1).
Plane filter_valid(const Plane& p, std::span<const double> taps) {
  const std::size_t n = taps.size();
  const std::size_t ow = p.width - n + 1;
  const std::size_t oh = p.height - n + 1;
  Plane tmp(p.height, ow);
  for (std::size_t y = 0; y < p.height; ++y) {
    const double* row = &p.values[y * p.width];
    double* dst = &tmp.values[y * ow];
    for (std::size_t x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (std::size_t t = 0; t < n; ++t) acc += taps[t] * row[x + t];
      dst[x] = acc;
    }
  }
  Plane out(oh, ow);
  for (std::size_t y = 0; y < oh; ++y) {
    double* dst = &out.values[y * ow];
    for (std::size_t t = 0; t < n; ++t) {
      const double* src = &tmp.values[(y + t) * ow];
      const double g = taps[t];
      for (std::size_t x = 0; x < ow; ++x) dst[x] += g * src[x];
    }
  }
  return out;
}

// Transpose of filter_valid, mapping an output-shaped gradient back to h x w.
Plane filter_valid_adjoint(const Plane& g, std::span<const double> taps, std::size_t h,
                           std::size_t w) {
  const std::size_t n = taps.size();
  const std::size_t ow = g.width;
  Plane tmp(h, ow);
  for (std::size_t y = 0; y < g.height; ++y) {
    const double* src = &g.values[y * ow];
    for (std::size_t t = 0; t < n; ++t) {
      double* dst = &tmp.values[(y + t) * ow];
      const double k = taps[t];
      for (std::size_t x = 0; x < ow; ++x) dst[x] += k * src[x];
    }
  }
  Plane out(h, w);
  for (std::size_t y = 0; y < h; ++y) {
    const double* src = &tmp.values[y * ow];
    double* dst = &out.values[y * w];
    for (std::size_t x = 0; x < ow; ++x) {
      const double v = src[x];
      for (std::size_t t = 0; t < n; ++t) dst[x + t] += taps[t] * v;
    }
  }
  return out;
}

Plane product(const Plane& a, const Plane& b) {
  Plane out(a.height, a.width);
  for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] = a.values[i] * b.values[i];
  return out;
}

Plane upsample2_adjoint(const Plane& coarse, std::size_t h, std::size_t w) {
  Plane fine(h, w);
  for (std::size_t y = 0; y < coarse.height; ++y) {
    for (std::size_t x = 0; x < coarse.width; ++x) {
      const double g = 0.25 * coarse(y, x);
      fine(2 * y, 2 * x) += g;
      fine(2 * y, 2 * x + 1) += g;
      fine(2 * y + 1, 2 * x) += g;
      fine(2 * y + 1, 2 * x + 1) += g;
    }
  }
  return fine;
}

void require_same_plane_shape(const Plane& a, const Plane& b, const char* op) {
  if (a.height != b.height || a.width != b.width)
    throw DimensionMismatchError(std::string(op) + ": plane sizes differ");
}

}  // namespace

Plane plane_of(const Image& img, std::size_t channel) {
  const auto src = img.plane(channel);
  return Plane(img.height(), img.width(), std::vector<double>(src.begin(), src.end()));
}

std::vector<double> gaussian_window(std::size_t size, double sigma) {
  std::vector<double> taps(size);
  const double centre = (static_cast<double>(size) - 1.0) / 2.0;
  for (std::size_t i = 0; i < size; ++i) {
    const double d = static_cast<double>(i) - centre;
    taps[i] = std::exp(-(d * d) / (2.0 * sigma * sigma));
  }
  const double sum = std::accumulate(taps.begin(), taps.end(), 0.0);
  for (double& t : taps) t /= sum;
  return taps;
}

std::size_t ms_ssim_scale_count(std::size_t height, std::size_t width, const SsimConfig& cfg) {
  std::size_t side = std::min(height, width);
  std::size_t scales = 0;
  while (scales < kMsSsimWeights.size() && side >= cfg.window) {
    ++scales;
    side /= 2;
  }
  return scales;
}

std::vector<double> ms_ssim_weights(std::size_t scales) {
  std::vector<double> w(kMsSsimWeights.begin(), kMsSsimWeights.begin() + scales);
  const double sum = std::accumulate(w.begin(), w.end(), 0.0);
  for (double& v : w) v /= sum;
  return w;
}

Plane downsample2(const Plane& p) {
  Plane out(p.height / 2, p.width / 2);
  for (std::size_t y = 0; y < out.height; ++y) {
    for (std::size_t x = 0; x < out.width; ++x) {
      out(y, x) = 0.25 * (p(2 * y, 2 * x) + p(2 * y, 2 * x + 1) + p(2 * y + 1, 2 * x) +
                          p(2 * y + 1, 2 * x + 1));
    }
  }
  return out;
}

double psnr(const Plane& pred, const Plane& ref) {
  require_same_plane_shape(pred, ref, "psnr");
  double se = 0.0;
  for (std::size_t i = 0; i < pred.values.size(); ++i) {
    const double d = pred.values[i] - ref.values[i];
    se += d * d;
  }
  if (se == 0.0) return std::numeric_limits<double>::infinity();
  const double mse = se / static_cast<double>(pred.values.size());
  return -10.0 * std::log10(mse);
}

double psnr(const Image& pred, const Image& ref) {
  require_same_shape(pred, ref, "psnr");
  const auto a = pred.data();
  const auto b = ref.data();
  double se = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    se += d * d;
  }
  if (se == 0.0) return std::numeric_limits<double>::infinity();
  return -10.0 * std::log10(se / static_cast<double>(a.size()));
}

double ssim(const Plane& pred, const Plane& ref, const SsimConfig& cfg) {
  require_same_plane_shape(pred, ref, "ssim");
  if (std::min(pred.height, pred.width) < cfg.window)
    throw DimensionMismatchError("ssim: image smaller than the " + std::to_string(cfg.window) +
                                 "-pixel window");
  const auto taps = gaussian_window(cfg.window, cfg.sigma);
  const double c1 = std::pow(cfg.k1 * cfg.data_range, 2);
  const double c2 = std::pow(cfg.k2 * cfg.data_range, 2);
  const Plane mx = filter_valid(pred, taps);
  const Plane my = filter_valid(ref, taps);
  const Plane sxx = filter_valid(product(pred, pred), taps);
  const Plane syy = filter_valid(product(ref, ref), taps);
  const Plane sxy = filter_valid(product(pred, ref), taps);
  double sum = 0.0;
  for (std::size_t i = 0; i < mx.values.size(); ++i) {
    const double ux = mx.values[i];
    const double uy = my.values[i];
    const double vx = sxx.values[i] - ux * ux;
    const double vy = syy.values[i] - uy * uy;
    const double cxy = sxy.values[i] - ux * uy;
    const double l = (2.0 * ux * uy + c1) / (ux * ux + uy * uy + c1);
    const double cs = (2.0 * cxy + c2) / (vx + vy + c2);
    sum += l * cs;
  }
  return sum / static_cast<double>(mx.values.size());
}

double ssim(const Image& pred, const Image& ref, const SsimConfig& cfg) {
  require_same_shape(pred, ref, "ssim");
  double total = 0.0;
  for (std::size_t c = 0; c < 3; ++c) total += ssim(plane_of(pred, c), plane_of(ref, c), cfg);
  return total / 3.0;
}

MsSsimReference::MsSsimReference(Plane ref, const SsimConfig& cfg)
    : height_(ref.height), width_(ref.width), cfg_(cfg), taps_(gaussian_window(cfg.window, cfg.sigma)) {
  const std::size_t scales = ms_ssim_scale_count(ref.height, ref.width, cfg);
  if (scales == 0)
    throw DimensionMismatchError("ms_ssim: image smaller than the " +
                                 std::to_string(cfg.window) + "-pixel window");
  weights_ = ms_ssim_weights(scales);
  Plane y = std::move(ref);
  for (std::size_t j = 0; j < scales; ++j) {
    if (j > 0) y = downsample2(levels_.back().y);
    Level level;
    level.mu_y = filter_valid(y, taps_);
    level.syy = filter_valid(product(y, y), taps_);
    level.y = std::move(y);
    levels_.push_back(std::move(level));
  }
}

double MsSsimReference::evaluate(const Plane& pred, std::vector<double>* grad) const {
  if (pred.height != height_ || pred.width != width_)
    throw DimensionMismatchError("ms_ssim: plane sizes differ");
  const double c1 = std::pow(cfg_.k1 * cfg_.data_range, 2);
  const double c2 = std::pow(cfg_.k2 * cfg_.data_range, 2);
  const std::size_t scales = levels_.size();

  struct Partials {
    Plane g_mx, g_sxx, g_sxy;  // d value / d (filtered x, x^2, xy), per position
  };
  std::vector<Plane> xs;
  std::vector<Partials> partials(grad ? scales : 0);
  std::vector<double> values(scales);
  std::vector<bool> clamped(scales, false);

  Plane x = pred;
  for (std::size_t j = 0; j < scales; ++j) {
    if (j > 0) x = downsample2(xs.back());
    const Level& lv = levels_[j];
    const bool last = j + 1 == scales;
    const Plane mx = filter_valid(x, taps_);
    const Plane sxx = filter_valid(product(x, x), taps_);
    const Plane sxy = filter_valid(product(x, lv.y), taps_);
    const std::size_t count = mx.values.size();
    const double inv_n = 1.0 / static_cast<double>(count);
    Partials* pp = grad ? &partials[j] : nullptr;
    if (pp) {
      pp->g_mx = Plane(mx.height, mx.width);
      pp->g_sxx = Plane(mx.height, mx.width);
      pp->g_sxy = Plane(mx.height, mx.width);
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
      const double ux = mx.values[i];
      const double uy = lv.mu_y.values[i];
      const double vx = sxx.values[i] - ux * ux;
      const double vy = lv.syy.values[i] - uy * uy;
      const double cxy = sxy.values[i] - ux * uy;
      const double a = 2.0 * cxy + c2;
      const double b = vx + vy + c2;
      const double cs = a / b;
      const double dcs_dcxy = 2.0 / b;
      const double dcs_dvx = -a / (b * b);
      double d_ux = 0.0;
      double d_vx = 0.0;
      double d_cxy = 0.0;
      if (last) {
        const double p = 2.0 * ux * uy + c1;
        const double q = ux * ux + uy * uy + c1;
        const double l = p / q;
        sum += l * cs;
        if (pp) {
          const double dl_dux = (2.0 * uy * q - p * 2.0 * ux) / (q * q);
          d_ux = dl_dux * cs;
          d_vx = l * dcs_dvx;
          d_cxy = l * dcs_dcxy;
        }
      } else {
        sum += cs;
        if (pp) {
          d_vx = dcs_dvx;
          d_cxy = dcs_dcxy;
        }
      }
      if (pp) {
        // vx = sxx - ux^2 and cxy = sxy - ux uy
        pp->g_mx.values[i] = inv_n * (d_ux - 2.0 * ux * d_vx - uy * d_cxy);
        pp->g_sxx.values[i] = inv_n * d_vx;
        pp->g_sxy.values[i] = inv_n * d_cxy;
      }
    }
    values[j] = sum / static_cast<double>(count);
    if (values[j] < kMsSsimFloor) {
      values[j] = kMsSsimFloor;
      clamped[j] = true;
    }
    xs.push_back(std::move(x));
    x = Plane();
  }

  double ms = 1.0;
  for (std::size_t j = 0; j < scales; ++j) ms *= std::pow(values[j], weights_[j]);

  if (grad) {
    Plane carry;
    for (std::size_t jj = scales; jj-- > 0;) {
      const Plane& xj = xs[jj];
      Plane g(xj.height, xj.width);
      if (!clamped[jj]) {
        const double coef = ms * weights_[jj] / values[jj];
        const Partials& pp = partials[jj];
        const Plane a = filter_valid_adjoint(pp.g_mx, taps_, xj.height, xj.width);
        const Plane b = filter_valid_adjoint(pp.g_sxx, taps_, xj.height, xj.width);
        const Plane c = filter_valid_adjoint(pp.g_sxy, taps_, xj.height, xj.width);
        const Plane& yj = levels_[jj].y;
        for (std::size_t i = 0; i < g.values.size(); ++i) {
          g.values[i] =
              coef * (a.values[i] + 2.0 * xj.values[i] * b.values[i] + yj.values[i] * c.values[i]);
        }
      }
      if (jj + 1 < scales) {
        const Plane up = upsample2_adjoint(carry, xj.height, xj.width);
        for (std::size_t i = 0; i < g.values.size(); ++i) g.values[i] += up.values[i];
      }
      carry = std::move(g);
    }
    *grad = std::move(carry.values);
  }
  return ms;
}

double ms_ssim(const Plane& pred, const Plane& ref, const SsimConfig& cfg) {
  require_same_plane_shape(pred, ref, "ms_ssim");
  return MsSsimReference(ref, cfg).evaluate(pred);
}

}  // namespace curvekit
