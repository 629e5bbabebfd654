#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "curvekit/colorspace.hpp"
#include "curvekit/curve.hpp"
#include "curvekit/image.hpp"
#include "curvekit/metrics.hpp"

namespace curvekit {

struct LossWeights {
  double rgb = 1.0;
  double hsv = 1.0;
  double lab = 1.0;
  double ms_ssim = 1.0;
  double cosine = 1.0;
  double reg = 1e-4;

  static LossWeights zero() { return {0.0, 0.0, 0.0, 0.0, 0.0, 0.0}; }

  // Throws ConfigError on a negative or non-finite weight.
  void validate() const;

  friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

// Weighted loss terms. The lab/rgb terms are further split into their two
// weighted parts for reporting.
struct LossBreakdown {
  double hsv_term = 0.0;
  double lab_term = 0.0;
  double rgb_term = 0.0;
  double reg_term = 0.0;
  double total = 0.0;

  double lab_l1 = 0.0;
  double ms_ssim_term = 0.0;
  double rgb_l1 = 0.0;
  double cosine_term = 0.0;

  friend bool operator==(const LossBreakdown&, const LossBreakdown&) = default;
};

double hsv_loss(const Image& pred, const Image& ref, const LossWeights& w);
double lab_loss(const Image& pred, const Image& ref, const LossWeights& w);
double rgb_loss(const Image& pred, const Image& ref, const LossWeights& w);

// Curvature penalty over all ten curves; every curve needs >= 3 knots.
double reg_loss(const CurlBlockParams& params, const LossWeights& w);
// Adds d reg_loss / d knot into `grad`, laid out in canonical curve order.
void reg_loss_gradient(const CurlBlockParams& params, const LossWeights& w,
                       std::span<double> grad);

LossBreakdown total_loss(const Image& pred, const Image& ref, const CurlBlockParams& params,
                         const LossWeights& w);

// Reference-side quantities cached for repeated evaluation against one target.
class LossTarget {
public:
  explicit LossTarget(Image ref);

  const Image& reference() const { return ref_; }

  // Full breakdown. When `dpred` is non-null it receives, per pixel, the
  // gradient of the data terms (everything but the regularizer) with respect
  // to the predicted RGB values.
  LossBreakdown evaluate(const Image& pred, const CurlBlockParams& params, const LossWeights& w,
                         std::vector<Pixel>* dpred = nullptr) const;

private:
  Image ref_;
  Image ref_lab_;
  ConicalPlanes ref_cone_;
  std::vector<double> ref_norm_;
  std::optional<MsSsimReference> ms_ref_;
};

}  // namespace curvekit
