#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "curvekit/curve.hpp"
#include "curvekit/image.hpp"
#include "curvekit/loss.hpp"

namespace curvekit {

// All knots of a block flattened in canonical curve order (lab L,a,b; rgb
// R,G,B; hsv h->h, s->s, h->s, v->v), low-to-high within each curve.
using ParamVector = std::vector<double>;

ParamVector flatten(const CurlBlockParams& params);
// Inverse of flatten for uniform knot counts; length must be 10 * (M + 1).
CurlBlockParams unflatten(std::span<const double> values, const StageOrder& order, bool skip);
// Writes `values` into the knots of `params`, keeping its layout.
void assign_knots(CurlBlockParams& params, std::span<const double> values);

struct GradResult {
  LossBreakdown loss;
  ParamVector grad;
};

// Loss of apply_block(input) against the target plus its exact gradient with
// respect to every knot (subgradients at kinks as documented in the README).
GradResult loss_and_grad(const Image& input, const LossTarget& target,
                         const CurlBlockParams& params, const LossWeights& w);

GradResult loss_and_grad(const Image& input, const Image& ref, std::span<const double> params,
                         const StageOrder& order, bool skip, const LossWeights& w);

// Central differences of `f` at `x`, one coordinate at a time.
std::vector<double> finite_diff(const std::function<double(std::span<const double>)>& f,
                                std::span<const double> x, double step);

// Central-difference gradient of total_loss(apply_block(input), ref); only
// forward evaluations, no analytic derivative code.
ParamVector finite_diff_grad(const Image& input, const Image& ref, std::span<const double> params,
                             const StageOrder& order, bool skip, const LossWeights& w,
                             double step);

// Flags coordinates whose +-step perturbation moves some pixel across a
// piecewise boundary of the block (curve segment, clamp, hue wrap, colour
// conversion branch or HSV tie) or whose curve sees a domain value exactly on
// a knot. With `ref` (and the loss weights), crossings of block boundaries and
// of the L1 terms' sign changes are flagged only when their predicted shift of
// the central difference exceeds 3e-4 of the data-term slope. The prediction
// uses the loss gradient with respect to the output and the crossing pixels'
// second differences.
std::vector<bool> kink_mask(const Image& input, std::span<const double> params,
                            const StageOrder& order, bool skip, double step,
                            const Image* ref = nullptr, const LossWeights& w = {});

}  // namespace curvekit
