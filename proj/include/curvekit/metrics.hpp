#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "curvekit/image.hpp"

namespace curvekit {

// Single-channel H x W plane, row-major.
struct Plane {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> values;

  Plane() = default;
  Plane(std::size_t h, std::size_t w, double fill = 0.0)
      : height(h), width(w), values(h * w, fill) {}
  Plane(std::size_t h, std::size_t w, std::vector<double> v)
      : height(h), width(w), values(std::move(v)) {}

  double& operator()(std::size_t y, std::size_t x) { return values[y * width + x]; }
  double operator()(std::size_t y, std::size_t x) const { return values[y * width + x]; }
};

Plane plane_of(const Image& img, std::size_t channel);

struct SsimConfig {
  std::size_t window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double data_range = 1.0;
};

inline constexpr std::array<double, 5> kMsSsimWeights = {0.0448, 0.2856, 0.3001, 0.2363,
                                                         0.1333};

// Per-scale values below this are clamped (with zero gradient) so the
// fractional powers stay defined.
inline constexpr double kMsSsimFloor = 1e-6;

// Normalized 1-D Gaussian taps.
std::vector<double> gaussian_window(std::size_t size, double sigma);

// Largest scale count <= 5 whose coarsest level still fits the window under
// floor-halving; 0 if even the full-resolution plane is too small.
std::size_t ms_ssim_scale_count(std::size_t height, std::size_t width,
                                const SsimConfig& cfg = {});

// The first `scales` canonical weights, renormalized to sum to 1.
std::vector<double> ms_ssim_weights(std::size_t scales);

// 2x2 box average, dropping a trailing odd row/column.
Plane downsample2(const Plane& p);

// 10 log10(1 / MSE) over all samples; +inf for identical inputs.
double psnr(const Image& pred, const Image& ref);
double psnr(const Plane& pred, const Plane& ref);

// Mean of the Gaussian-window SSIM map (valid positions only).
double ssim(const Plane& pred, const Plane& ref, const SsimConfig& cfg = {});
// Mean over the three channels.
double ssim(const Image& pred, const Image& ref, const SsimConfig& cfg = {});

// Cached reference-side pyramid so repeated evaluations against the same
// target (the fitting loop) skip redundant filtering.
class MsSsimReference {
public:
  explicit MsSsimReference(Plane ref, const SsimConfig& cfg = {});

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t scales() const { return levels_.size(); }

  // MS-SSIM of `pred` against the cached reference. When `grad` is non-null
  // it receives d MS-SSIM / d pred (same shape as pred).
  double evaluate(const Plane& pred, std::vector<double>* grad = nullptr) const;

private:
  struct Level {
    Plane y;
    Plane mu_y;
    Plane syy;  // filtered y^2
  };
  std::size_t height_;
  std::size_t width_;
  SsimConfig cfg_;
  std::vector<double> taps_;
  std::vector<double> weights_;
  std::vector<Level> levels_;
};

// Throws DimensionMismatchError when the planes differ in size or are
// smaller than one window.
double ms_ssim(const Plane& pred, const Plane& ref, const SsimConfig& cfg = {});

}  // namespace curvekit
