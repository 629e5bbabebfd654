#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "curvekit/curve.hpp"
#include "curvekit/image.hpp"
#include "curvekit/loss.hpp"

namespace curvekit {

enum class Optimizer { GradientDescent, Adam };

struct FitConfig {
  std::size_t iterations = 500;
  double learning_rate = 1e-2;
  Optimizer optimizer = Optimizer::Adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t segments = kDefaultSegments;  // knots start at identity
  std::uint64_t seed = 0;
  std::size_t log_every = 10;
  std::size_t threads = 1;  // per-pair evaluation workers in fit_global
  // Stages whose curves stay at identity and receive no updates.
  std::vector<ColorSpace> frozen_stages;

  void validate() const;
};

struct TraceEntry {
  std::size_t iteration = 0;
  LossBreakdown loss;       // mean over pairs at this iteration's parameters
  double best_total = 0.0;  // best mean total seen so far
  double psnr = 0.0;        // mean output-vs-reference PSNR
  double ssim = 0.0;        // mean output-vs-reference SSIM (NaN if too small)
};

// The last trace entry describes the returned (best) parameters and carries
// iteration == cfg.iterations.
struct FitReport {
  std::vector<TraceEntry> trace;
  CurlBlockParams params;
  std::size_t best_iteration = 0;
  double wall_seconds = 0.0;

  const TraceEntry& final_entry() const { return trace.back(); }
};

struct ImagePair {
  Image input;
  Image reference;
};

struct FitResult {
  CurlBlockParams params;
  FitReport report;
};

FitResult fit_image(const Image& input, const Image& ref, const FitConfig& cfg,
                    const LossWeights& w, const StageOrder& order = kDefaultOrder,
                    bool skip = false);

// One shared parameter set minimizing the mean loss over all pairs.
FitResult fit_global(const std::vector<ImagePair>& pairs, const FitConfig& cfg,
                     const LossWeights& w, const StageOrder& order = kDefaultOrder,
                     bool skip = false);

struct OrderRow {
  StageOrder order;
  double psnr = 0.0;
  double ssim = 0.0;
  double loss = 0.0;
  double identity_psnr = 0.0;  // block with identity curves, same ordering
};

std::vector<OrderRow> sweep_order(const std::vector<ImagePair>& pairs, const FitConfig& cfg,
                                  const LossWeights& w);

struct AblationVariant {
  std::string label;
  LossWeights weights;
  std::vector<ColorSpace> frozen_stages;
};

struct AblationRow {
  std::string label;
  double psnr = 0.0;
  double ssim = 0.0;
  double loss = 0.0;
};

std::vector<AblationRow> ablate_loss(const std::vector<ImagePair>& pairs, const FitConfig& cfg,
                                     const std::vector<AblationVariant>& variants,
                                     const StageOrder& order = kDefaultOrder);

// Parses a '+'-joined term list such as "lab+hsv+rgb,no-cos+reg" (or "all")
// into weights: terms not listed are zeroed, listed ones keep `base` values.
// Terms: lab (L1 + MS-SSIM), hsv, rgb (L1 + cosine), rgb,no-cos, reg.
AblationVariant loss_subset(const std::string& label, const LossWeights& base = {});

// ';'-separated list of subsets; "default" expands to default_loss_subsets().
std::vector<AblationVariant> parse_loss_subsets(const std::string& spec,
                                                const LossWeights& base = {});

// The ten term combinations of the loss ablation table, ending with "all".
std::vector<AblationVariant> default_loss_subsets(const LossWeights& base = {});

// Single-colour-space blocks (other stages frozen at identity) plus the full block.
std::vector<AblationVariant> single_space_variants(const LossWeights& base = {});

}  // namespace curvekit
