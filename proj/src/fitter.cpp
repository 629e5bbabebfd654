#include "curvekit/fitter.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>
#include <thread>

#include "curvekit/gradient.hpp"
#include "curvekit/metrics.hpp"

namespace curvekit {

namespace {

struct Evaluation {
  LossBreakdown loss;
  ParamVector grad;
};

LossBreakdown& operator+=(LossBreakdown& a, const LossBreakdown& b) {
  a.hsv_term += b.hsv_term;
  a.lab_term += b.lab_term;
  a.rgb_term += b.rgb_term;
  a.reg_term += b.reg_term;
  a.total += b.total;
  a.lab_l1 += b.lab_l1;
  a.ms_ssim_term += b.ms_ssim_term;
  a.rgb_l1 += b.rgb_l1;
  a.cosine_term += b.cosine_term;
  return a;
}

LossBreakdown scaled(LossBreakdown a, double s) {
  for (double* f : {&a.hsv_term, &a.lab_term, &a.rgb_term, &a.reg_term, &a.total, &a.lab_l1,
                    &a.ms_ssim_term, &a.rgb_l1, &a.cosine_term})
    *f *= s;
  return a;
}

void check_finite(const LossBreakdown& b, std::size_t iteration) {
  const std::pair<const char*, double> terms[] = {
      {"hsv", b.hsv_term},         {"lab L1", b.lab_l1}, {"ms-ssim", b.ms_ssim_term},
      {"rgb L1", b.rgb_l1},        {"cosine", b.cosine_term}, {"reg", b.reg_term}};
  for (const auto& [name, value] : terms) {
    if (!std::isfinite(value)) {
      std::ostringstream msg;
      msg << "non-finite " << name << " loss term (" << value << ") at iteration " << iteration;
      throw Error(msg.str());
    }
  }
}

template <typename Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn&& fn) {
  threads = std::clamp<std::size_t>(threads, 1, count);
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(threads);
  {
    std::vector<std::jthread> workers;
    for (std::size_t t = 0; t < threads; ++t) {
      workers.emplace_back([&, t] {
        try {
          for (std::size_t i = t; i < count; i += threads) fn(i);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

class Problem {
public:
  Problem(const std::vector<ImagePair>& pairs, const LossWeights& w, std::size_t threads)
      : pairs_(pairs), w_(w), threads_(threads) {
    if (pairs.empty()) throw ConfigError("fit needs at least one image pair");
    targets_.reserve(pairs.size());
    for (const auto& pair : pairs) {
      require_space(pair.input, ColorSpace::RGB, "fit");
      require_same_shape(pair.input, pair.reference, "fit");
      targets_.emplace_back(pair.reference);
    }
  }

  // Mean loss and gradient over pairs, reduced in pair order.
  Evaluation evaluate(const CurlBlockParams& params) const {
    std::vector<GradResult> parts(pairs_.size());
    parallel_for(pairs_.size(), threads_, [&](std::size_t i) {
      parts[i] = loss_and_grad(pairs_[i].input, targets_[i], params, w_);
    });
    Evaluation e{parts[0].loss, parts[0].grad};
    for (std::size_t i = 1; i < parts.size(); ++i) {
      e.loss += parts[i].loss;
      for (std::size_t j = 0; j < e.grad.size(); ++j) e.grad[j] += parts[i].grad[j];
    }
    const double inv = 1.0 / static_cast<double>(parts.size());
    if (parts.size() > 1) {
      e.loss = scaled(e.loss, inv);
      for (double& g : e.grad) g *= inv;
    }
    return e;
  }

  LossBreakdown loss(const CurlBlockParams& params) const {
    std::vector<LossBreakdown> parts(pairs_.size());
    parallel_for(pairs_.size(), threads_, [&](std::size_t i) {
      parts[i] = targets_[i].evaluate(apply_block(pairs_[i].input, params), params, w_);
    });
    LossBreakdown total = parts[0];
    for (std::size_t i = 1; i < parts.size(); ++i) total += parts[i];
    return parts.size() > 1 ? scaled(total, 1.0 / static_cast<double>(parts.size())) : total;
  }

  std::pair<double, double> quality(const CurlBlockParams& params) const {
    std::vector<std::pair<double, double>> parts(pairs_.size());
    parallel_for(pairs_.size(), threads_, [&](std::size_t i) {
      const Image out = apply_block(pairs_[i].input, params);
      const Image& ref = pairs_[i].reference;
      const double s = std::min(out.height(), out.width()) >= SsimConfig{}.window
                           ? ssim(out, ref)
                           : std::numeric_limits<double>::quiet_NaN();
      parts[i] = {psnr(out, ref), s};
    });
    double p = 0.0, s = 0.0;
    for (const auto& [pp, ss] : parts) {
      p += pp;
      s += ss;
    }
    const double n = static_cast<double>(parts.size());
    return {p / n, s / n};
  }

private:
  const std::vector<ImagePair>& pairs_;
  LossWeights w_;
  std::size_t threads_;
  std::vector<LossTarget> targets_;
};

std::vector<bool> frozen_mask(const CurlBlockParams& params,
                              const std::vector<ColorSpace>& frozen) {
  std::vector<bool> mask;
  for (std::size_t i = 0; i < kCurveCount; ++i) {
    const ColorSpace space = i < 3 ? ColorSpace::LAB : (i < 6 ? ColorSpace::RGB : ColorSpace::HSV);
    const bool f = std::find(frozen.begin(), frozen.end(), space) != frozen.end();
    mask.insert(mask.end(), params.curve(i).knots.size(), f);
  }
  return mask;
}

TraceEntry make_entry(const Problem& problem, const CurlBlockParams& params, std::size_t iteration,
                      const LossBreakdown& loss, double best) {
  const auto [p, s] = problem.quality(params);
  return TraceEntry{iteration, loss, best, p, s};
}

}  // namespace

void FitConfig::validate() const {
  if (iterations < 1) throw ConfigError("iterations must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
    throw ConfigError("learning rate must be positive");
  if (log_every < 1) throw ConfigError("log_every must be >= 1");
  if (segments < 1) throw ConfigError("curves need at least one segment");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(epsilon > 0.0))
    throw ConfigError("invalid adaptive-moment hyperparameters");
}

FitResult fit_global(const std::vector<ImagePair>& pairs, const FitConfig& cfg,
                     const LossWeights& w, const StageOrder& order, bool skip) {
  const auto start = std::chrono::steady_clock::now();
  cfg.validate();
  w.validate();
  validate_order(order);
  const Problem problem(pairs, w, cfg.threads);

  CurlBlockParams params = CurlBlockParams::identity(cfg.segments);
  params.order = order;
  params.skip = skip;
  ParamVector x = flatten(params);
  const std::vector<bool> frozen = frozen_mask(params, cfg.frozen_stages);
  std::vector<double> m1(x.size(), 0.0), m2(x.size(), 0.0);

  FitReport report;
  CurlBlockParams best = params;
  double best_total = std::numeric_limits<double>::infinity();
  LossBreakdown best_loss;

  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    Evaluation e = problem.evaluate(params);
    check_finite(e.loss, it);
    if (e.loss.total < best_total) {
      best_total = e.loss.total;
      best_loss = e.loss;
      best = params;
      report.best_iteration = it;
    }
    if (it % cfg.log_every == 0)
      report.trace.push_back(make_entry(problem, params, it, e.loss, best_total));

    const double t = static_cast<double>(it + 1);
    const double bias1 = 1.0 - std::pow(cfg.beta1, t);
    const double bias2 = 1.0 - std::pow(cfg.beta2, t);
    for (std::size_t j = 0; j < x.size(); ++j) {
      if (frozen[j]) continue;
      const double g = e.grad[j];
      double step = 0.0;
      if (cfg.optimizer == Optimizer::Adam) {
        m1[j] = cfg.beta1 * m1[j] + (1.0 - cfg.beta1) * g;
        m2[j] = cfg.beta2 * m2[j] + (1.0 - cfg.beta2) * g * g;
        step = cfg.learning_rate * (m1[j] / bias1) / (std::sqrt(m2[j] / bias2) + cfg.epsilon);
      } else {
        step = cfg.learning_rate * g;
      }
      // Knots are scale factors; project back onto [0, inf).
      x[j] = std::max(0.0, x[j] - step);
    }
    assign_knots(params, x);
  }

  const LossBreakdown last = problem.loss(params);
  check_finite(last, cfg.iterations);
  if (last.total < best_total) {
    best_total = last.total;
    best_loss = last;
    best = params;
    report.best_iteration = cfg.iterations;
  }
  report.trace.push_back(make_entry(problem, best, cfg.iterations, best_loss, best_total));
  report.params = best;
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return FitResult{best, std::move(report)};
}

FitResult fit_image(const Image& input, const Image& ref, const FitConfig& cfg,
                    const LossWeights& w, const StageOrder& order, bool skip) {
  return fit_global({ImagePair{input, ref}}, cfg, w, order, skip);
}

std::vector<OrderRow> sweep_order(const std::vector<ImagePair>& pairs, const FitConfig& cfg,
                                  const LossWeights& w) {
  std::vector<OrderRow> rows;
  for (const StageOrder& order : stage_permutations()) {
    const FitResult fit = fit_global(pairs, cfg, w, order, false);
    const TraceEntry& fin = fit.report.final_entry();
    CurlBlockParams identity = CurlBlockParams::identity(cfg.segments);
    identity.order = order;
    double id_psnr = 0.0;
    for (const auto& pair : pairs) id_psnr += psnr(apply_block(pair.input, identity), pair.reference);
    rows.push_back(
        OrderRow{order, fin.psnr, fin.ssim, fin.loss.total, id_psnr / static_cast<double>(pairs.size())});
  }
  return rows;
}

std::vector<AblationRow> ablate_loss(const std::vector<ImagePair>& pairs, const FitConfig& cfg,
                                     const std::vector<AblationVariant>& variants,
                                     const StageOrder& order) {
  std::vector<AblationRow> rows;
  for (const auto& v : variants) {
    FitConfig c = cfg;
    c.frozen_stages = v.frozen_stages;
    const FitResult fit = fit_global(pairs, c, v.weights, order, false);
    const TraceEntry& fin = fit.report.final_entry();
    rows.push_back(AblationRow{v.label, fin.psnr, fin.ssim, fin.loss.total});
  }
  return rows;
}

AblationVariant loss_subset(const std::string& label, const LossWeights& base) {
  if (label == "all") return AblationVariant{label, base, {}};
  LossWeights w = LossWeights::zero();
  std::stringstream ss(label);
  std::string term;
  bool any = false;
  while (std::getline(ss, term, '+')) {
    if (term == "lab") {
      w.lab = base.lab;
      w.ms_ssim = base.ms_ssim;
    } else if (term == "hsv") {
      w.hsv = base.hsv;
    } else if (term == "rgb") {
      w.rgb = base.rgb;
      w.cosine = base.cosine;
    } else if (term == "rgb,no-cos" || term == "rgb-nocos") {
      w.rgb = base.rgb;
    } else if (term == "reg") {
      w.reg = base.reg;
    } else {
      throw ConfigError("unknown loss term '" + term + "' in subset '" + label + "'");
    }
    any = true;
  }
  if (!any) throw ConfigError("empty loss subset");
  return AblationVariant{label, w, {}};
}

std::vector<AblationVariant> parse_loss_subsets(const std::string& spec, const LossWeights& base) {
  std::vector<AblationVariant> out;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ';')) {
    if (item.empty()) continue;
    if (item == "default") {
      for (auto& v : default_loss_subsets(base)) out.push_back(std::move(v));
    } else {
      out.push_back(loss_subset(item, base));
    }
  }
  if (out.empty()) throw ConfigError("no loss subsets given");
  return out;
}

std::vector<AblationVariant> default_loss_subsets(const LossWeights& base) {
  std::vector<AblationVariant> out;
  for (const char* label :
       {"lab+reg", "rgb+reg", "rgb,no-cos+reg", "hsv+reg", "hsv+rgb+reg", "lab+hsv+reg",
        "lab+rgb+reg", "lab+hsv+rgb", "lab+hsv+rgb,no-cos+reg", "all"})
    out.push_back(loss_subset(label, base));
  return out;
}

std::vector<AblationVariant> single_space_variants(const LossWeights& base) {
  using enum ColorSpace;
  return {AblationVariant{"RGB only", base, {LAB, HSV}},
          AblationVariant{"HSV only", base, {LAB, RGB}},
          AblationVariant{"LAB only", base, {RGB, HSV}},
          AblationVariant{"LAB+RGB+HSV", base, {}}};
}

}  // namespace curvekit
