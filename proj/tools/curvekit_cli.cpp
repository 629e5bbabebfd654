#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "curvekit/curve.hpp"
#include "curvekit/fitter.hpp"
#include "curvekit/io.hpp"
#include "curvekit/loss.hpp"
#include "curvekit/metrics.hpp"

using namespace curvekit;

namespace {

struct FitOptions {
  std::size_t iters = 500;
  double lr = 1e-2;
  std::uint64_t seed = 0;
  std::string order = "LAB,RGB,HSV";
  std::string optimizer = "adam";
  std::size_t knots = kDefaultSegments;
  std::size_t threads = 1;
  std::size_t log_every = 10;
  bool skip = false;
  std::string trace;
  LossWeights w;

  FitConfig config() const {
    FitConfig cfg;
    cfg.iterations = iters;
    cfg.learning_rate = lr;
    cfg.seed = seed;
    cfg.segments = knots;
    cfg.threads = threads;
    cfg.log_every = log_every;
    if (optimizer == "adam")
      cfg.optimizer = Optimizer::Adam;
    else if (optimizer == "gd")
      cfg.optimizer = Optimizer::GradientDescent;
    else
      throw ConfigError("unknown optimizer '" + optimizer + "' (expected adam or gd)");
    cfg.validate();
    w.validate();
    return cfg;
  }
};

void add_fit_options(CLI::App* app, FitOptions& o, bool with_order) {
  app->add_option("--iters", o.iters, "Optimizer iterations")->capture_default_str();
  app->add_option("--lr", o.lr, "Learning rate")->capture_default_str();
  app->add_option("--seed", o.seed, "Seed recorded in provenance")->capture_default_str();
  if (with_order) {
    app->add_option("--order", o.order, "Stage ordering, e.g. LAB,RGB,HSV")->capture_default_str();
    app->add_flag("--skip", o.skip, "Add the block input to its output");
  }
  app->add_option("--optimizer", o.optimizer, "adam or gd")->capture_default_str();
  app->add_option("--knots", o.knots, "Curve segments M (M + 1 knots)")->capture_default_str();
  app->add_option("--threads", o.threads, "Per-pair worker threads")->capture_default_str();
  app->add_option("--log-every", o.log_every, "Trace interval")->capture_default_str();
  app->add_option("--trace", o.trace, "Write the fitting trace as CSV");
  app->add_option("--w-rgb", o.w.rgb)->capture_default_str();
  app->add_option("--w-hsv", o.w.hsv)->capture_default_str();
  app->add_option("--w-lab", o.w.lab)->capture_default_str();
  app->add_option("--w-msssim", o.w.ms_ssim)->capture_default_str();
  app->add_option("--w-cosine", o.w.cosine)->capture_default_str();
  app->add_option("--w-reg", o.w.reg)->capture_default_str();
}

std::vector<ImagePair> load_pairs(const std::string& manifest) {
  std::vector<ImagePair> pairs;
  for (const auto& [in, ref] : read_manifest(manifest)) {
    ImagePair p{load_image(in), load_image(ref)};
    require_same_shape(p.input, p.reference, in.string());
    pairs.push_back(std::move(p));
  }
  return pairs;
}

std::vector<std::string> pair_hashes(const std::string& manifest) {
  std::vector<std::string> hashes;
  for (const auto& [in, ref] : read_manifest(manifest)) {
    hashes.push_back(sha256_file(in));
    hashes.push_back(sha256_file(ref));
  }
  return hashes;
}

void write_trace(const FitOptions& o, const FitReport& report) {
  if (o.trace.empty()) return;
  std::ostringstream ss;
  write_trace_csv(report, ss);
  write_text_file(o.trace, ss.str());
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty())
    std::cout << text;
  else
    write_text_file(path, text);
}

// Numbers on stdout always carry a decimal point or are inf/nan.
std::string decimal(double v) {
  std::string s = format_number(v);
  if (s.find_first_of(".eni") == std::string::npos) s += ".0";
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Global image enhancement with colour-space scaling curves"};
  app.require_subcommand(1);

  std::string input, reference, params_path, output, out_params, pairs_path, subsets = "default";
  std::size_t samples = 256;
  bool skip = false;
  bool stages = false;
  FitOptions fo;

  auto* apply = app.add_subcommand("apply", "Apply fitted curves to an image");
  apply->add_option("--input", input)->required();
  apply->add_option("--params", params_path)->required();
  apply->add_option("--output", output)->required();
  apply->add_flag("--skip", skip, "Force the skip connection on");

  auto* fit = app.add_subcommand("fit", "Fit curves mapping one image to a reference");
  fit->add_option("--input", input)->required();
  fit->add_option("--reference", reference)->required();
  fit->add_option("--out-params", out_params)->required();
  add_fit_options(fit, fo, true);

  auto* fit_global_cmd = app.add_subcommand("fit-global", "Fit one curve set over a manifest");
  fit_global_cmd->add_option("--pairs", pairs_path)->required();
  fit_global_cmd->add_option("--out-params", out_params)->required();
  add_fit_options(fit_global_cmd, fo, true);

  auto* eval = app.add_subcommand("eval", "Print PSNR and SSIM of an image against a reference");
  eval->add_option("--input", input)->required();
  eval->add_option("--reference", reference)->required();

  auto* sweep = app.add_subcommand("sweep-order", "Fit every stage ordering and tabulate");
  sweep->add_option("--pairs", pairs_path)->required();
  sweep->add_option("--output", output, "CSV path (default stdout)");
  add_fit_options(sweep, fo, false);

  auto* ablate = app.add_subcommand("ablate", "Fit with loss-term subsets and tabulate");
  ablate->add_option("--pairs", pairs_path)->required();
  ablate->add_option("--subsets", subsets, "';'-separated term lists, or 'default'")
      ->capture_default_str();
  ablate->add_flag("--stages", stages, "Also fit single colour-space blocks");
  ablate->add_option("--output", output, "CSV path (default stdout)");
  add_fit_options(ablate, fo, true);

  auto* export_cmd = app.add_subcommand("export-curves", "Sample every curve to CSV");
  export_cmd->add_option("--params", params_path)->required();
  export_cmd->add_option("--output", output)->required();
  export_cmd->add_option("--samples", samples)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (apply->parsed()) {
      CurveFile file = load_params(params_path);
      file.params.skip = file.params.skip || skip;
      save_image(apply_block(load_image(input), file.params), output);
    } else if (fit->parsed()) {
      const FitConfig cfg = fo.config();
      const Image in = load_image(input);
      const Image ref = load_image(reference);
      require_same_shape(in, ref, "fit");
      const FitResult r = fit_image(in, ref, cfg, fo.w, order_from_string(fo.order), fo.skip);
      write_trace(fo, r.report);
      save_params({r.params, fo.w, {cfg.seed, cfg.iterations, {sha256_file(input), sha256_file(reference)}}},
                  out_params);
    } else if (fit_global_cmd->parsed()) {
      const FitConfig cfg = fo.config();
      const FitResult r =
          fit_global(load_pairs(pairs_path), cfg, fo.w, order_from_string(fo.order), fo.skip);
      write_trace(fo, r.report);
      save_params({r.params, fo.w, {cfg.seed, cfg.iterations, pair_hashes(pairs_path)}}, out_params);
    } else if (eval->parsed()) {
      const Image in = load_image(input);
      const Image ref = load_image(reference);
      require_same_shape(in, ref, "eval");
      std::cout << "PSNR=" << decimal(psnr(in, ref)) << " SSIM=" << decimal(ssim(in, ref)) << "\n";
    } else if (sweep->parsed()) {
      emit(output, order_table_csv(sweep_order(load_pairs(pairs_path), fo.config(), fo.w)));
    } else if (ablate->parsed()) {
      const FitConfig cfg = fo.config();
      auto variants = parse_loss_subsets(subsets, fo.w);
      if (stages) {
        for (auto& v : single_space_variants(fo.w)) variants.push_back(std::move(v));
      }
      emit(output, ablation_table_csv(
                       ablate_loss(load_pairs(pairs_path), cfg, variants, order_from_string(fo.order))));
    } else if (export_cmd->parsed()) {
      write_text_file(output, export_curves_csv(load_params(params_path).params, samples));
    }
  } catch (const std::exception& e) {
    std::string msg = e.what();
    for (char& c : msg)
      if (c == '\n') c = ' ';
    std::cerr << "curvekit: error: " << msg << "\n";
    return 1;
  }
  return 0;
}
