#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "curvekit/curve.hpp"
#include "curvekit/fitter.hpp"
#include "curvekit/image.hpp"
#include "curvekit/loss.hpp"

namespace curvekit {

// 8-bit PNG (RGB, RGBA with alpha dropped, palette/grey expanded) or binary
// PPM (P6, maxval 255). Values load as v / 255.
Image load_image(const std::filesystem::path& path);
// Writes PPM for a .ppm extension and PNG otherwise; round(v * 255), clamped.
void save_image(const Image& img, const std::filesystem::path& path);

std::vector<std::uint8_t> encode_png(const Image& img);
Image decode_png(const std::vector<std::uint8_t>& bytes);

inline constexpr int kCurveFileVersion = 1;

struct Provenance {
  std::uint64_t seed = 0;
  std::size_t iterations = 0;
  std::vector<std::string> source_hashes;  // "sha256:<hex>"

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

// Persisted curve parameters (format version 1).
struct CurveFile {
  CurlBlockParams params = CurlBlockParams::identity();
  LossWeights weights;
  Provenance provenance;

  friend bool operator==(const CurveFile&, const CurveFile&) = default;
};

std::string params_to_json(const CurveFile& file);
// Throws ConfigError naming the offending field path on schema violations.
CurveFile params_from_json(const std::string& text);

void save_params(const CurveFile& file, const std::filesystem::path& path);
CurveFile load_params(const std::filesystem::path& path);

// Rows "curve,x,scale" with `samples` uniform x values per curve on [0,1].
std::string export_curves_csv(const CurlBlockParams& params, std::size_t samples);

// Tab-separated "input<TAB>reference" lines; blank lines and '#' comments are
// skipped; relative paths resolve against the manifest's directory.
std::vector<std::pair<std::filesystem::path, std::filesystem::path>> read_manifest(
    const std::filesystem::path& path);

std::string sha256_file(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

// iteration,total,hsv,lab,rgb,reg,best_total,psnr,ssim
void write_trace_csv(const FitReport& report, std::ostream& os);

std::string order_table_csv(const std::vector<OrderRow>& rows);
std::string ablation_table_csv(const std::vector<AblationRow>& rows);

// Shortest decimal that round-trips, "inf" for infinities.
std::string format_number(double v);

}  // namespace curvekit
