#include <openssl/evp.h>

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "curvekit/io.hpp"
#include "json.hpp"

namespace curvekit {

namespace {

using json = nlohmann::ordered_json;

constexpr const char* kFormatName = "curvekit.curves";

[[noreturn]] void schema_error(const std::string& path, const std::string& what) {
  throw ConfigError("parameter file: " + path + ": " + what);
}

const json& require(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object()) schema_error(path, "expected an object");
  const auto it = obj.find(key);
  if (it == obj.end()) schema_error(path + "." + key, "missing");
  return *it;
}

double require_number(const json& v, const std::string& path) {
  if (!v.is_number()) schema_error(path, "expected a number");
  return v.get<double>();
}

std::uint64_t require_unsigned(const json& v, const std::string& path) {
  if (!v.is_number_unsigned()) schema_error(path, "expected a non-negative integer");
  return v.get<std::uint64_t>();
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string format_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string params_to_json(const CurveFile& file) {
  const CurlBlockParams& p = file.params;
  p.validate();
  const std::size_t knots = p.curve(0).knots.size();
  for (std::size_t i = 1; i < kCurveCount; ++i) {
    if (p.curve(i).knots.size() != knots)
      throw ConfigError("parameter file requires a uniform knot count across curves");
  }
  json doc;
  doc["format"] = kFormatName;
  doc["version"] = kCurveFileVersion;
  doc["segments"] = knots - 1;
  doc["knot_count"] = knots;
  json curves = json::object();
  for (std::size_t i = 0; i < kCurveCount; ++i) curves[std::string(kCurveNames[i])] = p.curve(i).knots;
  doc["curves"] = std::move(curves);
  json order = json::array();
  for (ColorSpace s : p.order) order.push_back(std::string(to_string(s)));
  doc["order"] = std::move(order);
  doc["skip"] = p.skip;
  const LossWeights& w = file.weights;
  doc["weights"] = {{"rgb", w.rgb},         {"hsv", w.hsv},       {"lab", w.lab},
                    {"ms_ssim", w.ms_ssim}, {"cosine", w.cosine}, {"reg", w.reg}};
  doc["provenance"] = {{"seed", file.provenance.seed},
                       {"iterations", file.provenance.iterations},
                       {"source_hashes", file.provenance.source_hashes}};
  return doc.dump(2) + "\n";
}

CurveFile params_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("parameter file: invalid JSON: ") + e.what());
  }
  const json& format = require(doc, "format", "$");
  if (!format.is_string() || format.get<std::string>() != kFormatName)
    schema_error("$.format", std::string("expected \"") + kFormatName + "\"");
  const std::uint64_t version = require_unsigned(require(doc, "version", "$"), "$.version");
  if (version != static_cast<std::uint64_t>(kCurveFileVersion))
    schema_error("$.version", "unsupported version " + std::to_string(version));
  const std::uint64_t knot_count =
      require_unsigned(require(doc, "knot_count", "$"), "$.knot_count");
  const std::uint64_t segments = require_unsigned(require(doc, "segments", "$"), "$.segments");
  if (knot_count < 2 || segments + 1 != knot_count)
    schema_error("$.knot_count", "must equal segments + 1 and be >= 2");

  CurveFile file;
  file.params = CurlBlockParams::identity(segments);
  const json& curves = require(doc, "curves", "$");
  if (!curves.is_object()) schema_error("$.curves", "expected an object");
  for (std::size_t i = 0; i < kCurveCount; ++i) {
    const std::string name(kCurveNames[i]);
    const std::string path = "$.curves." + name;
    const auto it = curves.find(name);
    if (it == curves.end()) schema_error(path, "missing curve");
    if (!it->is_array()) schema_error(path, "expected an array of knots");
    if (it->size() != knot_count)
      schema_error(path, "expected " + std::to_string(knot_count) + " knots, found " +
                             std::to_string(it->size()));
    auto& knots = file.params.curve(i).knots;
    for (std::size_t k = 0; k < knot_count; ++k) {
      const double v = require_number((*it)[k], path + "[" + std::to_string(k) + "]");
      if (!std::isfinite(v) || v < 0.0)
        schema_error(path + "[" + std::to_string(k) + "]", "knots must be finite and >= 0");
      knots[k] = v;
    }
  }
  for (const auto& [key, value] : curves.items()) {
    bool known = false;
    for (auto name : kCurveNames) known = known || key == name;
    if (!known) schema_error("$.curves." + key, "unknown curve");
  }

  const json& order = require(doc, "order", "$");
  if (!order.is_array() || order.size() != 3) schema_error("$.order", "expected three stage names");
  for (std::size_t i = 0; i < 3; ++i) {
    if (!order[i].is_string()) schema_error("$.order[" + std::to_string(i) + "]", "expected a string");
    try {
      file.params.order[i] = color_space_from_string(order[i].get<std::string>());
    } catch (const ConfigError& e) {
      schema_error("$.order[" + std::to_string(i) + "]", e.what());
    }
  }
  try {
    validate_order(file.params.order);
  } catch (const ConfigError& e) {
    schema_error("$.order", e.what());
  }
  const json& skip = require(doc, "skip", "$");
  if (!skip.is_boolean()) schema_error("$.skip", "expected a boolean");
  file.params.skip = skip.get<bool>();

  const json& weights = require(doc, "weights", "$");
  LossWeights& w = file.weights;
  for (auto [key, field] : {std::pair<const char*, double*>{"rgb", &w.rgb},
                            {"hsv", &w.hsv},
                            {"lab", &w.lab},
                            {"ms_ssim", &w.ms_ssim},
                            {"cosine", &w.cosine},
                            {"reg", &w.reg}}) {
    const std::string path = std::string("$.weights.") + key;
    *field = require_number(require(weights, key, "$.weights"), path);
    if (!std::isfinite(*field) || *field < 0.0) schema_error(path, "must be finite and >= 0");
  }

  if (doc.contains("provenance")) {
    const json& prov = doc["provenance"];
    if (!prov.is_object()) schema_error("$.provenance", "expected an object");
    if (prov.contains("seed"))
      file.provenance.seed = require_unsigned(prov["seed"], "$.provenance.seed");
    if (prov.contains("iterations"))
      file.provenance.iterations = require_unsigned(prov["iterations"], "$.provenance.iterations");
    if (prov.contains("source_hashes")) {
      const json& hashes = prov["source_hashes"];
      if (!hashes.is_array()) schema_error("$.provenance.source_hashes", "expected an array");
      for (std::size_t i = 0; i < hashes.size(); ++i) {
        if (!hashes[i].is_string())
          schema_error("$.provenance.source_hashes[" + std::to_string(i) + "]", "expected a string");
        file.provenance.source_hashes.push_back(hashes[i].get<std::string>());
      }
    }
  }
  return file;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

void save_params(const CurveFile& file, const std::filesystem::path& path) {
  write_text_file(path, params_to_json(file));
}

CurveFile load_params(const std::filesystem::path& path) {
  try {
    return params_from_json(read_text_file(path));
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string export_curves_csv(const CurlBlockParams& params, std::size_t samples) {
  if (samples < 2) throw ConfigError("export needs at least 2 samples per curve");
  params.validate();
  std::string out = "curve,x,scale\n";
  for (std::size_t i = 0; i < kCurveCount; ++i) {
    const Curve& c = params.curve(i);
    for (std::size_t s = 0; s < samples; ++s) {
      const double x = static_cast<double>(s) / static_cast<double>(samples - 1);
      out += csv_field(std::string(kCurveNames[i]));
      out += ',';
      out += format_number(x);
      out += ',';
      out += format_number(curve_scale(c, x));
      out += '\n';
    }
  }
  return out;
}

std::vector<std::pair<std::filesystem::path, std::filesystem::path>> read_manifest(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest '" + path.string() + "'");
  const auto base = path.parent_path();
  const auto resolve = [&](const std::string& p) {
    const std::filesystem::path fp(p);
    return fp.is_absolute() ? fp : base / fp;
  };
  std::vector<std::pair<std::filesystem::path, std::filesystem::path>> pairs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos)
      throw IoError(path.string() + ":" + std::to_string(lineno) +
                    ": expected 'input<TAB>reference'");
    pairs.emplace_back(resolve(line.substr(0, tab)), resolve(line.substr(tab + 1)));
  }
  if (pairs.empty()) throw IoError("manifest '" + path.string() + "' lists no pairs");
  return pairs;
}

std::string sha256_file(const std::filesystem::path& path) {
  const std::string bytes = read_text_file(path);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw IoError("sha256 failed for '" + path.string() + "'");
  std::ostringstream hex;
  hex << "sha256:";
  for (unsigned int i = 0; i < len; ++i)
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  return hex.str();
}

void write_trace_csv(const FitReport& report, std::ostream& os) {
  os << "iteration,total,hsv,lab,rgb,reg,best_total,psnr,ssim\n";
  for (const TraceEntry& e : report.trace) {
    os << e.iteration << ',' << format_number(e.loss.total) << ','
       << format_number(e.loss.hsv_term) << ',' << format_number(e.loss.lab_term) << ','
       << format_number(e.loss.rgb_term) << ',' << format_number(e.loss.reg_term) << ','
       << format_number(e.best_total) << ',' << format_number(e.psnr) << ','
       << format_number(e.ssim) << '\n';
  }
}

std::string order_table_csv(const std::vector<OrderRow>& rows) {
  std::string out = "ordering,psnr,ssim,loss,identity_psnr\n";
  for (const OrderRow& r : rows) {
    out += order_to_string(r.order, "->") + ',' + format_number(r.psnr) + ',' +
           format_number(r.ssim) + ',' + format_number(r.loss) + ',' +
           format_number(r.identity_psnr) + '\n';
  }
  return out;
}

std::string ablation_table_csv(const std::vector<AblationRow>& rows) {
  std::string out = "subset,psnr,ssim,loss\n";
  for (const AblationRow& r : rows) {
    out += csv_field(r.label) + ',' + format_number(r.psnr) + ',' + format_number(r.ssim) + ',' +
           format_number(r.loss) + '\n';
  }
  return out;
}

}  // namespace curvekit
