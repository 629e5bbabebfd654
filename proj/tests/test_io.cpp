#include "doctest.h"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "curvekit/io.hpp"
#include "curvekit/metrics.hpp"
#include "helpers.hpp"
#include "json.hpp"

using namespace curvekit;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    std::random_device rd;
    path = fs::temp_directory_path() / ("curvekit_test_" + std::to_string(rd()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  fs::path operator/(const std::string& name) const { return path / name; }
};

Image quantized_random(std::size_t h, std::size_t w, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> u(0, 255);
  Image img(h, w, ColorSpace::RGB);
  for (double& v : img.data()) v = u(rng) / 255.0;
  return img;
}

int run(const std::string& args, const fs::path& out_file = {}) {
  std::string cmd = std::string(CURVEKIT_CLI) + " " + args;
  cmd += out_file.empty() ? " > /dev/null 2>&1" : " > " + out_file.string() + " 2>&1";
  return std::system(cmd.c_str());
}

std::size_t count_lines(const std::string& text) {
  std::size_t n = 0;
  for (char c : text) n += c == '\n';
  return n;
}

}  // namespace

TEST_CASE("png and ppm round trip") {
  TempDir dir;
  std::mt19937_64 rng(1);
  const Image img = quantized_random(7, 9, rng);
  save_image(img, dir / "a.png");
  save_image(img, dir / "a.ppm");
  CHECK(load_image(dir / "a.png") == img);
  CHECK(load_image(dir / "a.ppm") == img);
  const std::string bytes = read_text_file(dir / "a.png");
  save_image(load_image(dir / "a.png"), dir / "b.png");
  CHECK(read_text_file(dir / "b.png") == bytes);
}

TEST_CASE("8-bit values map to v / 255") {
  Image img(1, 2, ColorSpace::RGB);
  img.set_pixel(0, {1.0, 128 / 255.0, 0.0});
  img.set_pixel(1, {1.7, -0.2, 0.5});
  const Image back = decode_png(encode_png(img));
  CHECK(back.pixel(0)[0] == 1.0);
  CHECK(back.pixel(0)[1] == doctest::Approx(0.50196).epsilon(1e-5));
  CHECK(back.pixel(1)[0] == 1.0);
  CHECK(back.pixel(1)[1] == 0.0);
  CHECK(back.pixel(1)[2] == 128 / 255.0);
}

TEST_CASE("bundled sample images load") {
  const Image img = load_image(testutil::data_path("astronaut_256.png"));
  CHECK(img.height() == 256);
  CHECK(img.width() == 256);
}

TEST_CASE("image loading errors") {
  TempDir dir;
  CHECK_THROWS_AS(load_image(dir / "missing.png"), IoError);
  write_text_file(dir / "junk.png", "not an image");
  CHECK_THROWS_AS(load_image(dir / "junk.png"), IoError);
  write_text_file(dir / "deep.ppm", "P6\n1 1\n65535\n\x01\x02\x03\x04\x05\x06");
  CHECK_THROWS_WITH_AS(load_image(dir / "deep.ppm"), doctest::Contains("bit depth"), IoError);
  write_text_file(dir / "short.ppm", "P6\n2 2\n255\nabc");
  CHECK_THROWS_AS(load_image(dir / "short.ppm"), IoError);
  std::string png = read_text_file(testutil::data_path("chelsea_256.png"));
  write_text_file(dir / "trunc.png", png.substr(0, png.size() / 2));
  CHECK_THROWS_AS(load_image(dir / "trunc.png"), IoError);
}

TEST_CASE("parameter files round trip exactly") {
  std::mt19937_64 rng(2);
  CurveFile f;
  f.params = testutil::random_params(rng, 0.0, 3.0);
  f.params.hsv[1].knots[4] = 1.25;
  f.params.order = {ColorSpace::HSV, ColorSpace::LAB, ColorSpace::RGB};
  f.params.skip = true;
  f.weights.cosine = 0.3;
  f.provenance = {42, 500, {"sha256:ab", "sha256:cd"}};
  CHECK(params_from_json(params_to_json(f)) == f);
  CurveFile id;
  CHECK(params_from_json(params_to_json(id)) == id);
  TempDir dir;
  save_params(f, dir / "p.json");
  CHECK(load_params(dir / "p.json") == f);
}

TEST_CASE("parameter file schema errors name the field") {
  nlohmann::ordered_json doc = nlohmann::ordered_json::parse(params_to_json(CurveFile{}));
  auto missing = doc;
  missing["curves"].erase("hsv.h->s");
  CHECK_THROWS_WITH_AS(params_from_json(missing.dump()), doctest::Contains("hsv.h->s"), ConfigError);
  auto version = doc;
  version["version"] = 2;
  CHECK_THROWS_WITH_AS(params_from_json(version.dump()), doctest::Contains("version"), ConfigError);
  auto count = doc;
  count["curves"]["rgb.G"].erase(0);
  CHECK_THROWS_WITH_AS(params_from_json(count.dump()), doctest::Contains("rgb.G"), ConfigError);
  auto neg = doc;
  neg["curves"]["lab.a"][3] = -1.0;
  CHECK_THROWS_WITH_AS(params_from_json(neg.dump()), doctest::Contains("lab.a[3]"), ConfigError);
  auto order = doc;
  order["order"] = {"LAB", "LAB", "HSV"};
  CHECK_THROWS_WITH_AS(params_from_json(order.dump()), doctest::Contains("order"), ConfigError);
  auto weight = doc;
  weight["weights"].erase("reg");
  CHECK_THROWS_WITH_AS(params_from_json(weight.dump()), doctest::Contains("weights.reg"), ConfigError);
  CHECK_THROWS_AS(params_from_json("{"), ConfigError);
}

TEST_CASE("curve export") {
  auto p = CurlBlockParams::identity();
  const std::string id = export_curves_csv(p, 5);
  CHECK(count_lines(id) == 1 + 10 * 5);
  std::istringstream rows(id);
  std::string line;
  std::getline(rows, line);
  CHECK(line == "curve,x,scale");
  while (std::getline(rows, line)) CHECK(line.substr(line.rfind(',') + 1) == "1");

  std::mt19937_64 rng(3);
  p = testutil::random_params(rng, 0.5, 1.5, 4);
  const std::string csv = export_curves_csv(p, 9);
  std::istringstream in(csv);
  std::getline(in, line);
  for (std::size_t i = 0; i < kCurveCount; ++i)
    for (std::size_t s = 0; s < 9; ++s) {
      std::getline(in, line);
      const double x = std::stod(line.substr(line.find(',') + 1));
      const double v = std::stod(line.substr(line.rfind(',') + 1));
      CHECK(v == curve_scale(p.curve(i), x));
    }
  CHECK_THROWS_AS(export_curves_csv(p, 1), ConfigError);
}

TEST_CASE("manifests") {
  TempDir dir;
  write_text_file(dir / "m.tsv", "# pairs\n\na.png\tb.png\n/abs/c.png\td.png\r\n");
  const auto pairs = read_manifest(dir / "m.tsv");
  REQUIRE(pairs.size() == 2);
  CHECK(pairs[0].first == dir / "a.png");
  CHECK(pairs[1].first == fs::path("/abs/c.png"));
  CHECK(pairs[1].second == dir / "d.png");
  write_text_file(dir / "bad.tsv", "a.png b.png\n");
  CHECK_THROWS_AS(read_manifest(dir / "bad.tsv"), IoError);
  write_text_file(dir / "empty.tsv", "# nothing\n");
  CHECK_THROWS_AS(read_manifest(dir / "empty.tsv"), IoError);
}

TEST_CASE("sha256 and number formatting") {
  TempDir dir;
  write_text_file(dir / "abc", "abc");
  CHECK(sha256_file(dir / "abc") ==
        "sha256:ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(format_number(0.1) == "0.1");
  CHECK(format_number(1.0 / 3.0) == "0.3333333333333333");
  CHECK(format_number(INFINITY) == "inf");
}

TEST_CASE("cli") {
  TempDir dir;
  const Image src = load_image(testutil::data_path("coffee_256.png"));
  const Image a = testutil::crop(src, 60, 80, 40, 40);
  save_image(a, dir / "a.png");
  Image b = a;
  for (double& v : b.data()) v = std::min(1.0, v * 1.1);
  save_image(b, dir / "b.png");
  write_text_file(dir / "pairs.tsv", "a.png\tb.png\n");
  const std::string d = dir.path.string() + "/";

  SUBCASE("eval on identical files") {
    REQUIRE(run("eval --input " + d + "a.png --reference " + d + "a.png", dir / "out.txt") == 0);
    CHECK(read_text_file(dir / "out.txt") == "PSNR=inf SSIM=1.0\n");
  }
  SUBCASE("apply with identity parameters") {
    save_params(CurveFile{}, dir / "id.json");
    const std::string before = read_text_file(dir / "a.png");
    REQUIRE(run("apply --input " + d + "a.png --params " + d + "id.json --output " + d + "o.png") == 0);
    CHECK(psnr(load_image(dir / "o.png"), a) > 50.0);
    CHECK(read_text_file(dir / "a.png") == before);
  }
  SUBCASE("fit is reproducible and its output feeds other subcommands") {
    const std::string fit = "fit --input " + d + "a.png --reference " + d + "b.png --iters 20 --seed 7 --knots 7";
    REQUIRE(run(fit + " --out-params " + d + "p1.json --trace " + d + "t.csv") == 0);
    REQUIRE(run(fit + " --out-params " + d + "p2.json") == 0);
    CHECK(read_text_file(dir / "p1.json") == read_text_file(dir / "p2.json"));
    const CurveFile f = load_params(dir / "p1.json");
    CHECK(f.provenance.seed == 7);
    CHECK(f.provenance.source_hashes.size() == 2);
    CHECK(f.params.curve(0).knots.size() == 8);
    // header, iterations 0, 10 and the final entry
    CHECK(count_lines(read_text_file(dir / "t.csv")) == 1 + 2 + 1);
    CHECK(run("apply --input " + d + "a.png --params " + d + "p1.json --output " + d + "o.png") == 0);
    CHECK(run("export-curves --params " + d + "p1.json --output " + d + "c.csv --samples 3") == 0);
    CHECK(count_lines(read_text_file(dir / "c.csv")) == 31);
  }
  SUBCASE("fit-global writes a loadable parameter file") {
    REQUIRE(run("fit-global --pairs " + d + "pairs.tsv --iters 5 --knots 4 --out-params " + d + "g.json") == 0);
    CHECK(load_params(dir / "g.json").provenance.source_hashes.size() == 2);
  }
  SUBCASE("sweep-order and ablate tables") {
    REQUIRE(run("sweep-order --pairs " + d + "pairs.tsv --iters 2 --knots 4 --output " + d + "s.csv") == 0);
    const std::string s = read_text_file(dir / "s.csv");
    CHECK(count_lines(s) == 7);
    CHECK(s.find("LAB->RGB->HSV") != std::string::npos);
    REQUIRE(run("ablate --pairs " + d + "pairs.tsv --iters 2 --knots 4 --subsets 'rgb,no-cos;all' --output " +
                d + "ab.csv") == 0);
    const std::string ab = read_text_file(dir / "ab.csv");
    CHECK(count_lines(ab) == 3);
    CHECK(ab.find("\"rgb,no-cos\"") != std::string::npos);
  }
  SUBCASE("failures exit nonzero with one line") {
    CHECK(run("eval --input " + d + "missing.png --reference " + d + "a.png", dir / "err.txt") != 0);
    const std::string err = read_text_file(dir / "err.txt");
    CHECK(count_lines(err) == 1);
    CHECK(err.find("missing.png") != std::string::npos);
    CHECK(run("fit --input " + d + "a.png --reference " + d + "b.png --out-params " + d +
              "x.json --order LAB,LAB,HSV") != 0);
    CHECK(run("bogus") != 0);
  }
}
