#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstring>
#include <fstream>
#include <iterator>

#include "curvekit/io.hpp"

namespace curvekit {

namespace {

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

std::uint8_t quantize(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

Image from_interleaved(std::size_t h, std::size_t w, const std::uint8_t* rgb, std::size_t stride,
                       std::size_t channels) {
  Image img(h, w, ColorSpace::RGB);
  for (std::size_t y = 0; y < h; ++y) {
    const std::uint8_t* row = rgb + y * stride;
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t c = 0; c < 3; ++c) img.at(c, y, x) = row[x * channels + c] / 255.0;
    }
  }
  return img;
}

std::vector<std::uint8_t> to_interleaved(const Image& img) {
  require_space(img, ColorSpace::RGB, "save_image");
  std::vector<std::uint8_t> out(img.pixel_count() * 3);
  for (std::size_t y = 0; y < img.height(); ++y)
    for (std::size_t x = 0; x < img.width(); ++x)
      for (std::size_t c = 0; c < 3; ++c)
        out[(y * img.width() + x) * 3 + c] = quantize(img.at(c, y, x));
  return out;
}

struct ReadCursor {
  const std::vector<std::uint8_t>* bytes;
  std::size_t pos;
};

void png_read_from_memory(png_structp png, png_bytep out, png_size_t length) {
  auto* cur = static_cast<ReadCursor*>(png_get_io_ptr(png));
  if (cur->pos + length > cur->bytes->size()) png_error(png, "truncated PNG data");
  std::memcpy(out, cur->bytes->data() + cur->pos, length);
  cur->pos += length;
}

void png_write_to_memory(png_structp png, png_bytep data, png_size_t length) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + length);
}

void png_flush_noop(png_structp) {}

struct PngError {
  char message[256] = "malformed PNG";
};

void png_error_to_jmp(png_structp png, png_const_charp msg) {
  auto* err = static_cast<PngError*>(png_get_error_ptr(png));
  std::snprintf(err->message, sizeof(err->message), "%s", msg);
  png_longjmp(png, 1);
}

void png_warning_ignore(png_structp, png_const_charp) {}

// Decodes into 8-bit RGB; returns an error message instead of throwing so no
// C++ object with a destructor lives across setjmp.
const char* decode_png_raw(const std::vector<std::uint8_t>& bytes, PngError& err,
                           std::vector<std::uint8_t>& pixels, std::vector<png_bytep>& rows,
                           png_uint_32& width, png_uint_32& height) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, png_error_to_jmp,
                                           png_warning_ignore);
  if (!png) return "cannot allocate PNG reader";
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    return "cannot allocate PNG reader";
  }
  ReadCursor cursor{&bytes, 0};
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    return err.message;
  }
  png_set_read_fn(png, &cursor, png_read_from_memory);
  png_read_info(png, info);
  const int depth = png_get_bit_depth(png, info);
  const int type = png_get_color_type(png, info);
  if (depth == 16) {
    std::snprintf(err.message, sizeof(err.message), "unsupported PNG bit depth 16");
    png_destroy_read_struct(&png, &info, nullptr);
    return err.message;
  }
  if (type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if ((type == PNG_COLOR_TYPE_GRAY || type == PNG_COLOR_TYPE_GRAY_ALPHA) && depth < 8)
    png_set_expand_gray_1_2_4_to_8(png);
  if (type == PNG_COLOR_TYPE_GRAY || type == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);
  width = png_get_image_width(png, info);
  height = png_get_image_height(png, info);
  const png_size_t rowbytes = png_get_rowbytes(png, info);
  if (rowbytes != static_cast<png_size_t>(width) * 3) {
    std::snprintf(err.message, sizeof(err.message), "unsupported PNG pixel layout");
    png_destroy_read_struct(&png, &info, nullptr);
    return err.message;
  }
  pixels.resize(rowbytes * height);
  rows.resize(height);
  for (png_uint_32 y = 0; y < height; ++y) rows[y] = pixels.data() + y * rowbytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return nullptr;
}

const char* encode_png_raw(const std::vector<std::uint8_t>& rgb, png_uint_32 width,
                           png_uint_32 height, std::vector<png_bytep>& rows, PngError& err,
                           std::vector<std::uint8_t>& out) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, png_error_to_jmp,
                                            png_warning_ignore);
  if (!png) return "cannot allocate PNG writer";
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    return "cannot allocate PNG writer";
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return err.message;
  }
  png_set_write_fn(png, &out, png_write_to_memory, png_flush_noop);
  png_set_IHDR(png, info, width, height, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  for (png_uint_32 y = 0; y < height; ++y)
    rows[y] = const_cast<png_bytep>(rgb.data() + static_cast<std::size_t>(y) * width * 3);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return nullptr;
}

bool is_space(std::uint8_t c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

std::size_t read_ppm_token(const std::vector<std::uint8_t>& bytes, std::size_t& pos) {
  for (;;) {
    while (pos < bytes.size() && is_space(bytes[pos])) ++pos;
    if (pos < bytes.size() && bytes[pos] == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      continue;
    }
    break;
  }
  std::size_t value = 0;
  std::size_t digits = 0;
  while (pos < bytes.size() && bytes[pos] >= '0' && bytes[pos] <= '9') {
    value = value * 10 + (bytes[pos] - '0');
    ++pos;
    if (++digits > 9) throw IoError("PPM header value too large");
  }
  if (digits == 0) throw IoError("malformed PPM header");
  return value;
}

Image decode_ppm(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6')
    throw IoError("not a binary PPM (P6) file");
  std::size_t pos = 2;
  const std::size_t width = read_ppm_token(bytes, pos);
  const std::size_t height = read_ppm_token(bytes, pos);
  const std::size_t maxval = read_ppm_token(bytes, pos);
  if (maxval != 255) throw IoError("unsupported PPM bit depth (maxval " + std::to_string(maxval) + ")");
  if (pos >= bytes.size() || !is_space(bytes[pos])) throw IoError("malformed PPM header");
  ++pos;
  if (width == 0 || height == 0) throw IoError("PPM image has zero size");
  if (bytes.size() - pos < width * height * 3) throw IoError("truncated PPM data");
  return from_interleaved(height, width, bytes.data() + pos, width * 3, 3);
}

std::vector<std::uint8_t> encode_ppm(const Image& img) {
  const std::string header =
      "P6\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  const auto rgb = to_interleaved(img);
  out.insert(out.end(), rgb.begin(), rgb.end());
  return out;
}

bool has_png_signature(const std::vector<std::uint8_t>& bytes) {
  return bytes.size() >= 8 && png_sig_cmp(bytes.data(), 0, 8) == 0;
}

}  // namespace

Image decode_png(const std::vector<std::uint8_t>& bytes) {
  if (!has_png_signature(bytes)) throw IoError("not a PNG file");
  PngError err;
  std::vector<std::uint8_t> pixels;
  std::vector<png_bytep> rows;
  png_uint_32 width = 0, height = 0;
  if (const char* msg = decode_png_raw(bytes, err, pixels, rows, width, height))
    throw IoError(std::string("PNG decode failed: ") + msg);
  if (width == 0 || height == 0) throw IoError("PNG image has zero size");
  return from_interleaved(height, width, pixels.data(), static_cast<std::size_t>(width) * 3, 3);
}

std::vector<std::uint8_t> encode_png(const Image& img) {
  const auto rgb = to_interleaved(img);
  PngError err;
  std::vector<std::uint8_t> out;
  std::vector<png_bytep> rows(img.height());
  if (const char* msg = encode_png_raw(rgb, static_cast<png_uint_32>(img.width()),
                                       static_cast<png_uint_32>(img.height()), rows, err, out))
    throw IoError(std::string("PNG encode failed: ") + msg);
  return out;
}

Image load_image(const std::filesystem::path& path) {
  const auto bytes = read_bytes(path);
  try {
    if (has_png_signature(bytes)) return decode_png(bytes);
    if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '6') return decode_ppm(bytes);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
  throw IoError(path.string() + ": unsupported image format (expected PNG or binary PPM)");
}

void save_image(const Image& img, const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  write_bytes(path, ext == ".ppm" ? encode_ppm(img) : encode_png(img));
}

}  // namespace curvekit
