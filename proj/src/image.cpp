#include "actguard/image.hpp"

#include <algorithm>
#include <cctype>
#include <csetjmp>
#include <cstring>
#include <fstream>
#include <iterator>

#include <png.h>

#include "actguard/error.hpp"

namespace actguard {

namespace {

[[noreturn]] void decode_error(const std::string& why) { throw Error(ErrorCode::ImageDecodeError, why); }

constexpr std::uint8_t kPngSig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};
constexpr long kMaxPixels = 1L << 28;

// ---- PPM (binary P6, maxval 255) ----

Image decode_ppm(std::span<const std::uint8_t> bytes) {
  std::size_t i = 2;
  auto skip_ws = [&] {
    while (i < bytes.size()) {
      if (bytes[i] == '#') {
        while (i < bytes.size() && bytes[i] != '\n') ++i;
      } else if (std::isspace(bytes[i])) {
        ++i;
      } else {
        break;
      }
    }
  };
  auto number = [&] {
    skip_ws();
    long v = 0;
    std::size_t digits = 0;
    while (i < bytes.size() && bytes[i] >= '0' && bytes[i] <= '9' && digits < 10) {
      v = v * 10 + (bytes[i++] - '0');
      ++digits;
    }
    if (digits == 0) decode_error("PPM header: expected a number");
    return v;
  };
  const long w = number();
  const long h = number();
  const long maxval = number();
  if (w <= 0 || h <= 0 || w * h > kMaxPixels) decode_error("PPM header: bad dimensions");
  if (maxval != 255) decode_error("PPM header: only maxval 255 is supported");
  if (i >= bytes.size() || !std::isspace(bytes[i])) decode_error("PPM header: missing separator");
  ++i;
  const std::size_t need = static_cast<std::size_t>(w * h * 3);
  if (bytes.size() - i < need) decode_error("PPM: truncated pixel data");
  Image img;
  img.width = static_cast<int>(w);
  img.height = static_cast<int>(h);
  img.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(i),
                    bytes.begin() + static_cast<std::ptrdiff_t>(i + need));
  return img;
}

std::vector<std::uint8_t> encode_ppm(const Image& img) {
  const std::string header = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), img.pixels.begin(), img.pixels.end());
  return out;
}

// ---- PNG via libpng with memory callbacks ----

struct ReadState {
  std::span<const std::uint8_t> bytes;
  std::size_t pos = 0;
};

void png_read_mem(png_structp png, png_bytep out, png_size_t n) {
  auto* st = static_cast<ReadState*>(png_get_io_ptr(png));
  if (st->bytes.size() - st->pos < n) png_error(png, "truncated PNG");
  std::memcpy(out, st->bytes.data() + st->pos, n);
  st->pos += n;
}

void png_write_mem(png_structp png, png_bytep data, png_size_t n) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + n);
}

void png_flush_noop(png_structp) {}

void png_silent_warning(png_structp, png_const_charp) {}

Image decode_png(std::span<const std::uint8_t> bytes) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, png_silent_warning);
  if (!png) decode_error("libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    decode_error("libpng init failed");
  }
  ReadState st{bytes, 0};
  Image img;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    decode_error("corrupt PNG data");
  }
  png_set_read_fn(png, &st, png_read_mem);
  png_read_info(png, info);
  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (static_cast<long>(w) * static_cast<long>(h) > kMaxPixels) png_error(png, "image too large");
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);
  if (png_get_rowbytes(png, info) != w * 3) png_error(png, "unexpected row layout");
  img.width = static_cast<int>(w);
  img.height = static_cast<int>(h);
  img.pixels.resize(static_cast<std::size_t>(w) * h * 3);
  rows.resize(h);
  for (png_uint_32 y = 0; y < h; ++y) rows[y] = img.pixels.data() + static_cast<std::size_t>(y) * w * 3;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

std::vector<std::uint8_t> encode_png(const Image& img) {
  std::vector<std::uint8_t> out;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, png_silent_warning);
  if (!png) throw Error(ErrorCode::IoError, "libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw Error(ErrorCode::IoError, "libpng init failed");
  }
  std::vector<png_bytep> rows(static_cast<std::size_t>(img.height));
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::IoError, "PNG encoding failed");
  }
  png_set_write_fn(png, &out, png_write_mem, png_flush_noop);
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < img.height; ++y) {
    rows[static_cast<std::size_t>(y)] =
        const_cast<png_bytep>(img.pixels.data() + static_cast<std::size_t>(y) * img.width * 3);
  }
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

}  // namespace

Image::Image(int w, int h, Rgb fill) : width(w), height(h) {
  pixels.resize(static_cast<std::size_t>(w) * h * 3);
  for (std::size_t i = 0; i < pixels.size(); i += 3) std::copy(fill.begin(), fill.end(), pixels.begin() + i);
}

Rgb Image::at(int x, int y) const {
  const auto i = (static_cast<std::size_t>(y) * width + x) * 3;
  return {pixels[i], pixels[i + 1], pixels[i + 2]};
}

void Image::set(int x, int y, Rgb c) {
  const auto i = (static_cast<std::size_t>(y) * width + x) * 3;
  pixels[i] = c[0];
  pixels[i + 1] = c[1];
  pixels[i + 2] = c[2];
}

ImageFormat sniff_format(std::span<const std::uint8_t> bytes) {
  if (bytes.size() >= 8 && std::equal(std::begin(kPngSig), std::end(kPngSig), bytes.begin())) return ImageFormat::Png;
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '6') return ImageFormat::Ppm;
  decode_error("unrecognized image format");
}

Image decode_image(std::span<const std::uint8_t> bytes) {
  return sniff_format(bytes) == ImageFormat::Png ? decode_png(bytes) : decode_ppm(bytes);
}

std::vector<std::uint8_t> encode_image(const Image& img, ImageFormat format) {
  if (img.width <= 0 || img.height <= 0 ||
      img.pixels.size() != static_cast<std::size_t>(img.width) * img.height * 3) {
    throw Error(ErrorCode::InvalidArgument, "image buffer does not match its dimensions");
  }
  return format == ImageFormat::Png ? encode_png(img) : encode_ppm(img);
}

std::vector<std::uint8_t> read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  return std::vector<std::uint8_t>((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_bytes(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

void validate(const SomStyle& style) {
  if (!(style.radius > style.stroke && style.stroke > 0)) {
    throw Error(ErrorCode::InvalidArgument, "SoM style needs radius > stroke > 0");
  }
}

bool on_som_ring(int dx, int dy, const SomStyle& style) {
  const long d2 = static_cast<long>(dx) * dx + static_cast<long>(dy) * dy;
  const long inner = style.radius - style.stroke;
  return d2 >= inner * inner && d2 <= static_cast<long>(style.radius) * style.radius;
}

Image annotate_som(const Image& img, const Action& a, const SomStyle& style) {
  if (!is_grounding_kind(a.kind) || !a.point) return img;
  validate(style);
  Image out = img;
  const Point c = *a.point;
  const int x0 = std::max(0, c.x - style.radius), x1 = std::min(img.width - 1, c.x + style.radius);
  const int y0 = std::max(0, c.y - style.radius), y1 = std::min(img.height - 1, c.y + style.radius);
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      if (on_som_ring(x - c.x, y - c.y, style)) out.set(x, y, style.color);
    }
  }
  return out;
}

std::vector<std::uint8_t> annotate_som_bytes(std::span<const std::uint8_t> bytes, const Action& a,
                                             const SomStyle& style) {
  if (!is_grounding_kind(a.kind) || !a.point) return {bytes.begin(), bytes.end()};
  const ImageFormat fmt = sniff_format(bytes);
  return encode_image(annotate_som(decode_image(bytes), a, style), fmt);
}

}  // namespace actguard
