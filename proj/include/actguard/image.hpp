#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "actguard/action.hpp"

namespace actguard {

using Rgb = std::array<std::uint8_t, 3>;

/// Packed 8-bit RGB raster, row-major.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // width * height * 3

  Image() = default;
  Image(int w, int h, Rgb fill);

  Rgb at(int x, int y) const;
  void set(int x, int y, Rgb c);
  bool operator==(const Image&) const = default;
};

enum class ImageFormat { Png, Ppm };

// Throws Error{ImageDecodeError}.
ImageFormat sniff_format(std::span<const std::uint8_t> bytes);
Image decode_image(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_image(const Image& img, ImageFormat format);

std::vector<std::uint8_t> read_bytes(const std::string& path);
void write_bytes(const std::string& path, std::span<const std::uint8_t> bytes);

struct SomStyle {
  int radius = 24;
  int stroke = 6;
  Rgb color{255, 0, 0};
  bool operator==(const SomStyle&) const = default;
};

void validate(const SomStyle& style);

/// Pixels of the unfilled marker ring: radius-stroke <= distance <= radius.
bool on_som_ring(int dx, int dy, const SomStyle& style);

/// Draws the set-of-mark circle for Click/LongPress; other kinds leave the image as is.
Image annotate_som(const Image& img, const Action& a, const SomStyle& style = {});

/// Byte-level variant: non-click actions return `bytes` unchanged without decoding;
/// click actions are decoded, annotated and re-encoded in the input's format.
std::vector<std::uint8_t> annotate_som_bytes(std::span<const std::uint8_t> bytes, const Action& a,
                                             const SomStyle& style = {});

}  // namespace actguard
