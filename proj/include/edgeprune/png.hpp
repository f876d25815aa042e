#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace edgeprune::png {

struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;  // row-major, one byte per pixel
};

/// Standard 8-bit grayscale PNG (non-interlaced). Each scanline uses the
/// filter type with the smallest sum of absolute residuals.
std::vector<std::uint8_t> encode_gray8(const GrayImage& image);

/// Reads a PNG written by encode_gray8 (or any 8-bit grayscale,
/// non-interlaced PNG). Chunk CRCs are verified; throws DecodeError.
GrayImage decode_gray8(std::span<const std::uint8_t> file);

}  // namespace edgeprune::png
