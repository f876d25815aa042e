#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "edgeprune/tensor.hpp"

namespace edgeprune {

/// Affine per-tensor 8-bit mapping: value = (code - zero_point) * scale.
struct QuantParams {
  double scale = 1.0;
  std::int32_t zero_point = 0;
  std::uint8_t bits = 8;
  friend bool operator==(const QuantParams&, const QuantParams&) = default;
};

struct QuantizedTensor {
  Shape shape{};
  std::vector<std::uint8_t> codes;
  QuantParams params;
};

/// The range [min(x, 0), max(x, 0)] is mapped onto 0..255, so zero is always
/// exactly representable. An all-zero tensor gets scale 1.
QuantizedTensor quantize(const Tensor& t);
Tensor dequantize(const QuantizedTensor& q);

enum class CodecId : std::uint8_t { Raw = 0, ZeroRleDeflate = 1, Png = 2 };

std::string to_string(CodecId id);
CodecId parse_codec(const std::string& text);

/// Wire layout, little-endian:
///   [0,6)   magic "EPFEAT"        [6,8)   u16 version = 1
///   [8]     codec id               [9]     bit width (8)
///   [10,12) reserved, zero         [12,16) CRC-32 of bytes [16, end)
///   [16,32) shape, 4 x u32         [32,40) f64 scale
///   [40,44) i32 zero point         [44,48) u32 payload length
///   [48,..) payload
inline constexpr std::size_t kBlobHeaderBytes = 48;

struct EncodedBlob {
  std::vector<std::uint8_t> wire;
  Shape shape{};
  QuantParams params;
  CodecId codec = CodecId::ZeroRleDeflate;
  std::size_t payload_bytes = 0;
  double encode_s = 0.0;

  std::size_t encoded_bytes() const { return wire.size(); }
};

struct DecodedBlob {
  Shape shape{};
  QuantParams params;
  CodecId codec = CodecId::Raw;
  std::vector<std::uint8_t> codes;
};

EncodedBlob encode(std::span<const std::uint8_t> codes, const Shape& shape,
                   const QuantParams& params, CodecId codec = CodecId::ZeroRleDeflate);
EncodedBlob encode(const QuantizedTensor& q, CodecId codec = CodecId::ZeroRleDeflate);

/// Throws DecodeError on any header, checksum, or payload inconsistency.
DecodedBlob decode(std::span<const std::uint8_t> wire);

/// Quantize then encode.
EncodedBlob encode_tensor(const Tensor& t, CodecId codec = CodecId::ZeroRleDeflate);
/// Decode then dequantize.
Tensor decode_tensor(std::span<const std::uint8_t> wire);

/// Zero bytes become 0x00 followed by LEB128(run length - 1); other bytes
/// pass through.
std::vector<std::uint8_t> zero_rle_encode(std::span<const std::uint8_t> data);
std::vector<std::uint8_t> zero_rle_decode(std::span<const std::uint8_t> data,
                                          std::size_t expected_size);

/// Grayscale tiling used by the PNG container: channels laid out on a
/// ceil(sqrt(C))-wide grid, batch items stacked vertically.
struct TileLayout {
  std::size_t grid_cols = 0, grid_rows = 0;
  std::size_t width = 0, height = 0;
};
TileLayout tile_layout(const Shape& shape);

/// Standalone PNG of a quantized tensor (for external viewers).
std::vector<std::uint8_t> to_png(const QuantizedTensor& q);

}  // namespace edgeprune
