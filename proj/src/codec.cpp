#include "edgeprune/codec.hpp"

#include <zlib.h>

#include <algorithm>
#include <chrono>
#include <cmath>

#include "edgeprune/bytes.hpp"
#include "edgeprune/error.hpp"
#include "edgeprune/png.hpp"

namespace edgeprune {

QuantizedTensor quantize(const Tensor& t) {
  if (!t.all_finite()) throw InvalidInput("cannot quantize a tensor with non-finite values");
  QuantizedTensor q;
  q.shape = t.shape();
  q.codes.resize(t.size());
  double lo = 0.0, hi = 0.0;
  for (float v : t.values()) {
    lo = std::min(lo, static_cast<double>(v));
    hi = std::max(hi, static_cast<double>(v));
  }
  if (hi == lo) {
    q.params = {1.0, 0, 8};
    std::fill(q.codes.begin(), q.codes.end(), std::uint8_t{0});
    return q;
  }
  const double scale = (hi - lo) / 255.0;
  const auto zero_point = static_cast<std::int32_t>(std::clamp(std::round(-lo / scale), 0.0, 255.0));
  q.params = {scale, zero_point, 8};
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double code = std::round(static_cast<double>(t[i]) / scale) + zero_point;
    q.codes[i] = static_cast<std::uint8_t>(std::clamp(code, 0.0, 255.0));
  }
  return q;
}

Tensor dequantize(const QuantizedTensor& q) {
  Tensor t(q.shape);
  if (t.size() != q.codes.size()) throw InvalidInput("code count does not match shape");
  for (std::size_t i = 0; i < q.codes.size(); ++i) {
    t[i] = static_cast<float>((static_cast<double>(q.codes[i]) - q.params.zero_point) * q.params.scale);
  }
  return t;
}

std::string to_string(CodecId id) {
  switch (id) {
    case CodecId::Raw: return "raw";
    case CodecId::ZeroRleDeflate: return "zrle-deflate";
    case CodecId::Png: return "png";
  }
  return "unknown";
}

CodecId parse_codec(const std::string& text) {
  if (text == "raw") return CodecId::Raw;
  if (text == "zrle-deflate") return CodecId::ZeroRleDeflate;
  if (text == "png") return CodecId::Png;
  throw InvalidInput("unknown codec '" + text + "' (expected raw, zrle-deflate or png)");
}

std::vector<std::uint8_t> zero_rle_encode(std::span<const std::uint8_t> data) {
  std::vector<std::uint8_t> out;
  out.reserve(data.size() / 2 + 16);
  for (std::size_t i = 0; i < data.size();) {
    if (data[i] != 0) {
      out.push_back(data[i++]);
      continue;
    }
    std::size_t run = 0;
    while (i < data.size() && data[i] == 0) {
      ++run;
      ++i;
    }
    out.push_back(0);
    std::uint64_t extra = run - 1;
    do {
      std::uint8_t byte = extra & 0x7f;
      extra >>= 7;
      if (extra != 0) byte |= 0x80;
      out.push_back(byte);
    } while (extra != 0);
  }
  return out;
}

std::vector<std::uint8_t> zero_rle_decode(std::span<const std::uint8_t> data,
                                          std::size_t expected_size) {
  std::vector<std::uint8_t> out;
  out.reserve(expected_size);
  for (std::size_t i = 0; i < data.size();) {
    const std::uint8_t b = data[i++];
    if (b != 0) {
      out.push_back(b);
    } else {
      std::uint64_t extra = 0;
      int shift = 0;
      while (true) {
        if (i >= data.size() || shift > 56) throw DecodeError("zero-rle: truncated run length");
        const std::uint8_t byte = data[i++];
        extra |= static_cast<std::uint64_t>(byte & 0x7f) << shift;
        shift += 7;
        if ((byte & 0x80) == 0) break;
      }
      if (extra >= expected_size - std::min(expected_size, out.size())) {
        throw DecodeError("zero-rle: run overflows the expected size");
      }
      out.insert(out.end(), extra + 1, std::uint8_t{0});
    }
    if (out.size() > expected_size) throw DecodeError("zero-rle: output overflows the expected size");
  }
  if (out.size() != expected_size) {
    throw DecodeError("zero-rle: decoded " + std::to_string(out.size()) + " bytes, expected " +
                      std::to_string(expected_size));
  }
  return out;
}

TileLayout tile_layout(const Shape& shape) {
  TileLayout l;
  const std::size_t channels = std::max<std::size_t>(shape[1], 1);
  l.grid_cols = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(channels))));
  l.grid_rows = (channels + l.grid_cols - 1) / l.grid_cols;
  l.width = l.grid_cols * shape[3];
  l.height = shape[0] * l.grid_rows * shape[2];
  return l;
}

namespace {

png::GrayImage tile(std::span<const std::uint8_t> codes, const Shape& shape) {
  const TileLayout l = tile_layout(shape);
  png::GrayImage img{l.width, l.height, std::vector<std::uint8_t>(l.width * l.height, 0)};
  const std::size_t h = shape[2], w = shape[3];
  for (std::size_t n = 0; n < shape[0]; ++n) {
    for (std::size_t c = 0; c < shape[1]; ++c) {
      const std::size_t top = (n * l.grid_rows + c / l.grid_cols) * h;
      const std::size_t left = (c % l.grid_cols) * w;
      for (std::size_t y = 0; y < h; ++y) {
        std::copy_n(codes.data() + ((n * shape[1] + c) * h + y) * w, w,
                    img.pixels.data() + (top + y) * l.width + left);
      }
    }
  }
  return img;
}

std::vector<std::uint8_t> untile(const png::GrayImage& img, const Shape& shape) {
  const TileLayout l = tile_layout(shape);
  if (img.width != l.width || img.height != l.height) {
    throw DecodeError("png container: image is " + std::to_string(img.width) + "x" +
                      std::to_string(img.height) + ", shape needs " + std::to_string(l.width) +
                      "x" + std::to_string(l.height));
  }
  std::vector<std::uint8_t> codes(element_count(shape));
  const std::size_t h = shape[2], w = shape[3];
  for (std::size_t n = 0; n < shape[0]; ++n) {
    for (std::size_t c = 0; c < shape[1]; ++c) {
      const std::size_t top = (n * l.grid_rows + c / l.grid_cols) * h;
      const std::size_t left = (c % l.grid_cols) * w;
      for (std::size_t y = 0; y < h; ++y) {
        std::copy_n(img.pixels.data() + (top + y) * l.width + left, w,
                    codes.data() + ((n * shape[1] + c) * h + y) * w);
      }
    }
  }
  return codes;
}

std::vector<std::uint8_t> deflate_bytes(std::span<const std::uint8_t> data) {
  uLongf size = compressBound(static_cast<uLong>(data.size()));
  std::vector<std::uint8_t> out(size);
  if (compress2(out.data(), &size, data.data(), static_cast<uLong>(data.size()), 9) != Z_OK) {
    throw Error("deflate failed");
  }
  out.resize(size);
  return out;
}

std::vector<std::uint8_t> inflate_bytes(std::span<const std::uint8_t> data, std::size_t limit) {
  std::vector<std::uint8_t> out(limit);
  uLongf size = static_cast<uLongf>(limit);
  if (uncompress(out.data(), &size, data.data(), static_cast<uLong>(data.size())) != Z_OK) {
    throw DecodeError("deflate stage: corrupt stream");
  }
  out.resize(size);
  return out;
}

constexpr char kMagic[6] = {'E', 'P', 'F', 'E', 'A', 'T'};
constexpr std::uint16_t kVersion = 1;

}  // namespace

EncodedBlob encode(std::span<const std::uint8_t> codes, const Shape& shape,
                   const QuantParams& params, CodecId codec) {
  if (codes.size() != element_count(shape)) {
    throw InvalidInput("code stream of " + std::to_string(codes.size()) + " bytes does not match shape " +
                       to_string(shape));
  }
  for (std::size_t d : shape) {
    if (d > 0xffffffffu) throw InvalidInput("shape dimension exceeds 32 bits");
  }
  const auto start = std::chrono::steady_clock::now();
  std::vector<std::uint8_t> payload;
  switch (codec) {
    case CodecId::Raw:
      payload.assign(codes.begin(), codes.end());
      break;
    case CodecId::ZeroRleDeflate:
      payload = deflate_bytes(zero_rle_encode(codes));
      break;
    case CodecId::Png:
      payload = png::encode_gray8(tile(codes, shape));
      break;
  }
  bytes::Writer w;
  w.raw({reinterpret_cast<const std::uint8_t*>(kMagic), sizeof(kMagic)});
  w.u16(kVersion);
  w.u8(static_cast<std::uint8_t>(codec));
  w.u8(params.bits);
  w.u16(0);
  w.u32(0);  // CRC placeholder
  for (std::size_t d : shape) w.u32(static_cast<std::uint32_t>(d));
  w.f64(params.scale);
  w.i32(params.zero_point);
  w.u32(static_cast<std::uint32_t>(payload.size()));
  w.raw(payload);
  std::vector<std::uint8_t> wire = w.take();
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, wire.data() + 16, static_cast<uInt>(wire.size() - 16));
  for (int i = 0; i < 4; ++i) wire[12 + i] = static_cast<std::uint8_t>(crc >> (8 * i));
  const auto stop = std::chrono::steady_clock::now();

  EncodedBlob blob;
  blob.wire = std::move(wire);
  blob.shape = shape;
  blob.params = params;
  blob.codec = codec;
  blob.payload_bytes = payload.size();
  blob.encode_s = std::chrono::duration<double>(stop - start).count();
  return blob;
}

EncodedBlob encode(const QuantizedTensor& q, CodecId codec) {
  return encode(q.codes, q.shape, q.params, codec);
}

DecodedBlob decode(std::span<const std::uint8_t> wire) {
  if (wire.size() < kBlobHeaderBytes) throw DecodeError("feature blob shorter than its header");
  if (!std::equal(kMagic, kMagic + sizeof(kMagic), wire.begin())) {
    throw DecodeError("feature blob: bad magic");
  }
  auto fail = [](const std::string& msg) { throw DecodeError("feature blob: " + msg); };
  bytes::Reader r(wire, fail);
  r.raw(sizeof(kMagic));
  if (r.u16() != kVersion) throw DecodeError("feature blob: unsupported version");
  const std::uint8_t codec = r.u8();
  if (codec > 2) throw DecodeError("feature blob: unknown codec id " + std::to_string(codec));
  DecodedBlob out;
  out.codec = static_cast<CodecId>(codec);
  out.params.bits = r.u8();
  if (out.params.bits != 8) throw DecodeError("feature blob: unsupported bit width");
  if (r.u16() != 0) throw DecodeError("feature blob: reserved header bytes are not zero");
  const std::uint32_t stored_crc = r.u32();
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, wire.data() + 16, static_cast<uInt>(wire.size() - 16));
  if (static_cast<std::uint32_t>(crc) != stored_crc) throw DecodeError("feature blob: checksum mismatch");
  for (auto& d : out.shape) d = r.u32();
  out.params.scale = r.f64();
  out.params.zero_point = r.i32();
  const std::uint32_t payload_size = r.u32();
  if (payload_size != r.remaining()) throw DecodeError("feature blob: payload length mismatch");
  if (!(out.params.scale > 0.0) || out.params.zero_point < 0 || out.params.zero_point > 255) {
    throw DecodeError("feature blob: invalid quantization parameters");
  }
  const auto payload = r.raw(payload_size);
  const std::size_t expected = element_count(out.shape);
  if (expected > (std::size_t{1} << 32)) throw DecodeError("feature blob: implausible shape");
  switch (out.codec) {
    case CodecId::Raw:
      out.codes.assign(payload.begin(), payload.end());
      break;
    case CodecId::ZeroRleDeflate:
      out.codes = zero_rle_decode(inflate_bytes(payload, 2 * expected + 16), expected);
      break;
    case CodecId::Png:
      out.codes = untile(png::decode_gray8(payload), out.shape);
      break;
  }
  if (out.codes.size() != expected) {
    throw DecodeError("feature blob: decoded " + std::to_string(out.codes.size()) +
                      " codes, shape needs " + std::to_string(expected));
  }
  return out;
}

EncodedBlob encode_tensor(const Tensor& t, CodecId codec) { return encode(quantize(t), codec); }

Tensor decode_tensor(std::span<const std::uint8_t> wire) {
  DecodedBlob d = decode(wire);
  return dequantize({d.shape, std::move(d.codes), d.params});
}

std::vector<std::uint8_t> to_png(const QuantizedTensor& q) {
  return png::encode_gray8(tile(q.codes, q.shape));
}

}  // namespace edgeprune
