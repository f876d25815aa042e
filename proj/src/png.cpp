#include "edgeprune/png.hpp"

#include <zlib.h>

#include <array>
#include <cstdlib>
#include <string>

#include "edgeprune/error.hpp"

namespace edgeprune::png {

namespace {

constexpr std::array<std::uint8_t, 8> kSignature{137, 80, 78, 71, 13, 10, 26, 10};

void put_u32be(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

std::uint32_t get_u32be(const std::uint8_t* p) {
  return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) |
         std::uint32_t{p[3]};
}

void put_chunk(std::vector<std::uint8_t>& out, const char type[4],
               std::span<const std::uint8_t> data) {
  put_u32be(out, static_cast<std::uint32_t>(data.size()));
  const std::size_t type_at = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), data.begin(), data.end());
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, out.data() + type_at, static_cast<uInt>(4 + data.size()));
  put_u32be(out, static_cast<std::uint32_t>(crc));
}

int paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

// Applies (or, with `inverse`, removes) filter `type` on one row. For a
// one-byte-per-pixel image the left neighbour is one byte back.
void filter_row(int type, const std::uint8_t* cur, const std::uint8_t* prev, std::uint8_t* out,
                std::size_t width) {
  for (std::size_t x = 0; x < width; ++x) {
    const int a = x > 0 ? cur[x - 1] : 0;
    const int b = prev != nullptr ? prev[x] : 0;
    const int c = (x > 0 && prev != nullptr) ? prev[x - 1] : 0;
    int pred = 0;
    switch (type) {
      case 1: pred = a; break;
      case 2: pred = b; break;
      case 3: pred = (a + b) / 2; break;
      case 4: pred = paeth(a, b, c); break;
      default: break;
    }
    out[x] = static_cast<std::uint8_t>(cur[x] - pred);
  }
}

void unfilter_row(int type, std::uint8_t* cur, const std::uint8_t* prev, std::size_t width) {
  for (std::size_t x = 0; x < width; ++x) {
    const int a = x > 0 ? cur[x - 1] : 0;
    const int b = prev != nullptr ? prev[x] : 0;
    const int c = (x > 0 && prev != nullptr) ? prev[x - 1] : 0;
    int pred = 0;
    switch (type) {
      case 0: break;
      case 1: pred = a; break;
      case 2: pred = b; break;
      case 3: pred = (a + b) / 2; break;
      case 4: pred = paeth(a, b, c); break;
      default: throw DecodeError("png: unknown filter type " + std::to_string(type));
    }
    cur[x] = static_cast<std::uint8_t>(cur[x] + pred);
  }
}

}  // namespace

std::vector<std::uint8_t> encode_gray8(const GrayImage& image) {
  const std::size_t w = image.width, h = image.height;
  if (w == 0 || h == 0 || image.pixels.size() != w * h) {
    throw InvalidInput("png: image dimensions do not match pixel count");
  }
  std::vector<std::uint8_t> raw;
  raw.reserve(h * (w + 1));
  std::vector<std::uint8_t> candidate(w), best(w);
  for (std::size_t y = 0; y < h; ++y) {
    const std::uint8_t* cur = image.pixels.data() + y * w;
    const std::uint8_t* prev = y > 0 ? cur - w : nullptr;
    long best_cost = -1;
    int best_type = 0;
    for (int type = 0; type < 5; ++type) {
      filter_row(type, cur, prev, candidate.data(), w);
      long cost = 0;
      for (std::uint8_t v : candidate) cost += v < 128 ? v : 256 - v;
      if (best_cost < 0 || cost < best_cost) {
        best_cost = cost;
        best_type = type;
        best.swap(candidate);
      }
    }
    raw.push_back(static_cast<std::uint8_t>(best_type));
    raw.insert(raw.end(), best.begin(), best.end());
  }
  uLongf packed_size = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> packed(packed_size);
  if (compress2(packed.data(), &packed_size, raw.data(), static_cast<uLong>(raw.size()), 9) != Z_OK) {
    throw Error("png: deflate failed");
  }
  packed.resize(packed_size);

  std::vector<std::uint8_t> out(kSignature.begin(), kSignature.end());
  std::vector<std::uint8_t> ihdr;
  put_u32be(ihdr, static_cast<std::uint32_t>(w));
  put_u32be(ihdr, static_cast<std::uint32_t>(h));
  ihdr.insert(ihdr.end(), {8, 0, 0, 0, 0});  // depth 8, grayscale, deflate, adaptive, no interlace
  put_chunk(out, "IHDR", ihdr);
  put_chunk(out, "IDAT", packed);
  put_chunk(out, "IEND", {});
  return out;
}

GrayImage decode_gray8(std::span<const std::uint8_t> file) {
  if (file.size() < kSignature.size() ||
      !std::equal(kSignature.begin(), kSignature.end(), file.begin())) {
    throw DecodeError("png: bad signature");
  }
  GrayImage image;
  std::vector<std::uint8_t> idat;
  bool have_header = false, have_end = false;
  std::size_t pos = kSignature.size();
  while (pos < file.size() && !have_end) {
    if (file.size() - pos < 12) throw DecodeError("png: truncated chunk");
    const std::uint32_t length = get_u32be(file.data() + pos);
    if (file.size() - pos - 12 < length) throw DecodeError("png: chunk overruns file");
    const std::uint8_t* type = file.data() + pos + 4;
    const std::uint8_t* data = type + 4;
    uLong crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, type, 4 + length);
    if (static_cast<std::uint32_t>(crc) != get_u32be(data + length)) {
      throw DecodeError("png: chunk CRC mismatch");
    }
    const std::string name(reinterpret_cast<const char*>(type), 4);
    if (name == "IHDR") {
      if (length != 13) throw DecodeError("png: bad IHDR length");
      image.width = get_u32be(data);
      image.height = get_u32be(data + 4);
      if (data[8] != 8 || data[9] != 0 || data[10] != 0 || data[11] != 0 || data[12] != 0) {
        throw DecodeError("png: only 8-bit grayscale non-interlaced images are supported");
      }
      have_header = true;
    } else if (name == "IDAT") {
      idat.insert(idat.end(), data, data + length);
    } else if (name == "IEND") {
      have_end = true;
    }
    pos += 12 + length;
  }
  if (!have_header || !have_end) throw DecodeError("png: missing IHDR or IEND");
  if (image.width == 0 || image.height == 0 || image.width > (1u << 24) || image.height > (1u << 24)) {
    throw DecodeError("png: implausible dimensions");
  }
  const std::size_t stride = image.width + 1;
  std::vector<std::uint8_t> raw(stride * image.height);
  uLongf raw_size = static_cast<uLongf>(raw.size());
  if (uncompress(raw.data(), &raw_size, idat.data(), static_cast<uLong>(idat.size())) != Z_OK ||
      raw_size != raw.size()) {
    throw DecodeError("png: corrupt image data");
  }
  image.pixels.resize(image.width * image.height);
  for (std::size_t y = 0; y < image.height; ++y) {
    std::uint8_t* row = image.pixels.data() + y * image.width;
    std::copy_n(raw.data() + y * stride + 1, image.width, row);
    unfilter_row(raw[y * stride], row, y > 0 ? row - image.width : nullptr, image.width);
  }
  return image;
}

}  // namespace edgeprune::png
