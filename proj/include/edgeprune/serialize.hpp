#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "edgeprune/model.hpp"

namespace edgeprune {

/// Binary model layout (all integers and floats little-endian):
///   magic "EPMODEL\0" (8 bytes), u32 version = 1,
///   u32 input c, h, w, u32 classes, u64 seed, u32 layer count,
///   per layer: u8 kind (0 conv, 1 pool, 2 flatten, 3 fc), then
///     conv: u32 out, kernel, stride, padding, u8 relu
///     pool: u32 window, stride
///     fc:   u32 out, u8 relu
///   then per parameterized layer in order: f32 weights, f32 biases.
std::vector<std::uint8_t> serialize_model(const ModelState& model);
ModelState deserialize_model(const std::vector<std::uint8_t>& bytes);

void save_model(const ModelState& model, const std::filesystem::path& file);
ModelState load_model(const std::filesystem::path& file);

}  // namespace edgeprune
