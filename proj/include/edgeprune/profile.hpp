#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace edgeprune {

struct LayerProfile {
  std::size_t index = 0;
  std::string name;
  std::string kind;          // conv, pool, flatten or fc
  std::size_t elements = 0;  // per sample
  std::size_t bytes = 0;     // D_i = elements * bytes_per_element
  double latency_s = 0.0;    // t_i on the profiling host
  std::uint64_t flops = 0;
  // Feature-codec measurements at this boundary (0 when not measured).
  std::size_t encoded_bytes = 0;
  double encode_s = 0.0;
  double decode_s = 0.0;
};

enum class ProfileMethod { WallClock, Analytic };

std::string to_string(ProfileMethod method);
ProfileMethod parse_profile_method(const std::string& text);

/// Layer-level profile of one model. cumulative[i] = f(L_{i+1}), the sum of
/// latencies of layers 0..i; total = T.
struct ModelProfile {
  int record_id = -1;
  ProfileMethod method = ProfileMethod::Analytic;
  std::string timer_digest;
  std::size_t bytes_per_element = 4;
  std::size_t classes = 0;
  // Partition boundary 0: the raw input.
  std::size_t input_elements = 0;
  std::size_t input_bytes = 0;
  std::size_t input_encoded_bytes = 0;
  double input_encode_s = 0.0;
  double input_decode_s = 0.0;
  std::vector<LayerProfile> layers;
  std::vector<double> cumulative;
  double total = 0.0;

  std::size_t layer_count() const { return layers.size(); }
  /// f(L_p): latency of the first p layers; f(0) = 0.
  double front_latency(std::size_t p) const { return p == 0 ? 0.0 : cumulative.at(p - 1); }
  /// Bytes leaving the device when partitioning after p layers (p < M), or
  /// the input when p = 0.
  std::size_t boundary_bytes(std::size_t p) const {
    return p == 0 ? input_bytes : layers.at(p - 1).bytes;
  }

  /// Recomputes cumulative and total from the per-layer latencies.
  void accumulate();
};

/// Tab-separated profile file: '#'-prefixed key=value header lines, a column
/// header, then one row per layer. Doubles use shortest round-trip form, so a
/// profile reloads bit-identically.
std::string format_profile(const ModelProfile& profile);
ModelProfile parse_profile(const std::string& text);
void write_profile(const ModelProfile& profile, const std::filesystem::path& file);
ModelProfile read_profile(const std::filesystem::path& file);

}  // namespace edgeprune
