#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "edgeprune/catalog.hpp"
#include "edgeprune/codec.hpp"
#include "edgeprune/model.hpp"
#include "edgeprune/profile.hpp"
#include "edgeprune/tensor.hpp"

namespace edgeprune {

struct TimerConfig {
  std::size_t warmup_runs = 5;
  std::size_t measured_runs = 30;
  std::size_t batch_size = 1;

  void validate() const;
  std::string digest() const;
};

struct ProfileOptions {
  ProfileMethod method = ProfileMethod::Analytic;
  TimerConfig timer;
  std::size_t bytes_per_element = 4;
  /// Analytic mode: FLOPs the profiling host retires per second.
  double flops_per_second = 1e9;
  /// Measure encoded sizes at every boundary using the probe input.
  bool codec = false;
  CodecId codec_id = CodecId::ZeroRleDeflate;
  /// Analytic mode: quantized bytes the codec processes per second (each
  /// direction).
  double codec_bytes_per_second = 200e6;
};

/// Conv: 2*k*k*C_in*C_out*H_out*W_out. FC: 2*in*out. MaxPool: window^2 *
/// output elements (comparisons). Flatten: 0.
std::vector<std::uint64_t> analytic_flops(const ModelSpec& spec);

/// Layer-level profile. Wall-clock mode times each layer in isolation on a
/// batch of `timer.batch_size` and keeps the median of the measured runs;
/// analytic mode uses FLOPs / flops_per_second. `probe` (one sample) feeds the
/// codec measurements and the wall-clock input; a seeded random input is used
/// when it is absent.
ModelProfile profile_model(const ModelState& model, const ProfileOptions& options,
                           const Tensor* probe = nullptr);

/// Profiles every record and attaches the result; re-running replaces
/// profiles rather than adding new ones. Throws ProfilingError naming a
/// record whose model binary is missing.
void profile_catalog(Catalog& catalog, const ProfileOptions& options,
                     const Tensor* probe = nullptr);

/// Measured codec throughput (quantized bytes per second, encode and decode
/// combined per direction) on the given feature tensor.
double measure_codec_throughput(const Tensor& features, CodecId codec, std::size_t repeats = 5);

}  // namespace edgeprune
