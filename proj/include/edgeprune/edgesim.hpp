#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "edgeprune/codec.hpp"
#include "edgeprune/model.hpp"
#include "edgeprune/planner.hpp"
#include "edgeprune/profile.hpp"
#include "edgeprune/tensor.hpp"

namespace edgeprune {

/// Per-message multiplicative factor drawn uniformly from
/// [1 - spread, 1 + spread]; spread 0 pins the factor at exactly 1.
struct JitterModel {
  double spread = 0.0;
  std::uint64_t seed = 1;
};

struct LinkModel {
  double rate = 137500.0;  // bytes per second, uplink and downlink
  std::optional<JitterModel> jitter;
  std::size_t overhead_bytes = 0;

  void validate() const;
};

enum class TimingMode { Analytic, WallClock };

struct SimConfig {
  LinkModel link;
  double gamma = 1.0;
  bool codec = false;
  CodecId codec_id = CodecId::ZeroRleDeflate;
  std::size_t result_bytes = 0;  // 0: classes * 4
  TimingMode timing = TimingMode::Analytic;
  /// Analytic mode codec speed, quantized bytes per second.
  double codec_bytes_per_second = 200e6;
  /// Folded into the jitter seed so batch runs draw distinct factors.
  std::uint64_t run_index = 0;
};

/// One interval on the simulated clock.
struct TimelineEvent {
  std::string component;
  double start_s = 0.0;
  double end_s = 0.0;
};

struct InferenceTrace {
  std::size_t partition = 0;
  double device_compute_s = 0.0;
  double encode_s = 0.0;
  double uplink_s = 0.0;
  double decode_s = 0.0;
  double server_compute_s = 0.0;
  double downlink_s = 0.0;
  double total_s = 0.0;
  std::size_t transmitted_bytes = 0;
  Tensor logits;
  bool matches_monolithic = false;
  float max_logit_diff = 0.0f;
  std::vector<TimelineEvent> timeline;
};

/// Simulated deployment of one inference split after `partition` layers.
/// Analytic timing reads per-layer latencies from `timing` (device side
/// scaled by gamma); wall-clock timing measures the two halves. Logits are
/// compared against a monolithic forward pass; with the codec off they must
/// agree within 1e-5, with it on within the quantization error.
InferenceTrace run_partitioned(const ModelState& model, const Tensor& input, std::size_t partition,
                               const SimConfig& cfg, const ModelProfile& timing);

struct ComponentCheck {
  std::string component;
  double predicted_s = 0.0;
  double simulated_s = 0.0;
  double relative_error = 0.0;
  bool ok = false;
};

struct ValidationReport {
  std::vector<ComponentCheck> checks;
  bool ok() const;
};

/// Compares the plan's three components with the trace (mobile vs device
/// compute + encode, transmission vs uplink, server vs decode + server
/// compute). Throws ValidationError naming the first component off by more
/// than `tolerance` (relative).
ValidationReport validate_plan(const PartitionPlan& plan, const InferenceTrace& trace,
                               double tolerance = 0.01);

/// Structured key=value record, one field per line.
std::string format_trace(const InferenceTrace& trace);
std::string trace_csv_header();
std::string trace_csv_row(const InferenceTrace& trace);

}  // namespace edgeprune
