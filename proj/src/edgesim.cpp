#include "edgeprune/edgesim.hpp"

#include <chrono>
#include <cmath>
#include <charconv>
#include <sstream>

#include "edgeprune/engine.hpp"
#include "edgeprune/error.hpp"
#include "edgeprune/rng.hpp"

namespace edgeprune {

void LinkModel::validate() const {
  if (!(rate > 0.0) || !std::isfinite(rate)) throw InvalidInput("link rate must be positive");
  if (jitter && !(jitter->spread >= 0.0 && jitter->spread < 1.0)) {
    throw InvalidInput("jitter spread must lie in [0, 1) so the factor stays positive");
  }
}

namespace {

// Sequential virtual clock: each component starts when the previous ends.
class VirtualClock {
 public:
  double now() const { return now_; }
  void advance(const std::string& component, double duration, std::vector<TimelineEvent>& log) {
    log.push_back({component, now_, now_ + duration});
    now_ += duration;
  }

 private:
  double now_ = 0.0;
};

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

InferenceTrace run_partitioned(const ModelState& model, const Tensor& input, std::size_t partition,
                               const SimConfig& cfg, const ModelProfile& timing) {
  cfg.link.validate();
  if (!(cfg.gamma > 0.0)) throw InvalidInput("gamma must be positive");
  const std::size_t m = model.spec.layers.size();
  if (partition > m) {
    throw InvalidInput("partition " + std::to_string(partition) + " is outside [0, " +
                       std::to_string(m) + "]");
  }
  if (cfg.timing == TimingMode::Analytic && timing.layer_count() != m) {
    throw InvalidInput("timing profile has " + std::to_string(timing.layer_count()) +
                       " layers, model has " + std::to_string(m));
  }
  double jitter = 1.0;
  if (cfg.link.jitter && cfg.link.jitter->spread > 0.0) {
    Rng rng(cfg.link.jitter->seed ^ (cfg.run_index * 0x9e3779b97f4a7c15ULL));
    jitter = rng.uniform(1.0 - cfg.link.jitter->spread, 1.0 + cfg.link.jitter->spread);
  }
  const std::size_t result_bytes = cfg.result_bytes != 0 ? cfg.result_bytes : model.spec.classes * 4;

  InferenceTrace trace;
  trace.partition = partition;
  VirtualClock clock;

  // Device: front end.
  auto t0 = std::chrono::steady_clock::now();
  Tensor features = forward_range(model, input, 0, partition);
  const double front_wall = seconds_since(t0);
  trace.device_compute_s = cfg.gamma * (cfg.timing == TimingMode::Analytic
                                            ? timing.front_latency(partition)
                                            : front_wall);
  clock.advance("device_compute", trace.device_compute_s, trace.timeline);

  if (partition == m) {
    trace.logits = features;
    trace.transmitted_bytes = result_bytes;
    trace.uplink_s = static_cast<double>(result_bytes + cfg.link.overhead_bytes) / cfg.link.rate * jitter;
    clock.advance("uplink", trace.uplink_s, trace.timeline);
  } else {
    Tensor received;
    if (cfg.codec) {
      const EncodedBlob blob = encode_tensor(features, cfg.codec_id);
      const double codec_analytic = static_cast<double>(features.size()) / cfg.codec_bytes_per_second;
      trace.encode_s = cfg.gamma * (cfg.timing == TimingMode::Analytic ? codec_analytic : blob.encode_s);
      clock.advance("encode", trace.encode_s, trace.timeline);
      trace.transmitted_bytes = blob.encoded_bytes();
      trace.uplink_s = static_cast<double>(trace.transmitted_bytes + cfg.link.overhead_bytes) /
                       cfg.link.rate * jitter;
      clock.advance("uplink", trace.uplink_s, trace.timeline);
      auto d0 = std::chrono::steady_clock::now();
      received = decode_tensor(blob.wire);
      const double decode_wall = seconds_since(d0);
      trace.decode_s = cfg.timing == TimingMode::Analytic ? codec_analytic : decode_wall;
      clock.advance("decode", trace.decode_s, trace.timeline);
    } else {
      trace.transmitted_bytes = features.size() * sizeof(float);
      trace.uplink_s = static_cast<double>(trace.transmitted_bytes + cfg.link.overhead_bytes) /
                       cfg.link.rate * jitter;
      clock.advance("uplink", trace.uplink_s, trace.timeline);
      received = std::move(features);
    }
    // Server: back end.
    auto s0 = std::chrono::steady_clock::now();
    trace.logits = forward_range(model, received, partition, m);
    const double back_wall = seconds_since(s0);
    trace.server_compute_s = cfg.timing == TimingMode::Analytic
                                 ? timing.total - timing.front_latency(partition)
                                 : back_wall;
    clock.advance("server_compute", trace.server_compute_s, trace.timeline);
    trace.downlink_s = static_cast<double>(result_bytes + cfg.link.overhead_bytes) / cfg.link.rate * jitter;
    clock.advance("downlink", trace.downlink_s, trace.timeline);
  }
  trace.total_s = trace.device_compute_s + trace.encode_s + trace.uplink_s + trace.decode_s +
                  trace.server_compute_s + trace.downlink_s;

  const Tensor reference = forward(model, input);
  trace.max_logit_diff = max_abs_diff(reference, trace.logits);
  if (cfg.codec && partition < m) {
    // Quantization tolerance: the monolithic and partitioned predictions agree.
    trace.matches_monolithic = predict(reference) == predict(trace.logits);
  } else {
    trace.matches_monolithic = trace.max_logit_diff <= 1e-5f;
  }
  return trace;
}

bool ValidationReport::ok() const {
  for (const auto& c : checks) {
    if (!c.ok) return false;
  }
  return true;
}

ValidationReport validate_plan(const PartitionPlan& plan, const InferenceTrace& trace,
                               double tolerance) {
  if (!plan.feasible) throw InvalidInput("cannot validate an infeasible plan");
  if (plan.partition != trace.partition) {
    throw ValidationError("partition: plan uses " + std::to_string(plan.partition) +
                          ", trace ran " + std::to_string(trace.partition));
  }
  ValidationReport report;
  auto check = [&](const std::string& name, double predicted, double simulated) {
    const double scale = std::max(std::abs(predicted), std::abs(simulated));
    const double rel = scale == 0.0 ? 0.0 : std::abs(predicted - simulated) / scale;
    report.checks.push_back({name, predicted, simulated, rel, rel <= tolerance});
  };
  check("mobile", plan.mobile_s, trace.device_compute_s + trace.encode_s);
  check("transmission", plan.transmission_s, trace.uplink_s);
  check("server", plan.server_s, trace.decode_s + trace.server_compute_s);
  for (const auto& c : report.checks) {
    if (!c.ok) {
      std::ostringstream msg;
      msg << c.component << ": predicted " << c.predicted_s << " s, simulated " << c.simulated_s
          << " s (relative error " << c.relative_error << " > " << tolerance << ")";
      throw ValidationError(msg.str());
    }
  }
  return report;
}

namespace {

std::string fmt(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

}  // namespace

std::string format_trace(const InferenceTrace& t) {
  std::ostringstream out;
  out << "partition=" << t.partition << '\n'
      << "device_compute_s=" << fmt(t.device_compute_s) << '\n'
      << "encode_s=" << fmt(t.encode_s) << '\n'
      << "uplink_s=" << fmt(t.uplink_s) << '\n'
      << "decode_s=" << fmt(t.decode_s) << '\n'
      << "server_compute_s=" << fmt(t.server_compute_s) << '\n'
      << "downlink_s=" << fmt(t.downlink_s) << '\n'
      << "total_s=" << fmt(t.total_s) << '\n'
      << "transmitted_bytes=" << t.transmitted_bytes << '\n'
      << "matches_monolithic=" << (t.matches_monolithic ? "true" : "false") << '\n'
      << "max_logit_diff=" << fmt(t.max_logit_diff) << '\n';
  return out.str();
}

std::string trace_csv_header() {
  return "partition,device_compute_s,encode_s,uplink_s,decode_s,server_compute_s,downlink_s,"
         "total_s,transmitted_bytes,matches_monolithic,max_logit_diff";
}

std::string trace_csv_row(const InferenceTrace& t) {
  std::ostringstream out;
  out << t.partition << ',' << fmt(t.device_compute_s) << ',' << fmt(t.encode_s) << ','
      << fmt(t.uplink_s) << ',' << fmt(t.decode_s) << ',' << fmt(t.server_compute_s) << ','
      << fmt(t.downlink_s) << ',' << fmt(t.total_s) << ',' << t.transmitted_bytes << ','
      << (t.matches_monolithic ? 1 : 0) << ',' << fmt(t.max_logit_diff);
  return out.str();
}

}  // namespace edgeprune
