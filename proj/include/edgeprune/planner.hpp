#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "edgeprune/catalog.hpp"
#include "edgeprune/profile.hpp"

namespace edgeprune {

/// Which partition indices are considered. p counts the layers run on the
/// device: p = 0 is edge-only (raw input uploaded), p = M is mobile-only
/// (only the result message is uploaded).
enum class CandidatePolicy {
  AllLayers,          // p in [1, M]
  PoolingOnly,        // p such that layer p is a max pool
  EndpointsIncluded,  // p in [0, M]
};

std::string to_string(CandidatePolicy policy);
CandidatePolicy parse_policy(const std::string& text);

struct SystemConfig {
  double gamma = 5.0;             // device latency / server latency
  double upload_rate = 137500.0;  // bytes per second
  double accuracy_floor = 0.0;    // A; a record qualifies when accuracy > A
  CandidatePolicy policy = CandidatePolicy::EndpointsIncluded;
  bool codec = false;
  std::size_t result_bytes = 0;   // 0: classes * 4

  void validate() const;
};

/// Latency split for one (record, partition) choice. mobile_s is the device
/// side (gamma-scaled compute, plus encode when coding); server_s is the
/// edge side (remaining compute, plus decode).
struct PartitionPlan {
  bool feasible = false;
  int record_id = -1;
  std::size_t partition = 0;
  double mobile_s = 0.0;
  double transmission_s = 0.0;
  double server_s = 0.0;
  double total_s = 0.0;
  double accuracy = 0.0;
  std::size_t transmitted_bytes = 0;
};

/// t_mobile = gamma * f.
double mobile_latency(double front_latency_s, double gamma);
/// t_transmission = D / R.
double transmission_latency(double bytes, double rate);

/// One record as the planner sees it. Step-2 records carry the Conv layer
/// they were pruned at; they are only partitioned right after that layer or
/// after the max pool that directly follows it.
struct PlanCandidate {
  int record_id = -1;
  double accuracy = 0.0;
  const ModelProfile* profile = nullptr;
  std::optional<std::size_t> family_layer;
};

std::vector<PlanCandidate> plan_candidates(const Catalog& catalog);

/// Partition indices `candidate` may use under `policy`.
std::vector<std::size_t> allowed_partitions(const PlanCandidate& candidate, CandidatePolicy policy);

/// Evaluates one (record, partition) pair without the accuracy filter.
PartitionPlan evaluate_plan(const PlanCandidate& candidate, std::size_t partition,
                            const SystemConfig& cfg);

/// Minimum-total plan over every qualifying (record, partition) pair. Ties
/// go to the smaller partition index, then the smaller record id. Returns a
/// plan with feasible == false when no record beats the accuracy floor.
PartitionPlan select_plan(const std::vector<PlanCandidate>& candidates, const SystemConfig& cfg);

struct SweepResult {
  std::vector<double> rates;   // bytes per second
  std::vector<double> gammas;
  std::vector<std::vector<PartitionPlan>> plans;  // [rate][gamma]
};

/// select_plan at every (rate, gamma) cell; other fields come from `base`.
SweepResult sweep(const std::vector<PlanCandidate>& candidates, const std::vector<double>& rates,
                  const std::vector<double>& gammas, const SystemConfig& base);

}  // namespace edgeprune
