#include "edgeprune/planner.hpp"

#include <algorithm>
#include <cmath>

#include "edgeprune/error.hpp"

namespace edgeprune {

std::string to_string(CandidatePolicy policy) {
  switch (policy) {
    case CandidatePolicy::AllLayers: return "all-layers";
    case CandidatePolicy::PoolingOnly: return "pooling-only";
    case CandidatePolicy::EndpointsIncluded: return "endpoints-included";
  }
  return "unknown";
}

CandidatePolicy parse_policy(const std::string& text) {
  if (text == "all-layers") return CandidatePolicy::AllLayers;
  if (text == "pooling-only") return CandidatePolicy::PoolingOnly;
  if (text == "endpoints-included") return CandidatePolicy::EndpointsIncluded;
  throw ConfigError("unknown candidate policy '" + text +
                    "' (expected all-layers, pooling-only or endpoints-included)");
}

void SystemConfig::validate() const {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw InvalidInput("gamma must be positive");
  if (!(upload_rate > 0.0) || !std::isfinite(upload_rate)) {
    throw InvalidInput("upload rate must be positive");
  }
  if (!(accuracy_floor >= 0.0 && accuracy_floor <= 1.0)) {
    throw InvalidInput("accuracy floor must lie in [0, 1]");
  }
}

double mobile_latency(double front_latency_s, double gamma) { return gamma * front_latency_s; }

double transmission_latency(double bytes, double rate) { return bytes / rate; }

std::vector<PlanCandidate> plan_candidates(const Catalog& catalog) {
  std::vector<PlanCandidate> out;
  for (const auto* r : catalog.records()) {
    const ModelProfile* profile = catalog.profile(r->id);
    if (profile == nullptr) {
      throw InvalidInput("record " + std::to_string(r->id) + " has no profile; profile the catalog first");
    }
    PlanCandidate c{r->id, r->accuracy, profile, std::nullopt};
    if (r->lineage.kind == LineageKind::Step2) c.family_layer = r->lineage.layer;
    out.push_back(c);
  }
  return out;
}

std::vector<std::size_t> allowed_partitions(const PlanCandidate& candidate, CandidatePolicy policy) {
  const ModelProfile& p = *candidate.profile;
  const std::size_t m = p.layer_count();
  auto in_policy = [&](std::size_t q) {
    switch (policy) {
      case CandidatePolicy::AllLayers: return q >= 1 && q <= m;
      case CandidatePolicy::PoolingOnly: return q >= 1 && q <= m && p.layers[q - 1].kind == "pool";
      case CandidatePolicy::EndpointsIncluded: return q <= m;
    }
    return false;
  };
  std::vector<std::size_t> out;
  if (candidate.family_layer) {
    const std::size_t l = *candidate.family_layer;
    if (in_policy(l + 1)) out.push_back(l + 1);
    if (l + 1 < m && p.layers[l + 1].kind == "pool" && in_policy(l + 2)) out.push_back(l + 2);
    return out;
  }
  for (std::size_t q = 0; q <= m; ++q) {
    if (in_policy(q)) out.push_back(q);
  }
  return out;
}

PartitionPlan evaluate_plan(const PlanCandidate& candidate, std::size_t partition,
                            const SystemConfig& cfg) {
  const ModelProfile& p = *candidate.profile;
  const std::size_t m = p.layer_count();
  if (partition > m) {
    throw InvalidInput("partition " + std::to_string(partition) + " exceeds layer count " +
                       std::to_string(m));
  }
  const double front = p.front_latency(partition);
  double mobile = mobile_latency(front, cfg.gamma);
  double server = p.total - front;
  std::size_t bytes = 0;
  if (partition == m) {
    bytes = cfg.result_bytes != 0 ? cfg.result_bytes : p.classes * 4;
  } else if (cfg.codec) {
    const std::size_t encoded = partition == 0 ? p.input_encoded_bytes : p.layers[partition - 1].encoded_bytes;
    if (encoded == 0) {
      throw InvalidInput("record " + std::to_string(candidate.record_id) +
                         " was profiled without codec measurements");
    }
    bytes = encoded;
    const double encode_s = partition == 0 ? p.input_encode_s : p.layers[partition - 1].encode_s;
    const double decode_s = partition == 0 ? p.input_decode_s : p.layers[partition - 1].decode_s;
    mobile += mobile_latency(encode_s, cfg.gamma);
    server += decode_s;
  } else {
    bytes = p.boundary_bytes(partition);
  }
  PartitionPlan plan;
  plan.feasible = true;
  plan.record_id = candidate.record_id;
  plan.partition = partition;
  plan.mobile_s = mobile;
  plan.transmission_s = transmission_latency(static_cast<double>(bytes), cfg.upload_rate);
  plan.server_s = server;
  plan.total_s = plan.mobile_s + plan.transmission_s + plan.server_s;
  plan.accuracy = candidate.accuracy;
  plan.transmitted_bytes = bytes;
  return plan;
}

PartitionPlan select_plan(const std::vector<PlanCandidate>& candidates, const SystemConfig& cfg) {
  cfg.validate();
  PartitionPlan best;
  for (const PlanCandidate& c : candidates) {
    if (!(c.accuracy > cfg.accuracy_floor)) continue;
    for (std::size_t q : allowed_partitions(c, cfg.policy)) {
      const PartitionPlan plan = evaluate_plan(c, q, cfg);
      const bool better =
          !best.feasible || plan.total_s < best.total_s ||
          (plan.total_s == best.total_s &&
           (plan.partition < best.partition ||
            (plan.partition == best.partition && plan.record_id < best.record_id)));
      if (better) best = plan;
    }
  }
  return best;
}

SweepResult sweep(const std::vector<PlanCandidate>& candidates, const std::vector<double>& rates,
                  const std::vector<double>& gammas, const SystemConfig& base) {
  if (rates.empty() || gammas.empty()) throw InvalidInput("sweep axes must be non-empty");
  SweepResult result{rates, gammas, {}};
  for (double rate : rates) {
    std::vector<PartitionPlan> row;
    for (double gamma : gammas) {
      SystemConfig cfg = base;
      cfg.upload_rate = rate;
      cfg.gamma = gamma;
      row.push_back(select_plan(candidates, cfg));
    }
    result.plans.push_back(std::move(row));
  }
  return result;
}

}  // namespace edgeprune
