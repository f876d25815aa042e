#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "edgeprune/catalog.hpp"
#include "edgeprune/planner.hpp"

namespace edgeprune {

struct Table {
  std::string name;   // file stem
  std::string title;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
};

/// First line is "# config_digest=<digest>", then a header row.
std::string to_csv(const Table& table, const std::string& config_digest);
std::string to_markdown(const Table& table, const std::string& config_digest);

/// Boundary bytes and cumulative latency after each layer of one record.
Table layer_table(const Catalog& catalog, int record_id);

/// Latency components for every partition of each listed record.
Table breakdown_table(const Catalog& catalog, const std::vector<int>& record_ids,
                      const SystemConfig& cfg);

/// Selected plan per rate at fixed gamma, and per gamma at fixed rate.
Table rate_sweep_table(const std::vector<PlanCandidate>& candidates, const std::vector<double>& rates,
                       const SystemConfig& base);
Table gamma_sweep_table(const std::vector<PlanCandidate>& candidates,
                        const std::vector<double>& gammas, const SystemConfig& base);
Table sweep_grid_table(const SweepResult& result);

/// Step-1 curve and every step-2 family curve.
Table prune_curve_table(const Catalog& catalog);

/// Codec measurements at pooling-layer boundaries for every profiled record.
Table compression_table(const Catalog& catalog);

struct ImprovementRow {
  double rate = 0.0;
  PartitionPlan original;
  PartitionPlan pruned;
  double improvement = 0.0;  // original total / pruned total
};

/// Best plan using only the original model versus the best plan over the
/// whole catalog, per rate.
std::vector<ImprovementRow> latency_improvements(const Catalog& catalog,
                                                 const std::vector<double>& rates,
                                                 const SystemConfig& base);
Table improvement_table(const std::vector<ImprovementRow>& rows, double gamma);

void write_table(const Table& table, const std::filesystem::path& dir,
                 const std::string& config_digest);

}  // namespace edgeprune
