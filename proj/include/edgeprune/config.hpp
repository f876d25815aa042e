#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "edgeprune/dataset.hpp"
#include "edgeprune/edgesim.hpp"
#include "edgeprune/engine.hpp"
#include "edgeprune/planner.hpp"
#include "edgeprune/profiler.hpp"
#include "json.hpp"

namespace edgeprune {

struct DatasetConfig {
  std::string source = "synthetic";  // or "cifar10"
  std::string cifar_dir;
  SyntheticConfig synthetic;
};

struct ModelConfig {
  std::vector<std::size_t> widths{16, 32, 64};
  std::vector<std::size_t> convs{2, 2, 1};
  std::vector<std::size_t> hidden;
  std::uint64_t seed = 1;
};

struct PruneConfig {
  double fraction = 0.05;
  std::size_t finetune_epochs = 2;
  double step1_budget = 0.02;  // accuracy drop allowed in step 1
  double step2_budget = 0.04;  // total drop allowed after step 2
  std::size_t min_filters = 1;
  std::size_t score_batches = 4;
  std::size_t score_batch_size = 32;
  std::size_t max_iterations = 200;
  std::uint64_t seed = 11;
};

struct SweepConfig {
  std::vector<double> rates;   // bytes per second
  std::vector<double> gammas;
  std::vector<double> table_rates;
  double table_gamma = 5.0;
};

struct SimulateConfig {
  std::size_t samples = 64;
  double jitter = 0.0;
  std::uint64_t jitter_seed = 1;
  std::size_t overhead_bytes = 0;
  TimingMode timing = TimingMode::Analytic;
};

struct PipelineConfig {
  std::string run_name = "demo";
  DatasetConfig dataset;
  ModelConfig model;
  TrainConfig train;
  PruneConfig prune;
  ProfileOptions profile;
  SystemConfig system;
  std::optional<double> accuracy_floor;  // default: baseline minus step2_budget
  SweepConfig sweep;
  SimulateConfig simulate;

  PipelineConfig();
};

/// Rates are written as strings with units ("1.1Mbps"); gamma, floors and
/// counts are plain numbers. Unknown keys are rejected.
nlohmann::json config_to_json(const PipelineConfig& cfg);

/// Throws ConfigError naming the offending field as a JSON pointer.
PipelineConfig config_from_json(const nlohmann::json& doc);

/// Parses JSON text (comments allowed). Syntax errors report line and column.
nlohmann::json parse_config_text(const std::string& text);

nlohmann::json read_config_file(const std::filesystem::path& path);

/// Applies "section.key=value"; value is parsed as JSON when it is valid
/// JSON, otherwise taken as a string.
void apply_override(nlohmann::json& doc, const std::string& assignment);

/// 64-bit FNV-1a of the compact dump, as 16 hex digits.
std::string digest(const nlohmann::json& doc);

}  // namespace edgeprune
