#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "edgeprune/catalog.hpp"
#include "edgeprune/config.hpp"
#include "edgeprune/dataset.hpp"
#include "edgeprune/model.hpp"
#include "edgeprune/planner.hpp"
#include "json.hpp"

namespace edgeprune {

enum class Stage { Train, Prune1, Prune2, Profile, Plan, Sweep, Simulate, Report };

std::string to_string(Stage stage);
Stage parse_stage(const std::string& text);
const std::vector<Stage>& all_stages();
std::vector<Stage> prerequisites(Stage stage);

struct StageMarker {
  std::string digest;
  bool completed = false;
};

struct RunManifest {
  std::string tool_version;
  std::string config_digest;
  nlohmann::json seeds = nlohmann::json::object();
  std::string catalog_path = "catalog";
  std::map<std::string, StageMarker> stages;

  nlohmann::json to_json() const;
  static RunManifest from_json(const nlohmann::json& doc);
};

DatasetHandle load_dataset(const DatasetConfig& cfg);
ModelSpec build_model_spec(const ModelConfig& cfg, const DatasetHandle& data);

/// Test accuracy when the features at boundary `partition` pass through
/// quantize, encode and decode before the rest of the network.
double evaluate_with_codec(const ModelState& model, const Split& data, std::size_t partition,
                           CodecId codec, std::size_t batch_size = 128);

struct CompressionStats {
  std::size_t samples = 0;
  std::size_t quantized_bytes = 0;  // one byte per element
  std::size_t encoded_bytes = 0;    // header included
  double ratio() const;
};

/// Encodes the boundary features of the first `samples` items one at a time.
CompressionStats measure_compression(const ModelState& model, const Split& data,
                                     std::size_t partition, CodecId codec, std::size_t samples);

class Pipeline {
 public:
  enum class Outcome { Ran, UpToDate };

  /// `log` receives progress lines; may be null.
  Pipeline(PipelineConfig cfg, std::filesystem::path run_dir, std::ostream* log = nullptr);

  /// Throws PrerequisiteError if an upstream stage has not completed for the
  /// current configuration. A completed stage with an unchanged digest is
  /// left untouched.
  Outcome run(Stage stage);
  void run_through(Stage last);

  const PipelineConfig& config() const { return cfg_; }
  const std::filesystem::path& run_dir() const { return dir_; }
  std::filesystem::path catalog_dir() const { return dir_ / manifest_.catalog_path; }
  const RunManifest& manifest() const { return manifest_; }
  std::string config_digest() const;
  std::string stage_digest(Stage stage) const;
  bool completed(Stage stage) const;

  SystemConfig system_config(const Catalog& catalog) const;

 private:
  void train();
  void prune1();
  void prune2();
  void profile();
  void plan();
  void sweep();
  void simulate();
  void report();

  const DatasetHandle& data();
  void say(const std::string& line) const;
  void save_manifest() const;

  PipelineConfig cfg_;
  nlohmann::json cfg_json_;
  std::filesystem::path dir_;
  std::ostream* log_;
  RunManifest manifest_;
  std::optional<DatasetHandle> data_;
};

}  // namespace edgeprune
