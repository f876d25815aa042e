#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "edgeprune/model.hpp"
#include "edgeprune/profile.hpp"
#include "json.hpp"

namespace edgeprune {

enum class LineageKind { Original, Step1, Step2 };

std::string to_string(LineageKind kind);

struct Lineage {
  LineageKind kind = LineageKind::Original;
  std::size_t layer = 0;      // step 2: pruned Conv layer
  std::size_t iteration = 0;  // position on its pruning curve
};

struct PrunedModelRecord {
  int id = -1;
  int parent = -1;
  Lineage lineage;
  std::vector<std::size_t> filter_counts;  // per layer (0 for pool/flatten)
  double pruned_fraction = 0.0;            // within the pruning range
  double accuracy = 0.0;
  bool below_threshold = false;
  std::string state_file;    // relative to the catalog root
  std::string profile_file;  // empty until profiled
};

struct CurvePoint {
  std::size_t iteration = 0;
  double pruned_fraction = 0.0;
  double accuracy = 0.0;
  std::size_t filters_in_range = 0;
  bool below_threshold = false;
};

/// The persisted family of pruned variants. On disk: `catalog.json` (index),
/// `models/<id>.bin` (model states) and `profiles/<id>.tsv`.
class Catalog {
 public:
  /// Starts a catalog holding only the original model (id 0).
  static Catalog create(const std::filesystem::path& root, const ModelState& original,
                        double accuracy, nlohmann::json metadata = nlohmann::json::object());
  static Catalog load(const std::filesystem::path& root);

  const std::filesystem::path& root() const { return root_; }

  const PrunedModelRecord& original() const { return original_; }
  const std::optional<PrunedModelRecord>& step1() const { return step1_; }
  const std::vector<CurvePoint>& step1_curve() const { return step1_curve_; }
  const std::map<std::size_t, std::vector<PrunedModelRecord>>& families() const { return families_; }
  const nlohmann::json& metadata() const { return metadata_; }
  nlohmann::json& metadata() { return metadata_; }

  /// Every record: original, step 1, then families by layer.
  std::vector<const PrunedModelRecord*> records() const;
  const PrunedModelRecord& find(int id) const;

  /// Adds a record, assigns its id, writes its model binary.
  const PrunedModelRecord& set_step1(PrunedModelRecord record, const ModelState& state,
                                     std::vector<CurvePoint> curve);
  const PrunedModelRecord& add_to_family(std::size_t layer, PrunedModelRecord record,
                                         const ModelState& state);
  void clear_families();

  ModelState load_state(int id) const;

  /// Attaches (or replaces) a profile and writes its file.
  void attach_profile(int id, ModelProfile profile);
  const ModelProfile* profile(int id) const;
  bool fully_profiled() const;

  /// Lineage resolution and the one-layer-difference rule for step 2.
  void validate() const;

  void save() const;

 private:
  PrunedModelRecord* find_mutable(int id);
  std::filesystem::path state_path(int id) const;

  std::filesystem::path root_;
  PrunedModelRecord original_;
  std::optional<PrunedModelRecord> step1_;
  std::vector<CurvePoint> step1_curve_;
  std::map<std::size_t, std::vector<PrunedModelRecord>> families_;
  std::map<int, ModelProfile> profiles_;
  nlohmann::json metadata_ = nlohmann::json::object();
  int next_id_ = 1;
};

}  // namespace edgeprune
