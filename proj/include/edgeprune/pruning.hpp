#pragma once

#include <compare>
#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "edgeprune/catalog.hpp"
#include "edgeprune/dataset.hpp"
#include "edgeprune/engine.hpp"
#include "edgeprune/model.hpp"

namespace edgeprune {

/// One output channel of one Conv layer.
struct FilterId {
  std::size_t layer = 0;
  std::size_t filter = 0;
  auto operator<=>(const FilterId&) const = default;
};

/// Which Conv layers a pruning run may touch.
class PruneRange {
 public:
  static PruneRange global() { return PruneRange(std::nullopt); }
  static PruneRange single_layer(std::size_t layer) { return PruneRange(layer); }

  bool is_global() const { return !layer_.has_value(); }
  std::size_t layer() const { return layer_.value(); }
  bool contains(std::size_t layer) const { return !layer_ || *layer_ == layer; }

  /// Conv layers covered by this range; throws InvalidInput when a
  /// single-layer range names a non-Conv layer.
  std::vector<std::size_t> layers(const ModelSpec& spec) const;

 private:
  explicit PruneRange(std::optional<std::size_t> layer) : layer_(layer) {}
  std::optional<std::size_t> layer_;
};

struct PruneSchedule {
  double fraction = 0.05;          // of remaining in-range filters, per iteration
  std::size_t finetune_epochs = 2;
  double accuracy_floor = 0.0;     // absolute
  std::size_t min_filters = 1;     // per layer
  std::size_t score_batches = 4;
  std::size_t score_batch_size = 32;
  std::size_t max_iterations = 200;
  TrainConfig finetune;            // epochs replaced by finetune_epochs

  void validate() const;
};

using FilterScores = std::map<FilterId, double>;

/// First-order Taylor importance. For each in-range filter: the mean over
/// samples and spatial positions of |activation * dLoss/dactivation| for its
/// output channel, averaged over `batches` consecutive training batches, then
/// divided by the L2 norm of its layer's scores.
FilterScores taylor_scores(const ModelState& model, const Split& data, const PruneRange& range,
                           std::size_t batches, std::size_t batch_size = 32);

/// Removes victim output channels and the matching input channels of the
/// next parameterized layer (Conv, or FC behind a flatten).
ModelState apply_prune(const ModelState& model, const std::set<FilterId>& victims,
                       std::size_t min_filters = 1);

/// Lowest-scored filters to remove this iteration: max(1, floor(fraction *
/// in-range filters)), skipping any that would push a layer below
/// min_filters. Ties break on FilterId.
std::set<FilterId> select_victims(const FilterScores& scores, const ModelState& model,
                                  const PruneRange& range, const PruneSchedule& sched);

/// Filters currently in range.
std::size_t filters_in_range(const ModelSpec& spec, const PruneRange& range);

/// One point of a pruning curve.
struct PruneSnapshot {
  std::size_t iteration = 0;
  ModelState state;
  double accuracy = 0.0;
  std::size_t filters_in_range = 0;
  double pruned_fraction = 0.0;  // relative to the start model's in-range count
  bool below_threshold = false;
};

using SnapshotCallback = std::function<void(const PruneSnapshot&)>;

/// Rank, remove, fine-tune and test until accuracy falls below the floor.
/// Returns an iteration-0 snapshot of the start model followed by one per
/// iteration; the last one is flagged when it fell below the floor. Empty
/// when the start model is already below the floor.
std::vector<PruneSnapshot> prune_iteratively(const ModelState& start, const DatasetHandle& data,
                                             const PruneRange& range, const PruneSchedule& sched,
                                             const SnapshotCallback& on_snapshot = {});

/// Step-1 output: the chosen record and the full global-range curve.
struct Step1Result {
  PrunedModelRecord record;
  std::vector<CurvePoint> curve;
};

/// Global-range pruning of the original model. The last snapshot still at
/// or above the floor becomes the step-1 model and is stored in the catalog.
/// Throws InvalidInput when the original is already below the floor.
Step1Result run_step1(Catalog& catalog, const ModelState& original, const DatasetHandle& data,
                      const PruneSchedule& sched, const SnapshotCallback& on_snapshot = {});

using FamilySnapshotCallback = std::function<void(std::size_t layer, const PruneSnapshot&)>;

/// One single-layer pruning family per Conv layer, each starting from the
/// step-1 model. Every snapshot, including the flagged final one, becomes a
/// record. Replaces any families already in the catalog.
void run_step2(Catalog& catalog, const DatasetHandle& data, const PruneSchedule& sched,
               const FamilySnapshotCallback& on_snapshot = {});

}  // namespace edgeprune
