#include "edgeprune/pruning.hpp"

#include <algorithm>
#include <cmath>

#include "edgeprune/error.hpp"

namespace edgeprune {

std::vector<std::size_t> PruneRange::layers(const ModelSpec& spec) const {
  if (layer_) {
    if (*layer_ >= spec.layers.size() || !is_conv(spec.layers[*layer_])) {
      throw InvalidInput("prune range names layer " + std::to_string(*layer_) +
                         ", which is not a Conv layer");
    }
    return {*layer_};
  }
  return conv_layers(spec);
}

void PruneSchedule::validate() const {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw InvalidInput("prune fraction must lie in (0, 1]");
  }
  if (min_filters < 1) throw InvalidInput("min_filters must be at least 1");
  if (score_batches < 1) throw InvalidInput("score_batches must be at least 1");
  if (score_batch_size < 1) throw InvalidInput("score_batch_size must be at least 1");
}

std::size_t filters_in_range(const ModelSpec& spec, const PruneRange& range) {
  std::size_t n = 0;
  for (std::size_t l : range.layers(spec)) n += std::get<Conv>(spec.layers[l]).out_channels;
  return n;
}

FilterScores taylor_scores(const ModelState& model, const Split& data, const PruneRange& range,
                           std::size_t batches, std::size_t batch_size) {
  const auto layers = range.layers(model.spec);
  if (batches == 0 || batch_size == 0) throw InvalidInput("need at least one scoring batch");
  if (data.size() == 0) throw InvalidInput("cannot score filters on an empty split");

  std::map<std::size_t, std::vector<double>> sums;
  for (std::size_t l : layers) {
    sums[l].assign(std::get<Conv>(model.spec.layers[l]).out_channels, 0.0);
  }
  std::vector<std::size_t> items(batch_size);
  std::vector<int> labels(batch_size);
  for (std::size_t b = 0; b < batches; ++b) {
    for (std::size_t k = 0; k < batch_size; ++k) {
      items[k] = (b * batch_size + k) % data.size();
      labels[k] = data.labels[items[k]];
    }
    const BackwardResult r = backward_with_capture(model, data.images.gather_batch(items), labels);
    for (std::size_t l : layers) {
      const Tensor& a = r.capture.activations[l];
      const Tensor& g = r.capture.gradients[l];
      const std::size_t channels = a.dim(1), plane = a.dim(2) * a.dim(3);
      const double denom = static_cast<double>(a.dim(0) * plane);
      for (std::size_t c = 0; c < channels; ++c) {
        double acc = 0.0;
        for (std::size_t n = 0; n < a.dim(0); ++n) {
          const std::size_t base = (n * channels + c) * plane;
          for (std::size_t k = 0; k < plane; ++k) {
            acc += std::abs(static_cast<double>(a[base + k]) * static_cast<double>(g[base + k]));
          }
        }
        sums[l][c] += acc / denom;
      }
    }
  }
  FilterScores scores;
  for (auto& [l, values] : sums) {
    double norm = 0.0;
    for (double& v : values) {
      v /= static_cast<double>(batches);
      norm += v * v;
    }
    norm = std::sqrt(norm);
    for (std::size_t c = 0; c < values.size(); ++c) {
      scores[{l, c}] = norm > 0.0 ? values[c] / norm : 0.0;
    }
  }
  return scores;
}

ModelState apply_prune(const ModelState& model, const std::set<FilterId>& victims,
                       std::size_t min_filters) {
  if (victims.empty()) return model;
  const ModelSpec& spec = model.spec;
  const auto shapes = infer_shapes(spec);
  const std::size_t layers = spec.layers.size();

  // keep_out[l]: surviving output channels of parameterized layer l.
  std::vector<std::vector<std::size_t>> keep_out(layers);
  for (std::size_t l = 0; l < layers; ++l) {
    if (const auto* c = std::get_if<Conv>(&spec.layers[l])) {
      keep_out[l].resize(c->out_channels);
    } else if (const auto* f = std::get_if<FullyConnected>(&spec.layers[l])) {
      keep_out[l].resize(f->out_features);
    }
    for (std::size_t k = 0; k < keep_out[l].size(); ++k) keep_out[l][k] = k;
  }
  std::map<std::size_t, std::set<std::size_t>> by_layer;
  for (const FilterId& v : victims) {
    if (v.layer >= layers || !is_conv(spec.layers[v.layer])) {
      throw InvalidInput("filter (" + std::to_string(v.layer) + ", " + std::to_string(v.filter) +
                         ") is not in a Conv layer");
    }
    if (v.filter >= keep_out[v.layer].size()) {
      throw InvalidInput("layer " + std::to_string(v.layer) + " has no filter " +
                         std::to_string(v.filter));
    }
    by_layer[v.layer].insert(v.filter);
  }
  for (const auto& [l, removed] : by_layer) {
    const std::size_t left = keep_out[l].size() - removed.size();
    if (left < std::max<std::size_t>(min_filters, 1)) {
      throw InvalidInput("pruning " + std::to_string(removed.size()) + " filters from layer " +
                         std::to_string(l) + " leaves " + std::to_string(left) +
                         ", below the floor of " + std::to_string(std::max<std::size_t>(min_filters, 1)));
    }
    std::erase_if(keep_out[l], [&](std::size_t k) { return removed.contains(k); });
  }

  // keep_in[l]: surviving input columns (in units of weight dim 1).
  std::vector<std::vector<std::size_t>> keep_in(layers);
  std::optional<std::size_t> producer;
  std::size_t flatten_plane = 1;
  for (std::size_t l = 0; l < layers; ++l) {
    const Layer& layer = spec.layers[l];
    if (std::holds_alternative<Flatten>(layer)) {
      flatten_plane = shapes[l].height * shapes[l].width;
      continue;
    }
    if (!has_params(layer)) continue;
    const std::size_t in = model.params[l].weight.dim(1);
    if (!producer) {
      keep_in[l].resize(in);
      for (std::size_t k = 0; k < in; ++k) keep_in[l][k] = k;
    } else if (is_conv(layer)) {
      keep_in[l] = keep_out[*producer];
    } else {
      const std::size_t plane = is_conv(spec.layers[*producer]) ? flatten_plane : 1;
      for (std::size_t c : keep_out[*producer]) {
        for (std::size_t s = 0; s < plane; ++s) keep_in[l].push_back(c * plane + s);
      }
    }
    producer = l;
  }

  ModelState out;
  out.spec = spec;
  out.seed = model.seed;
  out.params.resize(layers);
  for (std::size_t l = 0; l < layers; ++l) {
    if (!has_params(spec.layers[l])) continue;
    const Tensor& w = model.params[l].weight;
    const std::size_t in = w.dim(1), kh = w.dim(2), kw = w.dim(3), area = kh * kw;
    Tensor nw({keep_out[l].size(), keep_in[l].size(), kh, kw});
    std::vector<float> nb;
    for (std::size_t o = 0; o < keep_out[l].size(); ++o) {
      const std::size_t src_o = keep_out[l][o];
      for (std::size_t i = 0; i < keep_in[l].size(); ++i) {
        const float* src = w.data() + (src_o * in + keep_in[l][i]) * area;
        std::copy_n(src, area, nw.data() + (o * keep_in[l].size() + i) * area);
      }
      nb.push_back(model.params[l].bias[src_o]);
    }
    out.params[l].weight = std::move(nw);
    out.params[l].bias = std::move(nb);
    if (auto* c = std::get_if<Conv>(&out.spec.layers[l])) c->out_channels = keep_out[l].size();
  }
  validate_spec(out.spec);
  return out;
}

std::set<FilterId> select_victims(const FilterScores& scores, const ModelState& model,
                                  const PruneRange& range, const PruneSchedule& sched) {
  const std::size_t in_range = filters_in_range(model.spec, range);
  const auto wanted = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::floor(sched.fraction * static_cast<double>(in_range))));
  std::vector<std::pair<double, FilterId>> ranked;
  for (const auto& [id, score] : scores) {
    if (range.contains(id.layer)) ranked.emplace_back(score, id);
  }
  std::sort(ranked.begin(), ranked.end());
  std::map<std::size_t, std::size_t> remaining;
  for (std::size_t l : range.layers(model.spec)) {
    remaining[l] = std::get<Conv>(model.spec.layers[l]).out_channels;
  }
  const std::size_t floor = std::max<std::size_t>(sched.min_filters, 1);
  std::set<FilterId> victims;
  for (const auto& [score, id] : ranked) {
    if (victims.size() == wanted) break;
    if (remaining[id.layer] <= floor) continue;
    --remaining[id.layer];
    victims.insert(id);
  }
  return victims;
}

std::vector<PruneSnapshot> prune_iteratively(const ModelState& start, const DatasetHandle& data,
                                             const PruneRange& range, const PruneSchedule& sched,
                                             const SnapshotCallback& on_snapshot) {
  sched.validate();
  const std::size_t initial = filters_in_range(start.spec, range);
  if (initial == 0) throw InvalidInput("prune range holds no filters");
  std::vector<PruneSnapshot> snapshots;
  const double start_accuracy = evaluate(start, data.test);
  if (start_accuracy < sched.accuracy_floor) return snapshots;

  auto record = [&](PruneSnapshot snap) {
    if (on_snapshot) on_snapshot(snap);
    snapshots.push_back(std::move(snap));
  };
  record({0, start, start_accuracy, initial, 0.0, false});

  ModelState current = start;
  for (std::size_t iteration = 1; iteration <= sched.max_iterations; ++iteration) {
    const FilterScores scores =
        taylor_scores(current, data.train, range, sched.score_batches, sched.score_batch_size);
    const auto victims = select_victims(scores, current, range, sched);
    if (victims.empty()) break;
    current = apply_prune(current, victims, sched.min_filters);
    TrainConfig tune = sched.finetune;
    tune.epochs = sched.finetune_epochs;
    tune.seed = sched.finetune.seed + 7919 * iteration;
    current = train(std::move(current), data.train, tune);
    const double accuracy = evaluate(current, data.test);
    const std::size_t left = filters_in_range(current.spec, range);
    const bool below = accuracy < sched.accuracy_floor;
    record({iteration, current, accuracy, left,
            1.0 - static_cast<double>(left) / static_cast<double>(initial), below});
    if (below) break;
  }
  return snapshots;
}

namespace {

PrunedModelRecord record_from(const PruneSnapshot& snap, Lineage lineage, int parent) {
  PrunedModelRecord r;
  r.parent = parent;
  r.lineage = lineage;
  r.filter_counts = filter_counts(snap.state.spec);
  r.pruned_fraction = snap.pruned_fraction;
  r.accuracy = snap.accuracy;
  r.below_threshold = snap.below_threshold;
  return r;
}

}  // namespace

Step1Result run_step1(Catalog& catalog, const ModelState& original, const DatasetHandle& data,
                      const PruneSchedule& sched, const SnapshotCallback& on_snapshot) {
  auto snapshots = prune_iteratively(original, data, PruneRange::global(), sched, on_snapshot);
  if (snapshots.empty()) {
    throw InvalidInput("original model is already below the step-1 accuracy floor");
  }
  std::vector<CurvePoint> curve;
  for (const auto& s : snapshots) {
    curve.push_back({s.iteration, s.pruned_fraction, s.accuracy, s.filters_in_range, s.below_threshold});
  }
  auto chosen = std::find_if(snapshots.rbegin(), snapshots.rend(),
                             [](const PruneSnapshot& s) { return !s.below_threshold; });
  PrunedModelRecord record = record_from(*chosen, {LineageKind::Step1, 0, chosen->iteration},
                                         catalog.original().id);
  const PrunedModelRecord& stored = catalog.set_step1(std::move(record), chosen->state, curve);
  return {stored, std::move(curve)};
}

void run_step2(Catalog& catalog, const DatasetHandle& data, const PruneSchedule& sched,
               const FamilySnapshotCallback& on_snapshot) {
  if (!catalog.step1()) throw InvalidInput("step 2 needs a step-1 record in the catalog");
  const int parent = catalog.step1()->id;
  const ModelState step1 = catalog.load_state(parent);
  catalog.clear_families();
  for (std::size_t layer : conv_layers(step1.spec)) {
    SnapshotCallback cb;
    if (on_snapshot) cb = [&](const PruneSnapshot& s) { on_snapshot(layer, s); };
    const auto snapshots =
        prune_iteratively(step1, data, PruneRange::single_layer(layer), sched, cb);
    for (const auto& snap : snapshots) {
      catalog.add_to_family(layer,
                            record_from(snap, {LineageKind::Step2, layer, snap.iteration}, parent),
                            snap.state);
    }
  }
}

}  // namespace edgeprune
