// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. The desk-scale pipeline runs once and feeds criteria 6-9.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "edgeprune/codec.hpp"
#include "edgeprune/config.hpp"
#include "edgeprune/dataset.hpp"
#include "edgeprune/edgesim.hpp"
#include "edgeprune/engine.hpp"
#include "edgeprune/error.hpp"
#include "edgeprune/pipeline.hpp"
#include "edgeprune/planner.hpp"
#include "edgeprune/profiler.hpp"
#include "edgeprune/pruning.hpp"
#include "edgeprune/rng.hpp"
#include "edgeprune/units.hpp"
#include "edgeprune/zoo.hpp"
#include "oracle.hpp"

using namespace edgeprune;
using Clock = std::chrono::steady_clock;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

std::string fmt(double v, int precision = 3) {
  std::ostringstream out;
  out.precision(precision);
  out << v;
  return out.str();
}

Tensor random_tensor(const Shape& shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  Tensor t(shape);
  Rng rng(seed);
  for (float& v : t.values()) v = static_cast<float>(rng.uniform(lo, hi));
  return t;
}

bool same_plan(const PartitionPlan& a, const PartitionPlan& b) {
  if (a.feasible != b.feasible) return false;
  if (!a.feasible) return true;
  return a.record_id == b.record_id && a.partition == b.partition && a.total_s == b.total_s &&
         a.mobile_s == b.mobile_s && a.transmission_s == b.transmission_s &&
         a.server_s == b.server_s && a.transmitted_bytes == b.transmitted_bytes;
}

// ---------------------------------------------------------------------------

Verdict gradient_fidelity() {
  ModelSpec s;
  s.input = {2, 6, 6};
  s.classes = 3;
  s.layers = {Conv{3}, MaxPool{}, Conv{4}, Flatten{}, FullyConnected{3}};
  ModelState m = init_model(s, 41);
  Rng rng(42);
  for (auto& p : m.params) {
    for (float& b : p.bias) b = static_cast<float>(rng.uniform(-0.2, 0.2));
  }
  const Tensor x = random_tensor({4, 2, 6, 6}, 43);
  const std::vector<int> labels{0, 1, 2, 1};
  const BackwardResult r = backward_with_capture(m, x, labels);

  std::size_t total = 0, good = 0;
  const float eps = 1e-3f;
  auto check = [&](float& param, double analytic) {
    const float saved = param;
    param = saved + eps;
    const double hi = param;
    const double up = oracle::loss(oracle::forward(m, x), labels);
    param = saved - eps;
    const double lo = param;
    const double down = oracle::loss(oracle::forward(m, x), labels);
    param = saved;
    const double numeric = (up - down) / (hi - lo);
    const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-3});
    ++total;
    if (std::abs(numeric - analytic) / denom <= 1e-2) ++good;
  };
  for (std::size_t l = 0; l < m.params.size(); ++l) {
    for (std::size_t i = 0; i < m.params[l].weight.size(); ++i) {
      check(m.params[l].weight[i], r.param_grads[l].weight[i]);
    }
    for (std::size_t i = 0; i < m.params[l].bias.size(); ++i) {
      check(m.params[l].bias[i], r.param_grads[l].bias[i]);
    }
  }
  const double frac = static_cast<double>(good) / static_cast<double>(total);
  return {frac >= 0.99, std::to_string(good) + "/" + std::to_string(total) +
                            " parameters within 1e-2 relative (" + fmt(100.0 * frac, 4) + "%)"};
}

Verdict partition_transparency() {
  const ModelState m = init_model(build_vgg_like(vgg_mini_config()), 5);
  ProfileOptions opts;
  const ModelProfile profile = profile_model(m, opts);
  const std::size_t layers = m.spec.layer_count();
  float worst = 0.0f;
  std::size_t runs = 0, bad = 0;
  for (std::uint64_t sample = 0; sample < 4; ++sample) {
    const Tensor x = random_tensor(m.spec.input.batched(1), 100 + sample);
    for (std::size_t p = 0; p <= layers; ++p) {
      const InferenceTrace t = run_partitioned(m, x, p, {}, profile);
      worst = std::max(worst, t.max_logit_diff);
      ++runs;
      if (!(t.max_logit_diff <= 1e-5f)) ++bad;
    }
  }
  return {bad == 0, std::to_string(runs) + " runs over p in [0, " + std::to_string(layers) +
                        "], max |diff| " + fmt(worst)};
}

Verdict planner_oracle() {
  const CandidatePolicy policies[] = {CandidatePolicy::AllLayers, CandidatePolicy::PoolingOnly,
                                      CandidatePolicy::EndpointsIncluded};
  std::size_t compared = 0, mismatched = 0, ties = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    for (bool codec : {false, true}) {
      const auto cat = oracle::random_catalog(seed, 20, 50, codec);
      for (CandidatePolicy policy : policies) {
        SystemConfig cfg;
        cfg.gamma = std::ldexp(1.0, static_cast<int>(seed % 7) - 2);
        cfg.upload_rate = std::ldexp(1.0, static_cast<int>(seed % 11) + 6);
        cfg.accuracy_floor = static_cast<double>(seed % 5) / 5.0;
        cfg.policy = policy;
        cfg.codec = codec;
        const PartitionPlan got = select_plan(cat.candidates, cfg);
        const PartitionPlan want = oracle::brute_force_plan(cat.candidates, cfg);
        ++compared;
        if (!same_plan(got, want)) ++mismatched;
        // Count cells where more than one pair reached the optimum.
        if (want.feasible) {
          std::size_t at_min = 0;
          for (const auto& c : cat.candidates) {
            if (!(c.accuracy > cfg.accuracy_floor)) continue;
            for (std::size_t q : allowed_partitions(c, policy)) {
              if (evaluate_plan(c, q, cfg).total_s == want.total_s) ++at_min;
            }
          }
          if (at_min > 1) ++ties;
        }
      }
    }
  }
  return {mismatched == 0, std::to_string(compared) + " selections on 200 catalogs, " +
                               std::to_string(mismatched) + " mismatches, " + std::to_string(ties) +
                               " with tied optima"};
}

Verdict latency_hand_values() {
  const double mobile = mobile_latency(0.002, 5.0);
  const double rate = parse_rate("137.5kB/s");
  const double tx = transmission_latency(137500.0, rate);
  return {mobile == 0.010 && tx == 1.0,
          "gamma 5 x 2 ms = " + fmt(mobile * 1e3, 17) + " ms; 137500 B at 137.5kB/s = " +
              fmt(tx, 17) + " s"};
}

Verdict taylor_fidelity() {
  SyntheticConfig sc;
  sc.seed = 21;
  sc.classes = 4;
  sc.n_per_class = 64;
  sc.test_per_class = 16;
  sc.shape = {3, 8, 8};
  const DatasetHandle data = gen_synthetic(sc);
  ModelSpec spec;
  spec.input = sc.shape;
  spec.classes = sc.classes;
  spec.layers = {Conv{8}, MaxPool{}, Conv{8}, MaxPool{}, Flatten{}, FullyConnected{4}};
  TrainConfig tc;
  tc.epochs = 8;
  tc.seed = 22;
  const ModelState model = train(init_model(spec, 23), data.train, tc);

  const std::size_t batches = 4, batch_size = 32;
  const FilterScores scores = taylor_scores(model, data.train, PruneRange::global(), batches, batch_size);
  std::vector<std::size_t> items(batches * batch_size);
  for (std::size_t i = 0; i < items.size(); ++i) items[i] = i % data.train.size();
  const Tensor x = data.train.images.gather_batch(items);
  std::vector<int> labels;
  for (std::size_t i : items) labels.push_back(data.train.labels[i]);
  const double base = loss(model, x, labels);

  std::map<std::size_t, std::pair<std::vector<double>, std::vector<double>>> per_layer;
  std::vector<double> all_taylor, all_delta;
  for (const auto& [id, score] : scores) {
    ModelState ablated = model;
    LayerParams& p = ablated.params[id.layer];
    const std::size_t per_filter = p.weight.size() / p.bias.size();
    for (std::size_t k = 0; k < per_filter; ++k) p.weight[id.filter * per_filter + k] = 0.0f;
    p.bias[id.filter] = 0.0f;
    const double delta = std::abs(loss(ablated, x, labels) - base);
    per_layer[id.layer].first.push_back(score);
    per_layer[id.layer].second.push_back(delta);
    all_taylor.push_back(score);
    all_delta.push_back(delta);
  }
  double worst = 1.0;
  std::string detail;
  for (const auto& [layer, pair] : per_layer) {
    const double rho = oracle::spearman(pair.first, pair.second);
    worst = std::min(worst, rho);
    detail += "conv@" + std::to_string(layer) + " rho " + fmt(rho) + ", ";
  }
  detail += "pooled rho " + fmt(oracle::spearman(all_taylor, all_delta)) + " over " +
            std::to_string(all_taylor.size()) + " filters";
  return {worst >= 0.5, detail};
}

// ---------------------------------------------------------------------------
// Desk-scale run shared by criteria 6-9.

struct DeskRun {
  oracle::TempDir dir;
  PipelineConfig cfg;
  std::unique_ptr<Pipeline> pipeline;
  std::optional<Catalog> catalog;
  DatasetHandle data;
  double seconds = 0.0;
  std::string error;
};

DeskRun& desk() {
  static std::unique_ptr<DeskRun> run;
  if (run) return *run;
  run = std::make_unique<DeskRun>();
  run->cfg = PipelineConfig{};
  run->cfg.run_name = "desk";
  const auto start = Clock::now();
  try {
    run->pipeline = std::make_unique<Pipeline>(run->cfg, run->dir.path() / "desk", &std::cerr);
    run->pipeline->run_through(Stage::Report);
    run->seconds = seconds_since(start);
    run->catalog = Catalog::load(run->pipeline->catalog_dir());
    run->data = load_dataset(run->cfg.dataset);
  } catch (const std::exception& e) {
    run->seconds = seconds_since(start);
    run->error = e.what();
  }
  return *run;
}

const ModelProfile& profile_of(const Catalog& cat, int id) {
  const ModelProfile* p = cat.profile(id);
  if (p == nullptr) throw std::runtime_error("record " + std::to_string(id) + " has no profile");
  return *p;
}

Verdict desk_pipeline() {
  DeskRun& d = desk();
  if (!d.error.empty()) return {false, "pipeline failed after " + fmt(d.seconds) + " s: " + d.error};
  const Catalog& cat = *d.catalog;
  const double baseline = cat.original().accuracy;
  const PrunedModelRecord& s1 = cat.step1().value();
  const double floor = baseline - d.cfg.prune.step2_budget;
  const ModelProfile& s1_prof = profile_of(cat, s1.id);

  double best_ratio = 0.0;
  std::string best_where = "none";
  for (const auto& [layer, family] : cat.families()) {
    if (layer + 1 >= s1_prof.layer_count() || s1_prof.layers[layer + 1].kind != "pool") continue;
    const std::size_t p = layer + 2;
    for (const auto& r : family) {
      if (!(r.accuracy > floor)) continue;
      const double ratio = static_cast<double>(s1_prof.layers[p - 1].bytes) /
                           static_cast<double>(profile_of(cat, r.id).layers[p - 1].bytes);
      if (ratio > best_ratio) {
        best_ratio = ratio;
        best_where = s1_prof.layers[p - 1].name + " by record " + std::to_string(r.id) + " (acc " +
                     fmt(r.accuracy) + ")";
      }
    }
  }
  const bool base_ok = baseline >= 0.95;
  const bool step1_ok = s1.pruned_fraction >= 0.30 && baseline - s1.accuracy <= 0.04;
  const bool step2_ok = best_ratio >= 2.0;
  const bool time_ok = d.seconds < 15 * 60;
  std::string detail = "baseline " + fmt(baseline) + (base_ok ? "" : " (< 0.95)") + "; step 1 removed " +
                       fmt(100.0 * s1.pruned_fraction) + "% at acc " + fmt(s1.accuracy) +
                       (step1_ok ? "" : " (needs >= 30% within 4 points)") + "; best step-2 D cut " +
                       fmt(best_ratio) + "x at " + best_where + (step2_ok ? "" : " (< 2x)") + "; " +
                       std::to_string(cat.records().size()) + " records in " + fmt(d.seconds) + " s" +
                       (time_ok ? "" : " (> 15 min)");
  return {base_ok && step1_ok && step2_ok && time_ok, detail};
}

struct MonotoneCount {
  std::size_t grids = 0, cells = 0, violations = 0;
};

void check_monotone(const std::vector<PlanCandidate>& candidates, const SystemConfig& base,
                    const std::vector<double>& rates, const std::vector<double>& gammas,
                    MonotoneCount& out) {
  const SweepResult s = sweep(candidates, rates, gammas, base);
  ++out.grids;
  for (std::size_t i = 0; i < rates.size(); ++i) {
    for (std::size_t j = 0; j < gammas.size(); ++j) {
      const PartitionPlan& here = s.plans[i][j];
      ++out.cells;
      if (i + 1 < rates.size()) {
        const PartitionPlan& faster = s.plans[i + 1][j];
        if (faster.feasible != here.feasible || (here.feasible && faster.total_s > here.total_s)) {
          ++out.violations;
        }
      }
      if (j + 1 < gammas.size()) {
        const PartitionPlan& slower = s.plans[i][j + 1];
        if (slower.feasible != here.feasible || (here.feasible && slower.total_s < here.total_s)) {
          ++out.violations;
        }
      }
    }
  }
}

Verdict sweep_monotonicity() {
  MonotoneCount random_count;
  std::vector<double> rates, gammas;
  for (int i = 0; i < 10; ++i) {
    rates.push_back(1e3 * std::pow(2.5, i));
    gammas.push_back(0.5 * std::pow(2.0, i));
  }
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    for (bool codec : {false, true}) {
      const auto cat = oracle::random_catalog(1000 + seed, 20, 50, codec);
      SystemConfig base;
      base.codec = codec;
      base.accuracy_floor = static_cast<double>(seed % 4) / 8.0;
      base.policy = static_cast<CandidatePolicy>(seed % 3);
      check_monotone(cat.candidates, base, rates, gammas, random_count);
    }
  }
  DeskRun& d = desk();
  if (!d.error.empty()) return {false, "desk pipeline unavailable: " + d.error};
  MonotoneCount desk_count;
  const auto candidates = plan_candidates(*d.catalog);
  for (bool codec : {false, true}) {
    SystemConfig base = d.pipeline->system_config(*d.catalog);
    base.codec = codec;
    check_monotone(candidates, base, d.cfg.sweep.rates, d.cfg.sweep.gammas, desk_count);
  }
  return {random_count.violations == 0 && desk_count.violations == 0,
          std::to_string(random_count.grids) + " random 10x10 grids, " +
              std::to_string(random_count.violations) + " violations; desk " +
              std::to_string(desk_count.grids) + " grids (" + std::to_string(d.cfg.sweep.rates.size()) +
              "x" + std::to_string(d.cfg.sweep.gammas.size()) + "), " +
              std::to_string(desk_count.violations) + " violations"};
}

Tensor structured_tensor(std::uint64_t seed) {
  Rng rng(seed);
  const Shape shape{1 + rng.below(3), 1 + rng.below(16), 1 + rng.below(12), 1 + rng.below(12)};
  Tensor t(shape);
  auto v = t.values();
  const std::size_t kind = seed % 6;
  for (std::size_t i = 0; i < v.size(); ++i) {
    switch (kind) {
      case 0: v[i] = 0.0f; break;                                                   // all zero
      case 1: v[i] = 3.25f; break;                                                  // constant
      case 2: v[i] = rng.uniform(0.0, 1.0) < 0.8 ? 0.0f : static_cast<float>(rng.uniform(0.0, 5.0)); break;
      case 3: v[i] = static_cast<float>(i % 97) * 0.01f; break;                     // ramp
      case 4: v[i] = -static_cast<float>(rng.uniform(0.0, 2.0)); break;             // negative
      default: v[i] = static_cast<float>(rng.uniform(-1e4, 1e4)); break;            // wide
    }
  }
  return t;
}

Verdict codec_criterion() {
  // Round trips.
  std::size_t tensors = 0, failures = 0;
  for (std::uint64_t i = 0; i < 1000; ++i) {
    Tensor t;
    if (i % 2 == 0) {
      Rng rng(7000 + i);
      const Shape shape{1 + rng.below(2), 1 + rng.below(20), 1 + rng.below(16), 1 + rng.below(16)};
      t = random_tensor(shape, 9000 + i, -3.0, 3.0);
    } else {
      t = structured_tensor(8000 + i);
    }
    ++tensors;
    const QuantizedTensor q = quantize(t);
    const Tensor expected = dequantize(q);
    for (CodecId codec : {CodecId::Raw, CodecId::ZeroRleDeflate, CodecId::Png}) {
      const EncodedBlob blob = encode(q, codec);
      const DecodedBlob back = decode(blob.wire);
      const Tensor restored = decode_tensor(blob.wire);
      const bool exact = back.codes == q.codes && back.shape == q.shape && back.params == q.params &&
                         restored.shape() == expected.shape() &&
                         std::equal(restored.values().begin(), restored.values().end(),
                                    expected.values().begin());
      if (!exact) ++failures;
    }
  }

  DeskRun& d = desk();
  if (!d.error.empty()) return {false, "desk pipeline unavailable: " + d.error};
  const Catalog& cat = *d.catalog;
  const ModelState original = cat.load_state(cat.original().id);
  const CodecId codec = d.cfg.profile.codec_id;
  const double base_acc = evaluate(original, d.data.test);
  double worst_ratio = 1e9, worst_delta = 0.0;
  std::string points;
  for (std::size_t l = 0; l < original.spec.layer_count(); ++l) {
    if (!is_pool(original.spec.layers[l])) continue;
    const std::size_t p = l + 1;
    const CompressionStats stats = measure_compression(original, d.data.test, p, codec, d.data.test.size());
    const double delta = std::abs(base_acc - evaluate_with_codec(original, d.data.test, p, codec));
    worst_ratio = std::min(worst_ratio, stats.ratio());
    worst_delta = std::max(worst_delta, delta);
    points += layer_name(original.spec, l) + " " + fmt(stats.ratio()) + "x/" + fmt(100.0 * delta, 2) + "pt, ";
  }
  const bool ok = failures == 0 && worst_ratio >= 1.5 && worst_delta <= 0.005;
  return {ok, std::to_string(tensors) + " tensors x 3 codecs, " + std::to_string(failures) +
                  " round-trip failures; original model pool points (ratio vs 8-bit / accuracy delta): " +
                  points + "need >= 1.5x and <= 0.5pt everywhere"};
}

Verdict plan_vs_simulation() {
  DeskRun& d = desk();
  if (!d.error.empty()) return {false, "desk pipeline unavailable: " + d.error};
  const Catalog& cat = *d.catalog;
  const auto candidates = plan_candidates(cat);
  const Tensor probe = d.data.test.sample(0);
  std::size_t checked = 0, failed = 0;
  double worst = 0.0;
  std::string first_failure;

  auto check = [&](const ModelState& model, const Tensor& input, const ModelProfile& profile,
                   const PartitionPlan& plan, const SystemConfig& sys, CodecId codec_id,
                   double codec_rate) {
    SimConfig sim;
    sim.gamma = sys.gamma;
    sim.link.rate = sys.upload_rate;
    sim.codec = sys.codec;
    sim.codec_id = codec_id;
    sim.result_bytes = sys.result_bytes;
    sim.codec_bytes_per_second = codec_rate;
    const InferenceTrace t = run_partitioned(model, input, plan.partition, sim, profile);
    ++checked;
    try {
      for (const auto& c : validate_plan(plan, t).checks) worst = std::max(worst, c.relative_error);
    } catch (const ValidationError& e) {
      ++failed;
      if (first_failure.empty()) first_failure = e.what();
    }
  };

  // Every feasible (record, partition) pair of the desk catalog, codec off
  // and on, at the three reference rates.
  for (double rate : d.cfg.sweep.table_rates) {
    for (bool codec : {false, true}) {
      SystemConfig sys = d.pipeline->system_config(cat);
      sys.upload_rate = rate;
      sys.gamma = d.cfg.sweep.table_gamma;
      sys.codec = codec;
      for (const PlanCandidate& c : candidates) {
        if (!(c.accuracy > sys.accuracy_floor)) continue;
        const ModelState model = cat.load_state(c.record_id);
        for (std::size_t p : allowed_partitions(c, sys.policy)) {
          check(model, probe, *c.profile, evaluate_plan(c, p, sys), sys, d.cfg.profile.codec_id,
                d.cfg.profile.codec_bytes_per_second);
        }
      }
    }
  }

  // Selected plans on random VGG-style models.
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(300 + seed);
    VggConfig vc;
    const std::size_t stages = 1 + rng.below(3);
    for (std::size_t s = 0; s < stages; ++s) {
      vc.widths.push_back(2 + rng.below(12));
      vc.convs.push_back(1 + rng.below(2));
    }
    vc.input = {1 + rng.below(3), 16, 16};
    vc.classes = 2 + rng.below(8);
    const ModelState model = init_model(build_vgg_like(vc), seed);
    const Tensor input = random_tensor(model.spec.input.batched(1), 400 + seed);
    ProfileOptions opts;
    opts.codec = seed % 2 == 1;
    opts.flops_per_second = 1e8 * (1 + rng.below(20));
    const ModelProfile profile = profile_model(model, opts, &input);
    SystemConfig sys;
    sys.gamma = 1.0 + static_cast<double>(rng.below(50));
    sys.upload_rate = 1e4 * static_cast<double>(1 + rng.below(1000));
    sys.codec = opts.codec;
    sys.policy = static_cast<CandidatePolicy>(seed % 3);
    const PartitionPlan plan = select_plan({{0, 1.0, &profile, std::nullopt}}, sys);
    if (plan.feasible) check(model, input, profile, plan, sys, opts.codec_id, opts.codec_bytes_per_second);
  }

  return {failed == 0 && checked > 0,
          std::to_string(checked) + " plans simulated, " + std::to_string(failed) +
              " outside 1%, worst relative error " + fmt(worst) +
              (first_failure.empty() ? "" : "; first: " + first_failure)};
}

}  // namespace

int main() {
  struct Criterion {
    int number;
    const char* name;
    std::function<Verdict()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "gradient-fidelity", gradient_fidelity},
      {2, "partition-transparency", partition_transparency},
      {3, "planner-oracle", planner_oracle},
      {4, "latency-hand-values", latency_hand_values},
      {5, "taylor-fidelity", taylor_fidelity},
      {6, "desk-pipeline", desk_pipeline},
      {7, "sweep-monotonicity", sweep_monotonicity},
      {8, "feature-codec", codec_criterion},
      {9, "plan-vs-simulation", plan_vs_simulation},
  };
  int failed = 0;
  for (const Criterion& c : criteria) {
    const auto start = Clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    if (!v.pass) ++failed;
    std::cout << (v.pass ? "[PASS] " : "[FAIL] ") << c.number << ' ' << c.name << ": " << v.detail
              << " (" << fmt(seconds_since(start)) << " s)" << std::endl;
  }
  std::cout << (criteria.size() - failed) << '/' << criteria.size() << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
