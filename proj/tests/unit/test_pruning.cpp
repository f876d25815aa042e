#include <gtest/gtest.h>

#include "edgeprune/catalog.hpp"
#include "edgeprune/dataset.hpp"
#include "edgeprune/engine.hpp"
#include "edgeprune/error.hpp"
#include "edgeprune/pruning.hpp"
#include "edgeprune/rng.hpp"
#include "edgeprune/zoo.hpp"
#include "oracle.hpp"

using namespace edgeprune;

namespace {

ModelSpec mini(std::size_t hw = 8, std::size_t classes = 4) {
  return build_vgg_like(vgg_mini_config({3, hw, hw}, classes));
}

Tensor random_tensor(Shape shape, std::uint64_t seed) {
  Rng rng(seed);
  Tensor t(shape);
  for (float& v : t.values()) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  return t;
}

DatasetHandle tiny_data() {
  SyntheticConfig sc;
  sc.n_per_class = 24;
  sc.test_per_class = 8;
  sc.classes = 4;
  sc.shape = {3, 8, 8};
  sc.noise = 0.2;
  return gen_synthetic(sc);
}

// Zeroes the weights and bias of one filter so its ReLU output is always 0.
void kill_filter(ModelState& m, std::size_t layer, std::size_t filter) {
  Tensor& w = m.params[layer].weight;
  const std::size_t per = w.item_size();
  std::fill(w.data() + filter * per, w.data() + (filter + 1) * per, 0.0f);
  m.params[layer].bias[filter] = 0.0f;
}

}  // namespace

TEST(Pruning, RemovingFourOfSixteenFilters) {
  const ModelState m = init_model(mini(), 1);
  const std::set<FilterId> victims{{0, 1}, {0, 5}, {0, 9}, {0, 15}};
  const ModelState p = apply_prune(m, victims);
  EXPECT_EQ(std::get<Conv>(p.spec.layers[0]).out_channels, 12u);
  EXPECT_EQ(p.params[0].weight.shape(), (Shape{12, 3, 3, 3}));
  EXPECT_EQ(p.params[0].bias.size(), 12u);
  EXPECT_EQ(p.params[1].weight.shape(), (Shape{16, 12, 3, 3}));
  // Surviving filter 2 of layer 0 becomes filter 1.
  EXPECT_EQ(p.params[0].weight.at(1, 2, 1, 1), m.params[0].weight.at(2, 2, 1, 1));
  EXPECT_EQ(p.params[1].weight.at(3, 1, 0, 0), m.params[1].weight.at(3, 2, 0, 0));
}

TEST(Pruning, LastConvShrinksClassifierInput) {
  const ModelState m = init_model(mini(), 1);
  const ModelState p = apply_prune(m, {{6, 0}, {6, 63}});
  // conv5 -> pool3 (1x1 at 8x8 input) -> flatten -> fc
  EXPECT_EQ(p.params[9].weight.shape(), (Shape{4, 62, 1, 1}));
  EXPECT_EQ(p.params[9].weight.at(2, 0, 0, 0), m.params[9].weight.at(2, 1, 0, 0));
}

TEST(Pruning, DeadFiltersPruneWithoutChangingOutputs) {
  ModelState m = init_model(mini(), 3);
  for (std::size_t f : {2u, 7u, 11u}) kill_filter(m, 1, f);
  kill_filter(m, 3, 4);
  const Tensor x = random_tensor({4, 3, 8, 8}, 5);
  const ModelState p = apply_prune(m, {{1, 2}, {1, 7}, {1, 11}, {3, 4}});
  EXPECT_LT(max_abs_diff(forward(m, x), forward(p, x)), 1e-5f);
  EXPECT_EQ(filter_counts(p.spec)[1], 13u);
}

TEST(Pruning, DeadFiltersScoreZeroAndGoFirst) {
  const DatasetHandle d = tiny_data();
  ModelState m = init_model(mini(), 4);
  kill_filter(m, 0, 3);
  kill_filter(m, 3, 10);
  const FilterScores s = taylor_scores(m, d.train, PruneRange::global(), 2, 16);
  EXPECT_EQ(s.at({0, 3}), 0.0);
  EXPECT_EQ(s.at({3, 10}), 0.0);
  EXPECT_EQ(s.size(), 16u + 16 + 32 + 32 + 64);

  PruneSchedule sched;
  sched.fraction = 0.0125;  // floor(0.0125 * 160) = 2
  const auto victims = select_victims(s, m, PruneRange::global(), sched);
  EXPECT_EQ(victims, (std::set<FilterId>{{0, 3}, {3, 10}}));
}

TEST(Pruning, SingleLayerRange) {
  const DatasetHandle d = tiny_data();
  const ModelState m = init_model(mini(), 4);
  const FilterScores s = taylor_scores(m, d.train, PruneRange::single_layer(3), 1, 16);
  EXPECT_EQ(s.size(), 32u);
  for (const auto& [id, v] : s) EXPECT_EQ(id.layer, 3u);
  EXPECT_THROW(PruneRange::single_layer(2).layers(m.spec), InvalidInput);
  EXPECT_EQ(filters_in_range(m.spec, PruneRange::single_layer(6)), 64u);

  PruneSchedule sched;
  // max(1, floor(0.05 * 32)) = 1
  EXPECT_EQ(select_victims(s, m, PruneRange::single_layer(3), sched).size(), 1u);
}

TEST(Pruning, FilterFloorIsRespected) {
  ModelSpec spec = mini();
  std::get<Conv>(spec.layers[0]).out_channels = 2;
  const ModelState m = init_model(spec, 1);
  EXPECT_THROW(apply_prune(m, {{0, 0}, {0, 1}}), InvalidInput);
  EXPECT_THROW(apply_prune(m, {{0, 5}}), InvalidInput);
  EXPECT_THROW(apply_prune(m, {{2, 0}}), InvalidInput);

  FilterScores s;
  for (std::size_t f = 0; f < 2; ++f) s[{0, f}] = 0.0;
  PruneSchedule sched;
  sched.min_filters = 2;
  EXPECT_TRUE(select_victims(s, m, PruneRange::single_layer(0), sched).empty());
}

TEST(Pruning, IterativeLoopSnapshots) {
  const DatasetHandle d = tiny_data();
  TrainConfig tc;
  tc.epochs = 6;
  const ModelState m = train(init_model(mini(), 2), d.train, tc);
  PruneSchedule sched;
  sched.accuracy_floor = 0.0;
  sched.max_iterations = 3;
  sched.finetune_epochs = 1;
  sched.score_batches = 1;
  sched.finetune = tc;
  std::vector<std::size_t> seen;
  const auto snaps = prune_iteratively(m, d, PruneRange::global(), sched,
                                       [&](const PruneSnapshot& s) { seen.push_back(s.iteration); });
  ASSERT_EQ(snaps.size(), 4u);
  EXPECT_EQ(seen, (std::vector<std::size_t>{0, 1, 2, 3}));
  EXPECT_EQ(snaps[0].state, m);
  EXPECT_EQ(snaps[0].pruned_fraction, 0.0);
  EXPECT_EQ(snaps[1].filters_in_range, 160u - 8);
  for (std::size_t i = 1; i < snaps.size(); ++i) {
    EXPECT_LT(snaps[i].filters_in_range, snaps[i - 1].filters_in_range);
    EXPECT_GT(snaps[i].pruned_fraction, snaps[i - 1].pruned_fraction);
  }

  sched.accuracy_floor = 1.01;
  EXPECT_TRUE(prune_iteratively(m, d, PruneRange::global(), sched).empty());
}

TEST(Pruning, StopsBelowFloor) {
  const DatasetHandle d = tiny_data();
  TrainConfig tc;
  tc.epochs = 6;
  const ModelState m = train(init_model(mini(), 2), d.train, tc);
  const double start = evaluate(m, d.test);
  PruneSchedule sched;
  sched.fraction = 0.5;
  sched.finetune_epochs = 0;
  sched.score_batches = 1;
  sched.accuracy_floor = start - 1e-9;
  const auto snaps = prune_iteratively(m, d, PruneRange::global(), sched);
  ASSERT_GE(snaps.size(), 2u);
  EXPECT_TRUE(snaps.back().below_threshold);
  for (std::size_t i = 0; i + 1 < snaps.size(); ++i) EXPECT_FALSE(snaps[i].below_threshold);
}

TEST(Pruning, TwoStepCatalog) {
  const DatasetHandle d = tiny_data();
  TrainConfig tc;
  tc.epochs = 6;
  const ModelState m = train(init_model(mini(), 2), d.train, tc);
  const double acc = evaluate(m, d.test);
  oracle::TempDir tmp;
  Catalog cat = Catalog::create(tmp.path(), m, acc);
  PruneSchedule sched;
  sched.accuracy_floor = 0.0;
  sched.max_iterations = 2;
  sched.finetune_epochs = 1;
  sched.score_batches = 1;
  const Step1Result r1 = run_step1(cat, m, d, sched);
  EXPECT_EQ(r1.curve.size(), 3u);
  ASSERT_TRUE(cat.step1().has_value());
  EXPECT_EQ(cat.step1()->parent, 0);

  sched.max_iterations = 1;
  run_step2(cat, d, sched);
  EXPECT_EQ(cat.families().size(), 5u);
  for (const auto& [layer, family] : cat.families()) {
    EXPECT_EQ(family.size(), 2u);
    for (const auto& rec : family) EXPECT_EQ(rec.lineage.layer, layer);
  }
  EXPECT_NO_THROW(cat.validate());

  sched.accuracy_floor = 1.01;
  Catalog other = Catalog::create(tmp.path() / "other", m, acc);
  EXPECT_THROW(run_step1(other, m, d, sched), InvalidInput);
}
