#include <gtest/gtest.h>

#include <vector>

#include "edgeprune/rng.hpp"
#include "edgeprune/tensor.hpp"

using namespace edgeprune;

TEST(Tensor, ShapeAndIndexing) {
  Tensor t({2, 3, 4, 5});
  EXPECT_EQ(t.size(), 120u);
  EXPECT_EQ(t.item_size(), 60u);
  t.at(1, 2, 3, 4) = 7.0f;
  EXPECT_EQ(t[119], 7.0f);
  EXPECT_EQ(to_string(t.shape()), "(2, 3, 4, 5)");
}

TEST(Tensor, RejectsMismatchedValues) {
  EXPECT_ANY_THROW(Tensor({1, 2, 2, 2}, std::vector<float>(7)));
}

TEST(Tensor, SliceAndGather) {
  std::vector<float> v(24);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<float>(i);
  const Tensor t({4, 2, 3, 1}, v);
  const Tensor s = t.slice_batch(1, 2);
  EXPECT_EQ(s.shape(), (Shape{2, 2, 3, 1}));
  EXPECT_EQ(s[0], 6.0f);
  const std::vector<std::size_t> items{3, 0};
  const Tensor g = t.gather_batch(items);
  EXPECT_EQ(g[0], 18.0f);
  EXPECT_EQ(g[6], 0.0f);
  EXPECT_ANY_THROW(t.slice_batch(3, 2));
}

TEST(Tensor, ReshapeKeepsValues) {
  Tensor t({1, 2, 2, 2}, 1.5f);
  const Tensor r = t.reshaped({1, 8, 1, 1});
  EXPECT_EQ(r.size(), 8u);
  EXPECT_EQ(r[7], 1.5f);
  EXPECT_ANY_THROW(t.reshaped({1, 7, 1, 1}));
}

TEST(Tensor, FiniteAndDiff) {
  Tensor a({1, 1, 1, 3}, 1.0f);
  Tensor b = a;
  b[2] = 1.25f;
  EXPECT_FLOAT_EQ(max_abs_diff(a, b), 0.25f);
  EXPECT_TRUE(a.all_finite());
  a[0] = std::numeric_limits<float>::quiet_NaN();
  EXPECT_FALSE(a.all_finite());
}

TEST(Rng, DeterministicAndBounded) {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) {
    const double x = a.uniform();
    EXPECT_EQ(x, b.uniform());
    EXPECT_GE(x, 0.0);
    EXPECT_LT(x, 1.0);
    EXPECT_LT(a.below(7), 7u);
    b.below(7);
  }
}

TEST(Rng, ShuffleIsPermutation) {
  Rng r(3);
  std::vector<int> v{0, 1, 2, 3, 4, 5, 6, 7};
  r.shuffle(std::span<int>(v));
  std::vector<int> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_EQ(sorted, (std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7}));
}
