#include "dreamland/rng.hpp"

#include <cmath>
#include <vector>

#include <gtest/gtest.h>

namespace dreamland {
namespace {

TEST(Rng, SameSeedSameStream) {
  Rng a(42);
  Rng b(42);
  for (int i = 0; i < 100; ++i) {
    ASSERT_EQ(a.next_u64(), b.next_u64());
  }
}

TEST(Rng, DerivedStreamsDependOnPath) {
  EXPECT_EQ(Rng::derive_seed(1, {2, 3}), Rng::derive_seed(1, {2, 3}));
  EXPECT_NE(Rng::derive_seed(1, {2, 3}), Rng::derive_seed(1, {3, 2}));
  EXPECT_NE(Rng::derive_seed(1, {2}), Rng::derive_seed(2, {2}));
}

TEST(Rng, SplitDoesNotAdvanceParent) {
  Rng a(5);
  Rng b(5);
  (void)a.split(9).next_u64();
  EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, UniformInRange) {
  Rng rng(3);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

TEST(Rng, NormalMoments) {
  Rng rng(11);
  const int n = 100000;
  double sum = 0.0;
  double sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    sum += x;
    sq += x * x;
  }
  const double mean = sum / n;
  EXPECT_NEAR(mean, 0.0, 4.0 / std::sqrt(n));
  EXPECT_NEAR(sq / n - mean * mean, 1.0, 0.02);
}

TEST(Rng, IndexCoversRange) {
  Rng rng(8);
  std::vector<int> counts(5, 0);
  for (int i = 0; i < 5000; ++i) {
    const auto k = rng.index(5);
    ASSERT_LT(k, 5u);
    ++counts[k];
  }
  for (int c : counts) {
    EXPECT_GT(c, 800);
  }
}

}  // namespace
}  // namespace dreamland
