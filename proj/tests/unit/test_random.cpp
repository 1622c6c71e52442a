#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "jointspace/random.hpp"

using jointspace::Rng;

TEST(Rng, StreamsAreReproducible) {
  Rng a = Rng::stream(42, "x");
  Rng b = Rng::stream(42, "x");
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, NamesAndForksSeparateStreams) {
  Rng a = Rng::stream(42, "x");
  Rng b = Rng::stream(42, "y");
  EXPECT_NE(a.next_u64(), b.next_u64());
  Rng root(5);
  const Rng f1 = root.fork(1);
  root.next_u64();
  Rng f2 = root.fork(1);
  Rng f1c = f1;
  EXPECT_EQ(f1c.next_u64(), f2.next_u64());
}

TEST(Rng, UniformIndexBoundsAndCoverage) {
  Rng rng(9);
  std::vector<int> hits(7, 0);
  for (int i = 0; i < 7000; ++i) {
    const auto k = rng.uniform_index(7);
    ASSERT_LT(k, 7u);
    ++hits[k];
  }
  for (int h : hits) EXPECT_GT(h, 800);
  for (int i = 0; i < 1000; ++i) {
    const auto v = rng.uniform_int(-2, 2);
    EXPECT_GE(v, -2);
    EXPECT_LE(v, 2);
  }
}

TEST(Rng, NormalMoments) {
  Rng rng(13);
  double sum = 0.0;
  double sq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    sum += x;
    sq += x * x;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.01);
  EXPECT_NEAR(sq / n, 1.0, 0.01);
}

TEST(Rng, ShuffleIsPermutation) {
  Rng rng(21);
  std::vector<int> v(50);
  std::iota(v.begin(), v.end(), 0);
  rng.shuffle(v);
  auto sorted = v;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 50; ++i) EXPECT_EQ(sorted[i], i);
}
