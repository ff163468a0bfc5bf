#include "selbias/core.hpp"
#include "selbias/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace selbias;

TEST(Rng, SameSeedSameDraws) {
  RngStream a = new_rng(7), b = new_rng(7);
  for (int i = 0; i < 100; ++i) ASSERT_EQ(a.uniform(), b.uniform());
}

TEST(Rng, DifferentSeedsDiffer) {
  EXPECT_NE(new_rng(7).next_u64(), new_rng(8).next_u64());
}

TEST(Rng, BernoulliDegenerate) {
  RngStream r(3);
  for (int i = 0; i < 1000; ++i) {
    EXPECT_FALSE(r.bernoulli(0.0));
    EXPECT_TRUE(r.bernoulli(1.0));
  }
}

TEST(Rng, SplitStreamsAreStable) {
  RngStream root(11);
  RngStream used = root;
  for (int i = 0; i < 50; ++i) used.next_u64();
  // A child depends on the seed and tag, not on how far the parent advanced.
  EXPECT_EQ(root.split("noise").next_u64(), used.split("noise").next_u64());
  EXPECT_NE(root.split("noise").next_u64(), root.split("treatment").next_u64());
}

TEST(Rng, CounterTracksDraws) {
  RngStream r(1);
  r.uniform();
  r.uniform();
  EXPECT_EQ(r.counter(), 2u);
}

TEST(Rng, UniformMoments) {
  RngStream r(2024);
  const int n = 1000000;
  double s = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform(-3.0, 3.0);
    s += u;
    s2 += u * u;
  }
  const double m = s / n;
  const double var = s2 / n - m * m;
  EXPECT_NEAR(m, 0.0, 0.01);
  EXPECT_NEAR(var, 3.0, 0.06);
}

TEST(Rng, NormalAndLaplaceMoments) {
  RngStream r(5);
  const int n = 200000;
  double sn = 0, sn2 = 0, sl = 0, sl2 = 0;
  for (int i = 0; i < n; ++i) {
    const double a = r.normal();
    const double b = r.laplace(0.0, 1.0);
    sn += a;
    sn2 += a * a;
    sl += b;
    sl2 += b * b;
  }
  EXPECT_NEAR(sn / n, 0.0, 0.01);
  EXPECT_NEAR(sn2 / n, 1.0, 0.02);
  EXPECT_NEAR(sl / n, 0.0, 0.015);
  EXPECT_NEAR(sl2 / n, 2.0, 0.05);  // Laplace(0, 1) variance
}

TEST(Rng, ParetoSupportAndMean) {
  RngStream r(9);
  double s = 0;
  const int n = 400000;
  for (int i = 0; i < n; ++i) {
    const double v = r.pareto(1.0, 3.0);
    ASSERT_GE(v, 1.0);
    s += v;
  }
  EXPECT_NEAR(s / n, 1.5, 0.02);
}

TEST(Sample, Consistency) {
  Sample s{0.3, 1, -1.0, 2.0, 2.0, true};
  EXPECT_TRUE(s.consistent());
  s.y = -1.0;
  EXPECT_FALSE(s.consistent());
}

TEST(Dataset, FilterLeavesParentIntact) {
  std::vector<Sample> v;
  for (int i = 0; i < 10; ++i) v.push_back(Sample{double(i), i % 2, 0, 1, double(i % 2), true});
  const Dataset d(v, 42, {{"k", "v"}});
  const Dataset odd = d.filter([](const Sample& s) { return s.t == 1; });
  EXPECT_EQ(odd.size(), 5u);
  EXPECT_EQ(d.size(), 10u);
  EXPECT_EQ(odd.seed(), 42u);
  EXPECT_EQ(odd.meta().at("k"), "v");
  EXPECT_EQ(d.count_arm(1), 5u);
  EXPECT_EQ(d.subset({0, 3}).xs(), (std::vector<double>{0.0, 3.0}));
  EXPECT_EQ(d.with_meta("a", "b").meta().size(), 2u);
  EXPECT_EQ(d.meta().size(), 1u);
}

TEST(Dataset, RejectsBadTreatment) {
  EXPECT_THROW(Dataset({Sample{0, 2, 0, 0, 0, true}}, 0), ConfigError);
}

TEST(Methods, NamesRoundTrip) {
  for (Method m : all_methods()) EXPECT_EQ(parse_method(method_name(m)), m);
  EXPECT_EQ(all_methods().size(), 9u);
  EXPECT_THROW(parse_method("ols"), ConfigError);
}
