#include "selbias/stats.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace selbias;

TEST(Stats, NormalCdfValues) {
  EXPECT_NEAR(normal_cdf(0.0), 0.5, 1e-15);
  EXPECT_NEAR(normal_cdf(1.959963984540054), 0.975, 1e-12);
  EXPECT_NEAR(normal_log_cdf(-1.0), std::log(normal_cdf(-1.0)), 1e-12);
}

TEST(Stats, LogCdfFarTail) {
  // Mills ratio asymptotics: log Phi(z) ~ log phi(z) - log(-z) for z -> -inf.
  const double z = -40.0;
  const double approx = -0.5 * z * z - 0.5 * std::log(2 * std::numbers::pi) - std::log(-z);
  EXPECT_NEAR(normal_log_cdf(z), approx, 1e-3);
  EXPECT_TRUE(std::isfinite(inverse_mills(-60.0)));
  EXPECT_NEAR(inverse_mills(-60.0), 60.0, 0.02);
}

TEST(Stats, InverseMillsAtZero) {
  EXPECT_NEAR(inverse_mills(0.0), std::sqrt(2.0 / std::numbers::pi), 1e-12);
}

TEST(Stats, LogisticSymmetricAndStable) {
  for (double z : {-800.0, -3.0, 0.0, 2.0, 800.0}) {
    EXPECT_NEAR(logistic(z) + logistic(-z), 1.0, 1e-15);
  }
  EXPECT_EQ(logistic(0.0), 0.5);
}

TEST(Stats, LogSumExp) {
  const std::vector<double> v{1000.0, 1000.0};
  EXPECT_NEAR(log_sum_exp(v), 1000.0 + std::log(2.0), 1e-12);
}

TEST(Stats, MeanAndVariance) {
  const std::vector<double> v{1.0, -1.0};
  EXPECT_EQ(mean(v), 0.0);
  EXPECT_NEAR(sample_variance(v), 2.0, 1e-15);
  EXPECT_EQ(sample_variance(std::vector<double>{3.0}), 0.0);
}

TEST(Stats, AdaptiveSimpsonGaussian) {
  const auto r = adaptive_simpson([](double x) { return normal_pdf(x); }, -12.0, 12.0, 1e-10);
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.value, 1.0, 1e-9);
}

TEST(Stats, GaussHermiteMoments) {
  const auto& gh = gauss_hermite(20);
  ASSERT_EQ(gh.nodes.size(), 20u);
  double m0 = 0, m2 = 0, m4 = 0, m1 = 0;
  for (std::size_t i = 0; i < gh.nodes.size(); ++i) {
    const double z = gh.nodes[i], w = gh.weights[i];
    m0 += w;
    m1 += w * z;
    m2 += w * z * z;
    m4 += w * z * z * z * z;
  }
  EXPECT_NEAR(m0, 1.0, 1e-12);
  EXPECT_NEAR(m1, 0.0, 1e-12);
  EXPECT_NEAR(m2, 1.0, 1e-12);
  EXPECT_NEAR(m4, 3.0, 1e-11);
}
