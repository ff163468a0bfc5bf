#include "selbias/datagen.hpp"
#include "selbias/estimators.hpp"
#include "selbias/regression.hpp"
#include "selbias/rng.hpp"
#include "selbias/stats.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

using namespace selbias;

namespace {

OverlapRegions full_regions(const Dataset& d, double e) {
  OverlapRegions r;
  r.e_hat.assign(d.size(), e);
  for (std::size_t i = 0; i < d.size(); ++i) {
    r.s0_indices.push_back(i);
    r.s1_indices.push_back(i);
    r.b_indices.push_back(i);
  }
  return r;
}

Dataset linear_data(std::size_t n, std::uint64_t seed, double effect) {
  RngStream rng(seed);
  std::vector<Sample> out;
  for (std::size_t i = 0; i < n; ++i) {
    Sample s;
    s.x = rng.uniform(-2.0, 2.0);
    s.t = rng.uniform() < 0.5 ? 1 : 0;
    s.y0 = 1.0 + s.x + 0.5 * rng.normal();
    s.y1 = s.y0 + effect;
    s.y = s.t ? s.y1 : s.y0;
    out.push_back(s);
  }
  return Dataset(std::move(out), seed);
}

PropensityModel constant_propensity(double e) {
  IsotonicCalibrator cal;
  cal.fit({0.0, 1.0}, {e, e});
  return PropensityModel(Mlp({1, 2, 1}, Activation::ReLU, 3), cal, 0.0, 1.0);
}

}  // namespace

TEST(Ipw, ConstantPropensityGivesPlainArmMean) {
  const Dataset d = linear_data(200, 1, 2.0);
  const OverlapRegions r = full_regions(d, 0.5);
  for (int arm = 0; arm < 2; ++arm) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const Sample& s : d.samples()) {
      if (s.t == arm) {
        sum += s.y;
        ++n;
      }
    }
    EXPECT_NEAR(ipw_arm_mean(d, r, arm), sum / static_cast<double>(n), 1e-12);
  }
}

TEST(Ipw, SingleUnitReturnsItsOutcome) {
  Sample s;
  s.t = 1;
  s.y = s.y1 = 4.25;
  const Dataset d({s}, 0);
  OverlapRegions r = full_regions(d, 0.3);
  EXPECT_DOUBLE_EQ(ipw_arm_mean(d, r, 1), 4.25);
}

TEST(Ipw, WeightsAreInversePropensity) {
  std::vector<Sample> v(2);
  v[0].t = v[1].t = 1;
  v[0].y = v[0].y1 = 0.0;
  v[1].y = v[1].y1 = 1.0;
  const Dataset d(v, 0);
  OverlapRegions r = full_regions(d, 0.5);
  r.e_hat = {0.25, 0.5};
  // weights 4 and 2
  EXPECT_NEAR(ipw_arm_mean(d, r, 1), 2.0 / 6.0, 1e-15);
}

TEST(Ipw, EmptyRegionThrows) {
  const Dataset d = linear_data(50, 2, 1.0);
  OverlapRegions r = full_regions(d, 0.5);
  r.s0_indices.clear();
  try {
    (void)ipw_arm_mean(d, r, 0);
    FAIL() << "expected an error";
  } catch (const EstimationError& e) {
    EXPECT_NE(std::string(e.what()).find("no overlap support for arm"), std::string::npos);
  }
}

TEST(WeightedEffect, ConstantEffect) {
  const std::vector<double> xs{-1.0, 0.0, 2.0, 3.5};
  auto mu = [](const std::vector<double>& q, int arm) {
    std::vector<double> out;
    for (double x : q) out.push_back(x * x + (arm ? 2.0 : 0.0));
    return out;
  };
  EXPECT_DOUBLE_EQ(weighted_effect(xs, {1, 1, 1, 1}, mu), 2.0);
  EXPECT_DOUBLE_EQ(weighted_effect(xs, {0.1, 5, 2, 9}, mu), 2.0);
}

TEST(WeightedEffect, ConcentratedWeights) {
  const std::vector<double> xs{-1.0, 0.5, 2.0};
  auto mu = [](const std::vector<double>& q, int arm) {
    std::vector<double> out;
    for (double x : q) out.push_back(arm ? 3.0 * x : 0.0);
    return out;
  };
  EXPECT_DOUBLE_EQ(weighted_effect(xs, {0.0, 1.0, 0.0}, mu), 1.5);
  EXPECT_THROW((void)weighted_effect(xs, {0.0, 0.0, 0.0}, mu), EstimationError);
  EXPECT_THROW((void)weighted_effect(xs, {1.0}, mu), ConfigError);
  EXPECT_THROW((void)weighted_effect({}, {}, mu), EstimationError);
}

TEST(EstimateAte, PolynomialIsPlugInRegression) {
  const Dataset d = linear_data(400, 3, 1.5);
  const OverlapRegions r = full_regions(d, 0.5);
  FittedModels m;
  m.poly = fit_polynomial_arms(d, r);
  const AteEstimate est = estimate_ate(Method::Polynomial, d, r, m);
  double acc = 0.0;
  for (const Sample& s : d.samples()) acc += polynomial_mu((*m.poly)[1], s.x) - polynomial_mu((*m.poly)[0], s.x);
  EXPECT_DOUBLE_EQ(est.value, acc / static_cast<double>(d.size()));
  EXPECT_EQ(est.n_used, d.size());
  EXPECT_NEAR(est.value, 1.5, 0.1);
}

TEST(EstimateAte, MissingModelNamesMethod) {
  const Dataset d = linear_data(100, 4, 1.0);
  const OverlapRegions r = full_regions(d, 0.5);
  for (Method m : {Method::Polynomial, Method::MLE, Method::MLE_Beta, Method::SM, Method::SM_Beta}) {
    try {
      (void)estimate_ate(m, d, r, {});
      FAIL() << method_name(m);
    } catch (const EstimationError& e) {
      EXPECT_NE(std::string(e.what()).find(method_name(m)), std::string::npos);
    }
  }
  EXPECT_THROW((void)estimate_ate(Method::Heckman, d, r, {}), ConfigError);
}

TEST(EstimateAte, IpwIsDifferenceOfArmMeans) {
  const Dataset d = linear_data(300, 5, 2.0);
  OverlapRegions r = full_regions(d, 0.4);
  const AteEstimate est = estimate_ate(Method::IPW, d, r, {});
  EXPECT_DOUBLE_EQ(est.value, ipw_arm_mean(d, r, 1) - ipw_arm_mean(d, r, 0));
  EXPECT_EQ(est.n_used, d.size());
}

TEST(Heckman, MatchesOlsWithoutSelection) {
  const Dataset population = linear_data(4000, 6, 2.0);
  const Dataset& observed = population;

  HeckmanInputs in;
  in.mode = HeckmanMode::PopulationCovariates;
  in.population = &population;
  const AteEstimate est = heckman_ate(observed, in);
  EXPECT_EQ(est.diagnostics.at("proxy_selection"), 0.0);
  EXPECT_EQ(est.diagnostics.at("mills_dropped"), 1.0);

  Eigen::MatrixXd x(static_cast<Eigen::Index>(observed.size()), 3);
  Eigen::VectorXd y(static_cast<Eigen::Index>(observed.size()));
  for (std::size_t i = 0; i < observed.size(); ++i) {
    x.row(static_cast<Eigen::Index>(i)) << 1.0, observed[i].x, static_cast<double>(observed[i].t);
    y(static_cast<Eigen::Index>(i)) = observed[i].y;
  }
  const double ols_ate = ols(x, y)(2);
  EXPECT_NEAR(est.value, ols_ate, 0.1);
}

TEST(Heckman, ProxyModeAndErrors) {
  const Dataset d = linear_data(500, 7, 1.0);
  HeckmanInputs in;
  EXPECT_THROW((void)heckman_ate(d, in), ConfigError);
  for (const Sample& s : d.samples()) in.proxy_label.push_back(std::abs(s.x) < 1.5);
  const AteEstimate est = heckman_ate(d, in);
  EXPECT_EQ(est.diagnostics.at("proxy_selection"), 1.0);
  EXPECT_TRUE(std::isfinite(est.value));

  HeckmanInputs pop_mode;
  pop_mode.mode = HeckmanMode::PopulationCovariates;
  EXPECT_THROW((void)heckman_ate(d, pop_mode), ConfigError);

  const Dataset tiny = d.subset({0, 1, 2});
  EXPECT_THROW((void)heckman_ate(tiny, in), EstimationError);
}

TEST(Heckman, AllLabelsEqualDropsMillsTerm) {
  const Dataset d = linear_data(300, 8, 1.25);
  HeckmanInputs in;
  in.proxy_label.assign(d.size(), true);
  const AteEstimate est = heckman_ate(d, in);
  EXPECT_EQ(est.diagnostics.at("mills_dropped"), 1.0);
  EXPECT_NEAR(est.value, 1.25, 0.15);
}

TEST(Aipw, DoubleRobustWithWrongPropensity) {
  PopulationConfig pc;
  pc.n = 8000;
  pc.seed = 9;
  const Dataset pop = generate_population(pc);
  double truth = 0.0;
  for (const Sample& s : pop.samples()) truth += mean_function(pc.outcome, 1, s.x) - mean_function(pc.outcome, 0, s.x);
  truth /= static_cast<double>(pop.size());
  for (double e : {0.15, 0.5, 0.8}) {
    const AteEstimate est = aipw_ate(pop, constant_propensity(e), false);
    EXPECT_NEAR(est.value, truth, 0.1) << e;
    EXPECT_EQ(est.method, Method::AIPW);
    EXPECT_EQ(est.diagnostics.at("clipped"), 0.0);
  }
}

TEST(Aipw, ClipsExtremePropensities) {
  const Dataset d = linear_data(200, 10, 1.0);
  const AteEstimate est = aipw_ate(d, constant_propensity(0.001), true);
  EXPECT_EQ(est.method, Method::AIPW_Oracle);
  EXPECT_EQ(est.diagnostics.at("clipped"), static_cast<double>(d.size()));
}

TEST(BetaStepLoss, ConstantBetaClosedForm) {
  const Dataset d = linear_data(64, 11, 1.0);
  MleConfig cfg;
  cfg.k = 2;
  cfg.seed = 3;
  const MleFit fit = fit_mle(d, false, cfg);
  BetaModel beta = BetaModel::make(Standardizer::fit(d), 6, 1);
  beta.net.zero_output_layer();
  for (double c : {0.0, 0.7, -1.3}) {
    beta.net.bias(beta.net.num_layers() - 1)(0) = c;
    Tape tape;
    const double v = tape.scalar(beta_step_loss(tape, beta, fit.gmm, d, 0.05, 20));
    // -c + log(e^c) + lambda c^2
    EXPECT_NEAR(v, 0.05 * c * c, 1e-9) << c;
  }
}

TEST(Mle, PlainFitRecoversLinearConditionalMean) {
  const Dataset d = linear_data(3000, 12, 2.0);
  MleConfig cfg;
  cfg.seed = 5;
  const MleFit fit = fit_mle(d, false, cfg);
  EXPECT_FALSE(fit.beta.has_value());
  ASSERT_EQ(fit.em_traces.size(), 2u);
  for (const auto& trace : fit.em_traces) {
    for (std::size_t i = 1; i < trace.size(); ++i) EXPECT_GE(trace[i], trace[i - 1] - 1e-9);
  }
  for (double x : {-1.5, -0.5, 0.0, 0.5, 1.5}) {
    EXPECT_NEAR(gmm_conditional_mean(fit.gmm[0], x), 1.0 + x, 0.15) << x;
    EXPECT_NEAR(gmm_conditional_mean(fit.gmm[1], x), 3.0 + x, 0.15) << x;
  }
}

TEST(Mle, CorrectionAlternatesAndKeepsEmMonotone) {
  const Dataset d = linear_data(600, 13, 2.0);
  MleConfig cfg;
  cfg.k = 3;
  cfg.rounds = 2;
  cfg.beta_steps = 20;
  cfg.batch = 64;
  cfg.seed = 6;
  const MleFit fit = fit_mle(d, true, cfg);
  ASSERT_TRUE(fit.beta.has_value());
  EXPECT_EQ(fit.em_traces.size(), 2u + 2u * 2u);
  EXPECT_EQ(fit.beta_loss_trace.size(), 40u);
  for (const auto& trace : fit.em_traces) {
    for (std::size_t i = 1; i < trace.size(); ++i) EXPECT_GE(trace[i], trace[i - 1] - 1e-9);
  }
  for (double b : fit.beta->beta(d)) EXPECT_GT(b, 0.0);

  const OverlapRegions r = full_regions(d, 0.5);
  FittedModels m;
  m.mle_beta = fit;
  const AteEstimate est = estimate_ate(Method::MLE_Beta, d, r, m);
  EXPECT_TRUE(std::isfinite(est.value));
  EXPECT_TRUE(est.diagnostics.count("beta_clamped"));
}

TEST(Mle, TooFewPointsPerArm) {
  const Dataset d = linear_data(8, 14, 1.0);
  MleConfig cfg;
  cfg.k = 5;
  EXPECT_THROW((void)fit_mle(d, false, cfg), EstimationError);
}
