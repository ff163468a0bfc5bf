#pragma once

#include "selbias/core.hpp"
#include "selbias/gmm.hpp"
#include "selbias/propensity.hpp"
#include "selbias/score_model.hpp"

#include <array>
#include <functional>
#include <optional>

namespace selbias {

/// Weighted mean of y over arm units in S_arm, weights 1 / P(T = arm | x).
double ipw_arm_mean(const Dataset& observed, const OverlapRegions& regions, int arm);

struct MleConfig {
  std::size_t k = 5;
  double lambda = 0.05;
  int rounds = 10;
  int beta_steps = 200;
  int batch = 256;
  int beta_hidden = 10;
  double learning_rate = 0.01;
  std::size_t quadrature_order = 20;
  double em_tol = 1e-6;
  int em_max_iter = 500;
  std::uint64_t seed = 0;
};

struct MleFit {
  std::array<GmmParams, 2> gmm;
  std::optional<BetaModel> beta;
  bool beta_clamped = false;
  /// One log-likelihood trace per EM call, in call order.
  std::vector<std::vector<double>> em_traces;
  std::vector<double> beta_loss_trace;
};

MleFit fit_mle(const Dataset& observed_b, bool correction, const MleConfig& cfg = {});

/// Mean over a batch of -log beta_i + log Z_i + lambda (log beta_i)^2, where
/// Z_i integrates the frozen mixture conditional of arm t_i against beta.
Tape::Var beta_step_loss(Tape& tape, const BetaModel& beta, const std::array<GmmParams, 2>& gmm,
                         const Dataset& batch, double lambda, std::size_t quadrature_order);

enum class HeckmanMode { PopulationCovariates, ObservedProxy };

struct HeckmanInputs {
  HeckmanMode mode = HeckmanMode::ObservedProxy;
  /// Full population with `selected` flags; read in PopulationCovariates mode.
  const Dataset* population = nullptr;
  /// Region-B membership per observed unit; read in ObservedProxy mode.
  std::vector<bool> proxy_label;
};

AteEstimate heckman_ate(const Dataset& observed, const HeckmanInputs& inputs);

/// Doubly robust estimate on `data` with cubic outcome models fitted per arm
/// on `data`. Propensities are clipped to [0.01, 0.99].
AteEstimate aipw_ate(const Dataset& data, const PropensityModel& prop, bool oracle);

struct FittedModels {
  std::optional<std::array<Eigen::VectorXd, 2>> poly;
  std::optional<MleFit> mle;
  std::optional<MleFit> mle_beta;
  std::optional<ScoreFit> sm;
  std::optional<ScoreFit> sm_beta;
};

/// Cubic fits per arm on arm units of S_t.
std::array<Eigen::VectorXd, 2> fit_polynomial_arms(const Dataset& observed, const OverlapRegions& regions);

/// sum_i w_i (mu1(x_i) - mu0(x_i)) / sum_i w_i.
double weighted_effect(const std::vector<double>& xs, const std::vector<double>& weights,
                       const std::function<std::vector<double>(const std::vector<double>&, int)>& mu);

AteEstimate estimate_ate(Method method, const Dataset& observed, const OverlapRegions& regions,
                         const FittedModels& models);

}  // namespace selbias
