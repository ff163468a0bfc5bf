#pragma once

#include "selbias/core.hpp"
#include "selbias/nnet.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

namespace selbias {

/// Affine rescaling of (x, y) applied before every network.
struct Standardizer {
  double x_mean = 0.0, x_sd = 1.0, y_mean = 0.0, y_sd = 1.0;

  static Standardizer fit(const Dataset& data);
  [[nodiscard]] double zx(double x) const { return (x - x_mean) / x_sd; }
  [[nodiscard]] double zy(double y) const { return (y - y_mean) / y_sd; }
};

inline constexpr double kBetaMin = 1e-4;
inline constexpr double kBetaMax = 1e4;

/// beta(x, y, t) = exp(net(zx, zy, t)).
struct BetaModel {
  Mlp net;
  Standardizer scale;

  static BetaModel make(const Standardizer& scale, int hidden, std::uint64_t seed);
  [[nodiscard]] Eigen::MatrixXd inputs(const std::vector<double>& xs, const std::vector<double>& ys,
                                       const std::vector<int>& ts) const;
  [[nodiscard]] double log_beta(double x, double y, int t) const;
  /// Clamped to [kBetaMin, kBetaMax]; `clamped` is set when a bound is hit.
  [[nodiscard]] std::vector<double> beta(const Dataset& data, bool* clamped = nullptr) const;
};

struct GridSpec {
  double y_min = -10.0;
  double y_max = 15.0;
  int m = 400;
};

struct GridMean {
  double value = 0.0;
  bool widened = false;
  bool flagged = false;
};

/// Integrates a y-score by cumulative Riemann sums on the grid, normalizes
/// with a softmax and returns the mean. `score` maps a batch of y values to
/// scores. The grid is widened once when the outer cells hold more than
/// 1e-3 of the mass.
GridMean grid_conditional_mean(const std::function<Eigen::ArrayXd(const Eigen::ArrayXd&)>& score,
                               const GridSpec& grid);

struct ScoreModel {
  int arm = 0;
  Mlp score_net;  // (zx, zy) -> score in standardized units
  Standardizer scale;
  GridSpec grid;

  [[nodiscard]] double score(double x, double y) const;
  [[nodiscard]] Eigen::ArrayXd score(double x, const Eigen::ArrayXd& ys) const;
};

GridMean score_conditional_mean(const ScoreModel& model, double x);
std::vector<GridMean> score_conditional_mean(const ScoreModel& model, const std::vector<double>& xs);

struct ScoreConfig {
  std::vector<int> hidden{64, 64};
  int beta_hidden = 10;
  int steps = 3000;
  int batch = 256;
  double learning_rate = 0.01;
  double lambda1 = 0.05;
  double lambda2 = 0.05;
  double h = kDyStep;
  int max_retries = 5;
  GridSpec grid;
  std::uint64_t seed = 0;
};

struct ScoreFit {
  std::array<ScoreModel, 2> arms;
  std::optional<BetaModel> beta;
  std::vector<double> loss_trace;
  int lr_halvings = 0;
};

/// Per-arm score networks trained jointly with an optional shared selection
/// network. Requires both arms in `observed_b`. An attempt is retried with a
/// new initialization and half the learning rate if the loss diverges or if
/// the fitted density escapes the integration grid at the arm's covariates;
/// after `max_retries` the attempt with the fewest escapes is kept.
ScoreFit fit_score_model(const Dataset& observed_b, bool correction, const ScoreConfig& cfg = {});

/// Builds the mean score-matching loss on a batch of one arm; exposed for
/// tests. `beta` may be null.
Tape::Var score_matching_loss(Tape& tape, const Mlp& score_net, const Mlp* beta_net, const Eigen::MatrixXd& zxy,
                              int arm, const ScoreConfig& cfg);

}  // namespace selbias
