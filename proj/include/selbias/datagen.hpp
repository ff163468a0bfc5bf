#pragma once

#include "selbias/core.hpp"
#include "selbias/rng.hpp"

#include <cstdint>
#include <vector>

namespace selbias {

enum class NoiseFamily { Normal, Laplace, LogNormalCentered, ParetoCentered };
enum class NoiseMode { Additive, Multiplicative };

struct NoiseSpec {
  NoiseFamily family = NoiseFamily::Normal;
  double scale = 0.5;
  NoiseMode mode = NoiseMode::Additive;
  /// Tail index of the Pareto family; must exceed 2 for a finite variance.
  double pareto_shape = 3.0;

  void validate() const;
  /// One zero-mean draw. Pareto and log-normal draws are shifted by their
  /// analytic mean.
  double draw(RngStream& rng) const;
};

enum class OutcomeForm { PolyDefault, Sin, Log, SemiSyntheticLinear };

struct OutcomeSpec {
  OutcomeForm form = OutcomeForm::PolyDefault;
  /// Ascending polynomial coefficients per arm; only read by PolyDefault.
  std::vector<double> coef0{1.0, 0.5, 0.0, -0.2};
  std::vector<double> coef1{3.0, -0.5, 0.0, 0.3};
  NoiseSpec noise;
};

/// Lower edge of the covariate range used by the Log form, where both
/// log(x + 4) and log(2x) are defined.
inline constexpr double kLogFormMinX = 0.01;

struct PopulationConfig {
  std::size_t n = 5000;
  double x_low = -3.0;
  double x_high = 3.0;
  double propensity_slope = 0.1;
  double propensity_intercept = 0.5;
  OutcomeSpec outcome;
  std::uint64_t seed = 0;

  /// Covariate range actually sampled (restricted for the Log form).
  [[nodiscard]] std::pair<double, double> effective_range() const;
  void validate() const;
};

double true_propensity(const PopulationConfig& cfg, double x);
double mean_function(const OutcomeSpec& spec, int t, double x);
Dataset generate_population(const PopulationConfig& cfg);
double oracle_ate(const PopulationConfig& cfg, std::size_t n_mc = 1000000);

std::string_view noise_family_name(NoiseFamily f);
NoiseFamily parse_noise_family(std::string_view name);
std::string_view outcome_form_name(OutcomeForm f);
OutcomeForm parse_outcome_form(std::string_view name);

}  // namespace selbias
