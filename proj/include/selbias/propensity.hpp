#pragma once

#include "selbias/core.hpp"
#include "selbias/nnet.hpp"

#include <cstdint>
#include <vector>

namespace selbias {

/// Weighted pool-adjacent-violators fit, kept as a non-decreasing step
/// function of the raw score. Queries outside the fitted range clamp to the
/// end steps.
class IsotonicCalibrator {
public:
  void fit(std::vector<double> raw, std::vector<double> target, std::vector<double> weights = {});
  [[nodiscard]] double operator()(double raw) const;
  [[nodiscard]] const std::vector<double>& block_starts() const { return starts_; }
  [[nodiscard]] const std::vector<double>& block_values() const { return values_; }
  [[nodiscard]] bool fitted() const { return !values_.empty(); }

private:
  std::vector<double> starts_;
  std::vector<double> values_;
};

/// Isotonic least-squares fitted values for targets already ordered by the
/// regressor.
std::vector<double> pav(const std::vector<double>& y, const std::vector<double>& w);

enum class PropensityKind { Mlp, Logistic };

struct PropensityConfig {
  PropensityKind kind = PropensityKind::Mlp;
  std::vector<int> hidden{32, 32};
  int folds = 5;
  int iterations = 500;
  double learning_rate = 0.01;
  std::uint64_t seed = 0;
};

class PropensityModel {
public:
  PropensityModel() = default;
  PropensityModel(Mlp classifier, IsotonicCalibrator calibrator, double x_mean, double x_sd);

  [[nodiscard]] double raw_score(double x) const;
  [[nodiscard]] std::vector<double> raw_scores(const std::vector<double>& xs) const;
  [[nodiscard]] double predict(double x) const;
  [[nodiscard]] std::vector<double> predict(const std::vector<double>& xs) const;
  [[nodiscard]] const IsotonicCalibrator& calibrator() const { return calibrator_; }
  [[nodiscard]] const Mlp& classifier() const { return classifier_; }

private:
  Mlp classifier_;
  IsotonicCalibrator calibrator_;
  double x_mean_ = 0.0;
  double x_sd_ = 1.0;
};

PropensityModel fit_propensity(const Dataset& observed, const PropensityConfig& cfg = {});

/// Trains only the uncalibrated classifier; exposed for tests.
Mlp train_classifier(const std::vector<double>& z, const std::vector<int>& t, const PropensityConfig& cfg,
                     std::uint64_t seed);

struct OverlapRegions {
  double c = 0.05;
  std::vector<double> e_hat;
  std::vector<std::size_t> s1_indices;
  std::vector<std::size_t> s0_indices;
  std::vector<std::size_t> b_indices;
};

/// s1 = {e >= c}, s0 = {e <= 1 - c}, b = s1 intersect s0.
OverlapRegions overlap_filter(const Dataset& observed, const PropensityModel& model, double c);
bool in_overlap(const PropensityModel& model, double x, double c);

}  // namespace selbias
