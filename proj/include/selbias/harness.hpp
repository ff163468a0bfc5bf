#pragma once

#include "selbias/config.hpp"
#include "selbias/core.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace selbias {

struct RunRow {
  std::uint64_t seed = 0;
  Method method = Method::IPW;
  double estimate = 0.0;
  double error = 0.0;  // estimate - oracle
  double runtime_sec = 0.0;
  std::string message;  // nonempty when the method failed
};

struct SeedInfo {
  std::uint64_t seed = 0;
  SelectionReport selection;
  std::size_t overlap = 0;
};

struct RunReport {
  std::vector<RunRow> rows;
  std::vector<SeedInfo> seeds;
  double oracle_ate = 0.0;
  std::string config_hash;

  [[nodiscard]] std::size_t failures() const;
};

/// Child seed for one pipeline stage of one experiment seed.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stage);

/// Population with `selected` flags, the observed dataset and the selection
/// counts for one seed.
struct SeedData {
  Dataset population;
  SelectionResult selection;
};

SeedData simulate_seed(const ExperimentConfig& cfg, std::uint64_t seed);

/// Seeds run on worker threads; rows come back ordered by seed position,
/// then by method position in the config.
RunReport run_experiment(const ExperimentConfig& cfg);

struct MethodSummary {
  Method method = Method::IPW;
  std::size_t n = 0;
  std::size_t failures = 0;
  double mean_error = 0.0;
  double std_error = 0.0;
  bool single_seed = false;
};

/// Per-method mean and sample standard deviation of the error over the
/// finite rows, in first-appearance order.
std::vector<MethodSummary> summarize(const RunReport& report);

struct SweepPoint {
  double beta_C = 0.0;
  double beta_S = 0.0;
  RunReport report;
};

/// Runs the covariate-dependent sigmoid selection at every (beta_C, beta_S).
std::vector<SweepPoint> run_sweep(const ExperimentConfig& base, const std::vector<double>& beta_c = {1.0, 3.0, 5.0},
                                  const std::vector<double>& beta_s = {0.1, 0.5, 1.0});

}  // namespace selbias
