#pragma once

#include "selbias/core.hpp"
#include "selbias/datagen.hpp"
#include "selbias/estimators.hpp"
#include "selbias/identifiability.hpp"
#include "selbias/propensity.hpp"
#include "selbias/score_model.hpp"
#include "selbias/selection.hpp"

#include "json.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace selbias {

struct ExperimentConfig {
  PopulationConfig population;
  SelectionSpec selection;
  std::vector<Method> methods = all_methods();
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  double c = 0.05;
  PropensityConfig propensity;
  MleConfig mle;
  ScoreConfig score;
  HeckmanMode heckman = HeckmanMode::ObservedProxy;
  std::size_t oracle_draws = 1000000;
  /// Worker threads; 0 picks the hardware concurrency.
  int threads = 0;
  /// Record wall-clock runtimes. Off by default so that reports are
  /// byte-identical across runs.
  bool timing = false;

  void validate() const;
};

/// Missing keys keep their defaults; unknown keys raise ConfigError.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config(const std::string& path);
nlohmann::json config_to_json(const ExperimentConfig& cfg);
/// FNV-1a of the canonical JSON dump, as 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

/// Identifiability requests for the `idcheck` subcommand.
struct IdcheckRequest {
  enum class Mode { Condition, Witness } mode = Mode::Condition;
  ParamTuple p;
  ParamTuple q;
  ConditionOptions options;
  OutcomeFamily wp;
  OutcomeFamily wq;
  RatioBound bound;
};

IdcheckRequest parse_idcheck(const nlohmann::json& j);
nlohmann::json run_idcheck(const IdcheckRequest& req);

}  // namespace selbias
