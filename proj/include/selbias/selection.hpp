#pragma once

#include "selbias/core.hpp"
#include "selbias/rng.hpp"

namespace selbias {

enum class SigmoidForm { OutcomeOnly, OutcomeCovariate };

struct SelectionSpec {
  bool det_enabled = true;
  double x_thresh = 2.0;
  int det_arm = 0;
  bool sig_enabled = true;
  SigmoidForm sig_form = SigmoidForm::OutcomeOnly;
  double alpha = 3.0;
  double gamma = 1.5;
  double beta_C = 1.0;
  double beta_S = 0.1;

  void validate() const;
};

/// Units of the truncated arm survive only when |x| <= x_thresh.
bool deterministic_mask(const SelectionSpec& spec, const Sample& s);
double selection_probability(const SelectionSpec& spec, double x, double y, int t);

struct SelectionReport {
  std::size_t total = 0;
  std::size_t after_deterministic = 0;
  std::size_t kept = 0;
};

struct SelectionResult {
  Dataset observed;
  SelectionReport report;
  /// Per population unit: kept or not.
  std::vector<bool> kept_mask;
};

SelectionResult apply_selection(const Dataset& population, const SelectionSpec& spec,
                                RngStream& rng);

std::string_view sigmoid_form_name(SigmoidForm f);
SigmoidForm parse_sigmoid_form(std::string_view name);

}  // namespace selbias
