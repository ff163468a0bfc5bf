#include "selbias/selection.hpp"

#include "selbias/stats.hpp"

#include <cmath>

namespace selbias {

void SelectionSpec::validate() const {
  if (det_arm != 0 && det_arm != 1) throw ConfigError("det_arm must be 0 or 1");
  if (!(x_thresh >= 0.0)) throw ConfigError("x_thresh must be >= 0");
  for (double v : {alpha, gamma, beta_C, beta_S}) {
    if (!std::isfinite(v)) throw ConfigError("selection parameters must be finite");
  }
}

bool deterministic_mask(const SelectionSpec& spec, const Sample& s) {
  if (!spec.det_enabled) return true;
  return s.t != spec.det_arm || std::abs(s.x) <= spec.x_thresh;
}

double selection_probability(const SelectionSpec& spec, double x, double y, int t) {
  (void)t;
  if (!spec.sig_enabled) return 1.0;
  if (spec.sig_form == SigmoidForm::OutcomeOnly) return logistic(spec.alpha * (y - spec.gamma));
  return logistic((y + 0.1 * x - spec.beta_C) * spec.beta_S);
}

SelectionResult apply_selection(const Dataset& population, const SelectionSpec& spec,
                                RngStream& rng) {
  spec.validate();
  SelectionReport report;
  report.total = population.size();
  std::vector<Sample> kept;
  std::vector<bool> mask(population.size(), false);
  for (std::size_t i = 0; i < population.size(); ++i) {
    const Sample& s = population[i];
    if (!deterministic_mask(spec, s)) continue;
    ++report.after_deterministic;
    const double u = rng.uniform();
    if (u < selection_probability(spec, s.x, s.y, s.t)) {
      Sample o = s;
      o.selected = true;
      kept.push_back(o);
      mask[i] = true;
    }
  }
  report.kept = kept.size();
  return {Dataset(std::move(kept), population.seed(), population.meta()), report, std::move(mask)};
}

namespace {

constexpr std::pair<SigmoidForm, std::string_view> kSigNames[] = {
    {SigmoidForm::OutcomeOnly, "outcome"},
    {SigmoidForm::OutcomeCovariate, "outcome_covariate"},
};

}  // namespace

std::string_view sigmoid_form_name(SigmoidForm f) {
  for (const auto& [e, n] : kSigNames) {
    if (e == f) return n;
  }
  return "unknown";
}

SigmoidForm parse_sigmoid_form(std::string_view name) {
  for (const auto& [e, n] : kSigNames) {
    if (n == name) return e;
  }
  throw ConfigError("unknown sigmoid form '" + std::string(name) + "'");
}

}  // namespace selbias
