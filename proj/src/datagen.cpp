#include "selbias/datagen.hpp"

#include <cmath>
#include <sstream>

namespace selbias {

void NoiseSpec::validate() const {
  if (!(scale >= 0.0) || !std::isfinite(scale)) throw ConfigError("noise scale must be >= 0");
  if (family == NoiseFamily::ParetoCentered && !(pareto_shape > 2.0)) {
    throw ConfigError("pareto shape must exceed 2");
  }
}

double NoiseSpec::draw(RngStream& rng) const {
  switch (family) {
    case NoiseFamily::Normal:
      return scale * rng.normal();
    case NoiseFamily::Laplace:
      return rng.laplace(0.0, scale);
    case NoiseFamily::LogNormalCentered:
      return rng.lognormal(0.0, scale) - std::exp(0.5 * scale * scale);
    case NoiseFamily::ParetoCentered:
      return scale * (rng.pareto(1.0, pareto_shape) - pareto_shape / (pareto_shape - 1.0));
  }
  return 0.0;
}

std::pair<double, double> PopulationConfig::effective_range() const {
  if (outcome.form == OutcomeForm::Log) return {std::max(x_low, kLogFormMinX), x_high};
  return {x_low, x_high};
}

void PopulationConfig::validate() const {
  if (!(x_low < x_high)) throw ConfigError("x_low must be below x_high");
  outcome.noise.validate();
  const auto [lo, hi] = effective_range();
  if (!(lo < hi)) throw ConfigError("covariate range is empty for the log outcome form");
  for (double x : {lo, hi}) {
    const double e = propensity_intercept + propensity_slope * x;
    if (!(e > 0.0 && e < 1.0)) {
      std::ostringstream msg;
      msg << "true propensity " << e << " at x=" << x << " leaves (0,1)";
      throw ConfigError(msg.str());
    }
  }
  if (outcome.form == OutcomeForm::PolyDefault && (outcome.coef0.empty() || outcome.coef1.empty())) {
    throw ConfigError("polynomial outcome needs coefficients for both arms");
  }
}

double true_propensity(const PopulationConfig& cfg, double x) {
  if (x < cfg.x_low || x > cfg.x_high) throw ConfigError("x outside the covariate range");
  const double e = cfg.propensity_intercept + cfg.propensity_slope * x;
  if (!(e > 0.0 && e < 1.0)) throw ConfigError("true propensity leaves (0,1)");
  return e;
}

namespace {

double horner(const std::vector<double>& coef, double x) {
  double acc = 0.0;
  for (auto it = coef.rbegin(); it != coef.rend(); ++it) acc = acc * x + *it;
  return acc;
}

}  // namespace

double mean_function(const OutcomeSpec& spec, int t, double x) {
  if (t != 0 && t != 1) throw ConfigError("treatment must be 0 or 1");
  switch (spec.form) {
    case OutcomeForm::PolyDefault:
      return horner(t == 1 ? spec.coef1 : spec.coef0, x);
    case OutcomeForm::Sin:
      return 2.0 * x * std::sin(2.0 * x) + t * (x * x + 0.1 * x * x * x * x);
    case OutcomeForm::Log: {
      if (x + 4.0 <= 0.0 || (t == 1 && x <= 0.0)) {
        throw ConfigError("log outcome form undefined at x=" + std::to_string(x));
      }
      const double base = x * std::log(x + 4.0);
      if (t == 0) return base;
      return base + x * x * std::log(2.0 * x) + 0.1 * x * x * x * x;
    }
    case OutcomeForm::SemiSyntheticLinear:
      return 0.1 * x + t * x;
  }
  return 0.0;
}

namespace {

double apply_noise(const NoiseSpec& noise, double mu, double eps) {
  return noise.mode == NoiseMode::Additive ? mu + eps : (1.0 + eps) * mu;
}

}  // namespace

Dataset generate_population(const PopulationConfig& cfg) {
  cfg.validate();
  const RngStream root(cfg.seed);
  RngStream cov = root.split("covariate");
  RngStream treat = root.split("treatment");
  RngStream noise0 = root.split("noise0");
  RngStream noise1 = root.split("noise1");
  const auto [lo, hi] = cfg.effective_range();

  std::vector<Sample> samples;
  samples.reserve(cfg.n);
  for (std::size_t i = 0; i < cfg.n; ++i) {
    Sample s;
    s.x = cov.uniform(lo, hi);
    s.t = treat.bernoulli(cfg.propensity_intercept + cfg.propensity_slope * s.x) ? 1 : 0;
    s.y0 = apply_noise(cfg.outcome.noise, mean_function(cfg.outcome, 0, s.x),
                       cfg.outcome.noise.draw(noise0));
    s.y1 = apply_noise(cfg.outcome.noise, mean_function(cfg.outcome, 1, s.x),
                       cfg.outcome.noise.draw(noise1));
    s.y = s.t == 1 ? s.y1 : s.y0;
    samples.push_back(s);
  }
  std::map<std::string, std::string> meta;
  meta["x_low"] = std::to_string(lo);
  meta["x_high"] = std::to_string(hi);
  if (cfg.outcome.form == OutcomeForm::Log && lo != cfg.x_low) {
    meta["x_restricted"] = "log form needs x > 0";
  }
  return Dataset(std::move(samples), cfg.seed, std::move(meta));
}

double oracle_ate(const PopulationConfig& cfg, std::size_t n_mc) {
  cfg.validate();
  RngStream rng = RngStream(cfg.seed).split("oracle");
  const auto [lo, hi] = cfg.effective_range();
  // Kahan sum keeps 1e6 draws accurate well below the Monte Carlo error.
  double sum = 0.0, comp = 0.0;
  for (std::size_t i = 0; i < n_mc; ++i) {
    const double x = rng.uniform(lo, hi);
    const double v = mean_function(cfg.outcome, 1, x) - mean_function(cfg.outcome, 0, x) - comp;
    const double t = sum + v;
    comp = (t - sum) - v;
    sum = t;
  }
  return n_mc == 0 ? 0.0 : sum / static_cast<double>(n_mc);
}

namespace {

template <typename E, std::size_t N>
E parse_enum(std::string_view name, const std::pair<E, std::string_view> (&table)[N],
             const char* what) {
  for (const auto& [e, n] : table) {
    if (n == name) return e;
  }
  throw ConfigError(std::string("unknown ") + what + " '" + std::string(name) + "'");
}

template <typename E, std::size_t N>
std::string_view enum_name(E value, const std::pair<E, std::string_view> (&table)[N]) {
  for (const auto& [e, n] : table) {
    if (e == value) return n;
  }
  return "unknown";
}

constexpr std::pair<NoiseFamily, std::string_view> kNoiseNames[] = {
    {NoiseFamily::Normal, "normal"},
    {NoiseFamily::Laplace, "laplace"},
    {NoiseFamily::LogNormalCentered, "lognormal"},
    {NoiseFamily::ParetoCentered, "pareto"},
};

constexpr std::pair<OutcomeForm, std::string_view> kFormNames[] = {
    {OutcomeForm::PolyDefault, "poly"},
    {OutcomeForm::Sin, "sin"},
    {OutcomeForm::Log, "log"},
    {OutcomeForm::SemiSyntheticLinear, "linear"},
};

}  // namespace

std::string_view noise_family_name(NoiseFamily f) { return enum_name(f, kNoiseNames); }
NoiseFamily parse_noise_family(std::string_view name) {
  return parse_enum(name, kNoiseNames, "noise family");
}
std::string_view outcome_form_name(OutcomeForm f) { return enum_name(f, kFormNames); }
OutcomeForm parse_outcome_form(std::string_view name) {
  return parse_enum(name, kFormNames, "outcome form");
}

}  // namespace selbias
