#pragma once

#include <Eigen/Dense>

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace selbias {

enum class FamilyKind { Gaussian, Laplace, Pareto, LogNormal };

/// Gaussian{mu, sigma}, Laplace{mu, b}, Pareto{y_m, alpha}, LogNormal{mu, sigma}.
struct OutcomeFamily {
  FamilyKind kind = FamilyKind::Gaussian;
  double a = 0.0;
  double b = 1.0;

  static OutcomeFamily gaussian(double mu, double sigma) { return {FamilyKind::Gaussian, mu, sigma}; }
  static OutcomeFamily laplace(double mu, double scale) { return {FamilyKind::Laplace, mu, scale}; }
  static OutcomeFamily pareto(double y_m, double alpha) { return {FamilyKind::Pareto, y_m, alpha}; }
  static OutcomeFamily lognormal(double mu, double sigma) { return {FamilyKind::LogNormal, mu, sigma}; }

  void validate() const;
  [[nodiscard]] bool in_support(double y) const;
  [[nodiscard]] double log_pdf(double y) const;
  [[nodiscard]] double pdf(double y) const;
  [[nodiscard]] double mean() const;
  /// Interval holding all but `tail` of the mass.
  [[nodiscard]] std::pair<double, double> bulk(double tail = 1e-10) const;
};

std::string_view family_name(FamilyKind k);
FamilyKind parse_family(std::string_view name);

/// P density over Q density in closed form.
double density_ratio(const OutcomeFamily& p, const OutcomeFamily& q, double y);

struct RatioBound {
  double c = 0.1;
  double d = 0.1;
  double r = 1.0;
  double h = 1.0;

  void validate() const;
  [[nodiscard]] double lower() const { return h * r * c * d / (1.0 - c); }
  [[nodiscard]] double upper() const { return h * r * (1.0 - c) / (c * d); }
};

/// Smallest-|y| grid point whose ratio leaves [lower, upper]. The grid holds
/// 0, +-2^k for |2^k| <= y_range (k may be negative down to -20) and `steps`
/// evenly spaced points on [-y_range, y_range]. Points in only one support
/// count as ratio 0 or infinity.
std::optional<double> find_witness(const OutcomeFamily& p, const OutcomeFamily& q, const RatioBound& bound,
                                   double y_range = 1048576.0, int steps = 2001);

/// Bivariate polynomial sum_{i,j} coef(i, j) x^i y^j.
struct PolyExponent {
  Eigen::MatrixXd coef;
  [[nodiscard]] double eval(double x, double y) const;
  [[nodiscard]] int y_degree() const;
  /// exp(f(x, .)) integrable: top y-power even with a negative coefficient.
  [[nodiscard]] bool normalizable_at(double x) const;
};

struct PolyVerdict {
  bool constant_difference = false;
  std::map<double, double> c_x;  // fQ - fP per x when constant
  double max_y_coef = 0.0;
};

PolyVerdict poly_exponent_equal_on_region(const PolyExponent& fp, const PolyExponent& fq,
                                          const std::vector<std::pair<double, double>>& region,
                                          double tol = 1e-9);

/// Parametric data-generating tuple on a finite covariate grid.
struct ParamTuple {
  std::vector<double> x_grid;
  std::vector<double> px;  // empty means uniform
  std::function<double(double)> propensity;
  std::function<OutcomeFamily(int, double)> outcome;
  std::function<double(double, double, int)> selection;
  double c = 0.0;  // declared overlap constant
  double d = 0.0;  // declared selection floor

  void validate() const;
  [[nodiscard]] double x_mass(std::size_t i) const;
};

enum class Verdict { EqualEffects, Distinguishable, Indistinguishable };
std::string_view verdict_name(Verdict v);

struct Witness {
  double x = 0.0;
  double y = 0.0;
  int t = 0;
  bool covariate_marginal = false;
};

struct ConditionReport {
  double tau_p = 0.0;
  double tau_q = 0.0;
  double ate_gap = 0.0;
  double ps_p = 0.0;
  double ps_q = 0.0;
  std::optional<Witness> witness;
  Verdict verdict = Verdict::EqualEffects;
  std::string message;
};

struct ConditionOptions {
  bool external_unbiased_x = false;
  double rel_tol = 1e-6;
  double quad_tol = 1e-8;
  double gap_tol = 1e-6;
  int y_doublings = 20;
};

/// E over the family of g(Y), by adaptive quadrature on the bulk interval.
double family_expectation(const OutcomeFamily& f, const std::function<double(double)>& g, double tol = 1e-8);

ConditionReport check_distinguishability(const ParamTuple& p, const ParamTuple& q, const ConditionOptions& opts = {});

}  // namespace selbias
