#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace selbias {

double normal_pdf(double z);
double normal_pdf(double x, double mean, double sd);
double normal_log_pdf(double x, double mean, double sd);
double normal_cdf(double z);
double normal_log_cdf(double z);

/// phi(z) / Phi(z), stable for very negative z.
double inverse_mills(double z);

/// 1 / (1 + exp(-z)) without overflow for large |z|.
double logistic(double z);

double log_sum_exp(std::span<const double> values);

double mean(std::span<const double> values);
/// Sample (n - 1) variance; zero for fewer than two values.
double sample_variance(std::span<const double> values);

struct QuadratureResult {
  double value = 0.0;
  double error_estimate = 0.0;
  std::size_t evaluations = 0;
  bool converged = true;
};

/// Adaptive Simpson on [a, b] to absolute tolerance `tol`. Segments that
/// exhaust `max_depth` mark the result non-converged instead of throwing.
QuadratureResult adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                                  double tol = 1e-8, int max_depth = 50);

struct GaussHermite {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Probabilists' rule: sum_j w_j f(z_j) approximates E[f(Z)], Z ~ N(0, 1).
const GaussHermite& gauss_hermite(std::size_t order);

}  // namespace selbias
