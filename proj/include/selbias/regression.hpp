#pragma once

#include <Eigen/Dense>

#include <vector>

namespace selbias {

/// Least squares via column-pivoted QR; throws EstimationError when the
/// design is rank deficient.
Eigen::VectorXd ols(const Eigen::MatrixXd& design, const Eigen::VectorXd& y);

/// Ascending coefficients of the degree-`degree` least-squares polynomial.
Eigen::VectorXd polynomial_fit(const std::vector<double>& xs, const std::vector<double>& ys, int degree = 3);
double polynomial_mu(const Eigen::VectorXd& coef, double x);

struct ProbitFit {
  Eigen::VectorXd coef;
  std::vector<double> loglik_trace;
  int iterations = 0;
  bool converged = false;
};

/// Newton-Raphson with step halving on the probit log-likelihood, minus
/// ridge/2 times the squared norm of every coefficient but the first.
ProbitFit fit_probit(const Eigen::MatrixXd& design, const std::vector<int>& s, int max_iter = 100,
                     double tol = 1e-10, double ridge = 0.0);
double probit_loglik(const Eigen::MatrixXd& design, const std::vector<int>& s, const Eigen::VectorXd& coef);

}  // namespace selbias
