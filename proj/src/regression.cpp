#include "selbias/regression.hpp"

#include "selbias/core.hpp"
#include "selbias/stats.hpp"

#include <cmath>

namespace selbias {

Eigen::VectorXd ols(const Eigen::MatrixXd& design, const Eigen::VectorXd& y) {
  if (design.rows() != y.size()) throw ConfigError("design and response differ in length");
  if (design.rows() < design.cols()) {
    throw EstimationError("rank-deficient design: " + std::to_string(design.rows()) + " rows for " +
                          std::to_string(design.cols()) + " coefficients");
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  qr.setThreshold(1e-12);
  if (qr.rank() < design.cols()) {
    throw EstimationError("rank-deficient design: rank " + std::to_string(qr.rank()) + " of " +
                          std::to_string(design.cols()));
  }
  return qr.solve(y);
}

Eigen::VectorXd polynomial_fit(const std::vector<double>& xs, const std::vector<double>& ys, int degree) {
  if (xs.size() != ys.size()) throw ConfigError("x and y differ in length");
  if (degree < 0) throw ConfigError("polynomial degree must be >= 0");
  const auto n = static_cast<Eigen::Index>(xs.size());
  Eigen::MatrixXd design(n, degree + 1);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double p = 1.0;
    for (int d = 0; d <= degree; ++d) {
      design(i, d) = p;
      p *= xs[static_cast<std::size_t>(i)];
    }
    y(i) = ys[static_cast<std::size_t>(i)];
  }
  return ols(design, y);
}

double polynomial_mu(const Eigen::VectorXd& coef, double x) {
  double acc = 0.0;
  for (Eigen::Index d = coef.size(); d-- > 0;) acc = acc * x + coef(d);
  return acc;
}

double probit_loglik(const Eigen::MatrixXd& design, const std::vector<int>& s, const Eigen::VectorXd& coef) {
  const Eigen::VectorXd eta = design * coef;
  double ll = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    ll += s[static_cast<std::size_t>(i)] ? normal_log_cdf(eta(i)) : normal_log_cdf(-eta(i));
  }
  return ll;
}

ProbitFit fit_probit(const Eigen::MatrixXd& design, const std::vector<int>& s, int max_iter, double tol,
                     double ridge) {
  if (static_cast<std::size_t>(design.rows()) != s.size()) throw ConfigError("probit labels misaligned");
  ProbitFit fit;
  fit.coef = Eigen::VectorXd::Zero(design.cols());
  auto objective = [&](const Eigen::VectorXd& c) {
    return probit_loglik(design, s, c) - 0.5 * ridge * c.tail(c.size() - 1).squaredNorm();
  };
  double ll = objective(fit.coef);
  fit.loglik_trace.push_back(ll);
  for (int iter = 0; iter < max_iter; ++iter) {
    const Eigen::VectorXd eta = design * fit.coef;
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(design.cols());
    Eigen::MatrixXd info = Eigen::MatrixXd::Zero(design.cols(), design.cols());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
      const double q = s[static_cast<std::size_t>(i)] ? 1.0 : -1.0;
      const double lam = inverse_mills(q * eta(i));
      const double g = q * lam;
      // Negative second derivative of log Phi(q eta) in eta.
      const double h = lam * (lam + q * eta(i));
      grad += g * design.row(i).transpose();
      info += h * design.row(i).transpose() * design.row(i);
    }
    for (Eigen::Index k = 1; k < fit.coef.size(); ++k) {
      grad(k) -= ridge * fit.coef(k);
      info(k, k) += ridge;
    }
    const Eigen::VectorXd step = info.ldlt().solve(grad);
    double t = 1.0;
    Eigen::VectorXd next = fit.coef + step;
    double next_ll = objective(next);
    while (!(next_ll >= ll) && t > 1e-10) {
      t *= 0.5;
      next = fit.coef + t * step;
      next_ll = objective(next);
    }
    fit.iterations = iter + 1;
    if (!(next_ll >= ll)) {
      fit.converged = step.norm() < 1e-8;
      break;
    }
    const double gain = next_ll - ll;
    fit.coef = next;
    ll = next_ll;
    fit.loglik_trace.push_back(ll);
    if (gain < tol && (t * step).norm() < 1e-6) {
      fit.converged = true;
      break;
    }
  }
  return fit;
}

}  // namespace selbias
