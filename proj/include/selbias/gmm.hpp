#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace selbias {

inline constexpr double kCovFloor = 1e-6;

/// Bivariate mixture over (x, y).
struct GmmParams {
  std::vector<double> weights;
  std::vector<Eigen::Vector2d> means;
  std::vector<Eigen::Matrix2d> covs;

  [[nodiscard]] std::size_t k() const { return weights.size(); }
  [[nodiscard]] double log_density(const Eigen::Vector2d& p) const;
};

struct GmmFit {
  GmmParams params;
  std::vector<double> loglik_trace;  // weighted mean log-likelihood per iteration
  int iterations = 0;
  bool converged = false;
};

struct EmOptions {
  double tol = 1e-6;
  int max_iter = 500;
  std::uint64_t seed = 0;
  const GmmParams* init = nullptr;  // warm start; skips k-means++
};

/// Points are rows of an n x 2 matrix.
GmmFit gmm_weighted_em(const Eigen::MatrixX2d& points, const std::vector<double>& weights, std::size_t k,
                       const EmOptions& opts = {});

/// Gaussian mixture of y given x implied by the joint fit.
struct ConditionalMixture {
  std::vector<double> weights;
  std::vector<double> means;
  std::vector<double> sds;
  bool fallback = false;
};

ConditionalMixture gmm_conditional(const GmmParams& gmm, double x);
double gmm_conditional_mean(const GmmParams& gmm, double x, bool* fallback = nullptr);

/// Floors the eigenvalues of a symmetric 2x2 matrix.
Eigen::Matrix2d floor_covariance(const Eigen::Matrix2d& cov, double floor = kCovFloor);

}  // namespace selbias
