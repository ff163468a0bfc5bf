#include "selbias/gmm.hpp"

#include "selbias/core.hpp"
#include "selbias/rng.hpp"
#include "selbias/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace selbias {

namespace {

constexpr double kLog2Pi = 1.83787706640934548356;

double mvn_log_pdf(const Eigen::Vector2d& p, const Eigen::Vector2d& m, const Eigen::Matrix2d& cov) {
  const double det = cov(0, 0) * cov(1, 1) - cov(0, 1) * cov(1, 0);
  const Eigen::Vector2d d = p - m;
  const double q = (cov(1, 1) * d(0) * d(0) - 2.0 * cov(0, 1) * d(0) * d(1) + cov(0, 0) * d(1) * d(1)) / det;
  return -kLog2Pi - 0.5 * std::log(det) - 0.5 * q;
}

GmmParams kmeans_init(const Eigen::MatrixX2d& pts, const std::vector<double>& w, std::size_t k,
                      std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(pts.rows());
  // Lexicographic order makes the seeding depend on the weighted point set
  // rather than on row order.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) {
    return pts(a, 0) != pts(b, 0) ? pts(a, 0) < pts(b, 0) : pts(a, 1) < pts(b, 1);
  });
  RngStream rng = RngStream(seed).split("kmeans");
  auto pick = [&](const std::vector<double>& mass) {
    const double total = std::accumulate(mass.begin(), mass.end(), 0.0);
    const double u = rng.uniform() * total;
    double run = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      run += mass[order[j]];
      if (run > u) return order[j];
    }
    return order[n - 1];
  };
  std::vector<Eigen::Vector2d> centers;
  centers.push_back(pts.row(static_cast<Eigen::Index>(pick(w))).transpose());
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  while (centers.size() < k) {
    std::vector<double> mass(n);
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], (pts.row(static_cast<Eigen::Index>(i)).transpose() - centers.back()).squaredNorm());
      mass[i] = w[i] * d2[i];
    }
    if (std::accumulate(mass.begin(), mass.end(), 0.0) <= 0.0) {
      centers.push_back(centers.back());
    } else {
      centers.push_back(pts.row(static_cast<Eigen::Index>(pick(mass))).transpose());
    }
  }

  std::vector<std::size_t> assign(n, 0);
  for (int iter = 0; iter < 50; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      const Eigen::Vector2d p = pts.row(static_cast<Eigen::Index>(i)).transpose();
      std::size_t best = 0;
      double bd = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const double d = (p - centers[c]).squaredNorm();
        if (d < bd) {
          bd = d;
          best = c;
        }
      }
      if (iter == 0 || assign[i] != best) changed = true;
      assign[i] = best;
    }
    std::vector<Eigen::Vector2d> sums(k, Eigen::Vector2d::Zero());
    std::vector<double> mass(k, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      sums[assign[i]] += w[i] * pts.row(static_cast<Eigen::Index>(i)).transpose();
      mass[assign[i]] += w[i];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (mass[c] > 0) centers[c] = sums[c] / mass[c];
    }
    if (!changed) break;
  }

  // Global covariance serves components left with too little mass.
  const double wsum = std::accumulate(w.begin(), w.end(), 0.0);
  Eigen::Vector2d gm = Eigen::Vector2d::Zero();
  for (std::size_t i = 0; i < n; ++i) gm += w[i] * pts.row(static_cast<Eigen::Index>(i)).transpose();
  gm /= wsum;
  Eigen::Matrix2d gcov = Eigen::Matrix2d::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector2d d = pts.row(static_cast<Eigen::Index>(i)).transpose() - gm;
    gcov += w[i] * d * d.transpose();
  }
  gcov /= wsum;

  GmmParams g;
  std::vector<Eigen::Matrix2d> covs(k, Eigen::Matrix2d::Zero());
  std::vector<double> mass(k, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector2d d = pts.row(static_cast<Eigen::Index>(i)).transpose() - centers[assign[i]];
    covs[assign[i]] += w[i] * d * d.transpose();
    mass[assign[i]] += w[i];
  }
  for (std::size_t c = 0; c < k; ++c) {
    g.weights.push_back(std::max(mass[c], 1e-12 * wsum) / wsum);
    g.means.push_back(centers[c]);
    Eigen::Matrix2d cov = mass[c] > 0 ? Eigen::Matrix2d(covs[c] / mass[c]) : gcov;
    if (cov.determinant() <= kCovFloor * kCovFloor) cov = 0.1 * gcov;
    g.covs.push_back(floor_covariance(cov));
  }
  const double s = std::accumulate(g.weights.begin(), g.weights.end(), 0.0);
  for (double& v : g.weights) v /= s;
  return g;
}

}  // namespace

double GmmParams::log_density(const Eigen::Vector2d& p) const {
  std::vector<double> terms(k());
  for (std::size_t c = 0; c < k(); ++c) terms[c] = std::log(weights[c]) + mvn_log_pdf(p, means[c], covs[c]);
  return log_sum_exp(terms);
}

Eigen::Matrix2d floor_covariance(const Eigen::Matrix2d& cov, double floor) {
  const Eigen::Matrix2d sym = 0.5 * (cov + cov.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(sym);
  Eigen::Vector2d ev = es.eigenvalues();
  if (ev.minCoeff() >= floor) return sym;
  ev = ev.cwiseMax(floor);
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

GmmFit gmm_weighted_em(const Eigen::MatrixX2d& points, const std::vector<double>& weights, std::size_t k,
                       const EmOptions& opts) {
  const auto n = static_cast<std::size_t>(points.rows());
  if (k == 0) throw ConfigError("mixture needs at least one component");
  if (k > n) throw ConfigError("more mixture components than points");
  if (weights.size() != n) throw ConfigError("one weight per point required");
  for (double w : weights) {
    if (!(w > 0.0) || !std::isfinite(w)) throw ConfigError("EM weights must be positive and finite");
  }
  const double wsum = std::accumulate(weights.begin(), weights.end(), 0.0);

  GmmFit fit;
  if (opts.init) {
    if (opts.init->k() != k) throw ConfigError("warm start has the wrong component count");
    fit.params = *opts.init;
  } else {
    fit.params = kmeans_init(points, weights, k, opts.seed);
  }
  GmmParams& g = fit.params;

  Eigen::MatrixXd resp(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
  double prev = -std::numeric_limits<double>::infinity();
  std::vector<double> terms(k);
  for (int iter = 0; iter < opts.max_iter; ++iter) {
    double ll = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const Eigen::Vector2d p = points.row(static_cast<Eigen::Index>(i)).transpose();
      for (std::size_t c = 0; c < k; ++c) {
        terms[c] = std::log(g.weights[c]) + mvn_log_pdf(p, g.means[c], g.covs[c]);
      }
      const double lse = log_sum_exp(terms);
      ll += weights[i] * lse;
      for (std::size_t c = 0; c < k; ++c) {
        resp(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = std::exp(terms[c] - lse);
      }
    }
    ll /= wsum;
    fit.loglik_trace.push_back(ll);
    fit.iterations = iter + 1;
    if (!std::isfinite(ll)) throw EstimationError("EM log-likelihood is not finite");
    if (iter > 0 && std::abs(ll - prev) < opts.tol) {
      fit.converged = true;
      break;
    }
    prev = ll;

    for (std::size_t c = 0; c < k; ++c) {
      double nk = 0.0;
      Eigen::Vector2d m = Eigen::Vector2d::Zero();
      for (std::size_t i = 0; i < n; ++i) {
        const double r = weights[i] * resp(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c));
        nk += r;
        m += r * points.row(static_cast<Eigen::Index>(i)).transpose();
      }
      if (nk <= 1e-12 * wsum) {
        g.weights[c] = std::max(nk / wsum, 1e-300);
        continue;
      }
      m /= nk;
      Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
      for (std::size_t i = 0; i < n; ++i) {
        const double r = weights[i] * resp(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c));
        const Eigen::Vector2d d = points.row(static_cast<Eigen::Index>(i)).transpose() - m;
        cov += r * d * d.transpose();
      }
      g.weights[c] = nk / wsum;
      g.means[c] = m;
      g.covs[c] = floor_covariance(cov / nk);
    }
  }
  return fit;
}

ConditionalMixture gmm_conditional(const GmmParams& gmm, double x) {
  ConditionalMixture out;
  double total = 0.0;
  for (std::size_t c = 0; c < gmm.k(); ++c) {
    const double sxx = gmm.covs[c](0, 0);
    const double sxy = gmm.covs[c](0, 1);
    const double w = gmm.weights[c] * normal_pdf(x, gmm.means[c](0), std::sqrt(sxx));
    out.weights.push_back(w);
    out.means.push_back(gmm.means[c](1) + sxy / sxx * (x - gmm.means[c](0)));
    out.sds.push_back(std::sqrt(std::max(gmm.covs[c](1, 1) - sxy * sxy / sxx, 0.0)));
    total += w;
  }
  if (total > 0.0 && std::isfinite(total)) {
    for (double& w : out.weights) w /= total;
    return out;
  }
  // Every marginal density underflowed: use the component nearest in
  // standardized distance.
  std::size_t best = 0;
  double bd = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < gmm.k(); ++c) {
    const double d = std::abs(x - gmm.means[c](0)) / std::sqrt(gmm.covs[c](0, 0));
    if (d < bd) {
      bd = d;
      best = c;
    }
  }
  std::fill(out.weights.begin(), out.weights.end(), 0.0);
  out.weights[best] = 1.0;
  out.fallback = true;
  return out;
}

double gmm_conditional_mean(const GmmParams& gmm, double x, bool* fallback) {
  const ConditionalMixture cm = gmm_conditional(gmm, x);
  if (fallback) *fallback = cm.fallback;
  double m = 0.0;
  for (std::size_t c = 0; c < cm.weights.size(); ++c) m += cm.weights[c] * cm.means[c];
  return m;
}

}  // namespace selbias
