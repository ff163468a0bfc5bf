#pragma once

// Random problem generators shared by the unit tests and the acceptance suite.

#include "selbias/gmm.hpp"
#include "selbias/nnet.hpp"
#include "selbias/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace fixtures {

using selbias::GmmParams;
using selbias::RngStream;

inline GmmParams random_mixture(RngStream& r) {
  GmmParams g;
  const int k = 1 + static_cast<int>(r.uniform() * 5);
  double total = 0;
  for (int c = 0; c < k; ++c) {
    const double w = 0.1 + r.uniform();
    g.weights.push_back(w);
    total += w;
    g.means.emplace_back(r.uniform(-3, 3), r.uniform(-3, 3));
    const double sx = 0.3 + r.uniform() * 1.5, sy = 0.3 + r.uniform() * 1.5, rho = r.uniform(-0.9, 0.9);
    Eigen::Matrix2d cov;
    cov << sx * sx, rho * sx * sy, rho * sx * sy, sy * sy;
    g.covs.push_back(cov);
  }
  for (double& w : g.weights) w /= total;
  return g;
}

/// Mixture density written out from the bivariate normal formula.
inline double joint_density(const GmmParams& g, double x, double y) {
  double s = 0;
  for (std::size_t c = 0; c < g.k(); ++c) {
    const Eigen::Vector2d d(x - g.means[c](0), y - g.means[c](1));
    const Eigen::Matrix2d& S = g.covs[c];
    s += g.weights[c] * std::exp(-0.5 * d.dot(S.inverse() * d)) / (2 * std::numbers::pi * std::sqrt(S.determinant()));
  }
  return s;
}

inline Eigen::MatrixXd random_input(int rows, int cols, RngStream& r) {
  Eigen::MatrixXd m(rows, cols);
  for (int j = 0; j < cols; ++j) {
    for (int i = 0; i < rows; ++i) m(i, j) = r.uniform(-2, 2);
  }
  return m;
}

/// Largest relative gradient error over `trials` random networks, each paired
/// with one of five losses (squared error, mixed activations, a y-derivative
/// term, grouped log-sum-exp, nested y-derivatives).
inline double worst_gradient_error(std::uint64_t seed, int trials) {
  using namespace selbias;
  RngStream r(seed);
  double worst = 0.0;
  for (int trial = 0; trial < trials; ++trial) {
    const int width = 3 + static_cast<int>(r.uniform() * 6);
    const Activation act = trial % 2 ? Activation::Tanh : Activation::Softplus;
    Mlp net({2, width, width, 1}, act, 100 + static_cast<std::uint64_t>(trial));
    const Eigen::MatrixXd in = random_input(2, 6, r);
    Eigen::ArrayXd target(6);
    for (int i = 0; i < 6; ++i) target(i) = r.normal();
    const int kind = trial % 5;
    auto loss = [&](Tape& t) -> Tape::Var {
      const auto o = t.net(net, in);
      switch (kind) {
        case 0:
          return t.mean(t.unary("square", t.sub(o, t.constant(target))));
        case 1:
          return t.add(t.mean(t.mul(t.unary("tanh", o), t.constant(target))),
                       t.scale(t.sum(t.unary("sigmoid", o)), 0.1));
        case 2: {
          const auto dy = d_dy(t, net_fn(net), in, 1);
          return t.mean(t.add(t.scale(t.unary("square", o), 0.5), dy));
        }
        case 3:
          return t.mean(t.unary("log", t.group_sum(t.unary("exp", o), 3)));
        default: {
          const TapeFn df = [&](Tape& tt, const Eigen::MatrixXd& m) { return d_dy(tt, net_fn(net), m, 1, 1e-2); };
          return t.mean(t.add(t.unary("softplus", o), d_dy(t, df, in, 1, 1e-2)));
        }
      }
    };
    worst = std::max(worst, gradient_check(net, loss).max_rel_err);
  }
  return worst;
}

}  // namespace fixtures
