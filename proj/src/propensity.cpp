#include "selbias/propensity.hpp"

#include "selbias/rng.hpp"
#include "selbias/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace selbias {

std::vector<double> pav(const std::vector<double>& y, const std::vector<double>& w) {
  struct Block {
    double sum_wy, sum_w;
    std::size_t count;
  };
  std::vector<Block> blocks;
  for (std::size_t i = 0; i < y.size(); ++i) {
    blocks.push_back({w[i] * y[i], w[i], 1});
    while (blocks.size() > 1) {
      const Block& b = blocks.back();
      const Block& a = blocks[blocks.size() - 2];
      if (a.sum_wy / a.sum_w <= b.sum_wy / b.sum_w) break;
      Block merged{a.sum_wy + b.sum_wy, a.sum_w + b.sum_w, a.count + b.count};
      blocks.pop_back();
      blocks.back() = merged;
    }
  }
  std::vector<double> out;
  out.reserve(y.size());
  for (const auto& b : blocks) out.insert(out.end(), b.count, b.sum_wy / b.sum_w);
  return out;
}

void IsotonicCalibrator::fit(std::vector<double> raw, std::vector<double> target, std::vector<double> weights) {
  if (raw.size() != target.size()) throw ConfigError("calibrator inputs differ in length");
  if (raw.empty()) throw ConfigError("calibrator needs at least one point");
  if (weights.empty()) weights.assign(raw.size(), 1.0);
  std::vector<std::size_t> order(raw.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return raw[a] < raw[b]; });

  // Tied raw scores collapse to one weighted point before pooling.
  std::vector<double> xs, ys, ws;
  for (std::size_t idx : order) {
    if (!xs.empty() && raw[idx] == xs.back()) {
      ys.back() += weights[idx] * target[idx];
      ws.back() += weights[idx];
    } else {
      xs.push_back(raw[idx]);
      ys.push_back(weights[idx] * target[idx]);
      ws.push_back(weights[idx]);
    }
  }
  for (std::size_t i = 0; i < ys.size(); ++i) ys[i] /= ws[i];
  const std::vector<double> fitted = pav(ys, ws);

  starts_.clear();
  values_.clear();
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!values_.empty() && fitted[i] == values_.back()) continue;
    starts_.push_back(xs[i]);
    values_.push_back(fitted[i]);
  }
}

double IsotonicCalibrator::operator()(double raw) const {
  if (values_.empty()) throw ConfigError("calibrator is not fitted");
  auto it = std::upper_bound(starts_.begin(), starts_.end(), raw);
  if (it == starts_.begin()) return values_.front();
  return values_[static_cast<std::size_t>(it - starts_.begin()) - 1];
}

PropensityModel::PropensityModel(Mlp classifier, IsotonicCalibrator calibrator, double x_mean, double x_sd)
    : classifier_(std::move(classifier)), calibrator_(std::move(calibrator)), x_mean_(x_mean), x_sd_(x_sd) {}

std::vector<double> PropensityModel::raw_scores(const std::vector<double>& xs) const {
  Eigen::MatrixXd in(1, static_cast<Eigen::Index>(xs.size()));
  for (std::size_t i = 0; i < xs.size(); ++i) in(0, static_cast<Eigen::Index>(i)) = (xs[i] - x_mean_) / x_sd_;
  const Eigen::MatrixXd out = classifier_.forward(in);
  return {out.data(), out.data() + out.size()};
}

double PropensityModel::raw_score(double x) const { return raw_scores({x}).front(); }

double PropensityModel::predict(double x) const { return calibrator_(raw_score(x)); }

std::vector<double> PropensityModel::predict(const std::vector<double>& xs) const {
  std::vector<double> out = raw_scores(xs);
  for (double& v : out) v = calibrator_(v);
  return out;
}

Mlp train_classifier(const std::vector<double>& z, const std::vector<int>& t, const PropensityConfig& cfg,
                     std::uint64_t seed) {
  std::vector<int> sizes{1};
  if (cfg.kind == PropensityKind::Mlp) sizes.insert(sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
  sizes.push_back(1);
  Mlp net(sizes, Activation::ReLU, seed);

  const auto n = static_cast<Eigen::Index>(z.size());
  Eigen::MatrixXd in(1, n);
  Eigen::ArrayXd label(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    in(0, i) = z[static_cast<std::size_t>(i)];
    label(i) = t[static_cast<std::size_t>(i)];
  }
  Adam opt(net.num_params(), cfg.learning_rate);
  Mlp::Cache cache;
  Eigen::VectorXd grad(net.num_params());
  for (int it = 0; it < cfg.iterations; ++it) {
    const Eigen::ArrayXd logit = net.forward(in, &cache).row(0).transpose().array();
    // d/dlogit of mean logistic loss.
    const Eigen::ArrayXd p = logit.unaryExpr([](double v) { return logistic(v); });
    const Eigen::MatrixXd g = ((p - label) / static_cast<double>(n)).matrix().transpose();
    grad.setZero();
    net.backward(cache, g, grad);
    opt.step(net.params(), grad);
  }
  return net;
}

PropensityModel fit_propensity(const Dataset& observed, const PropensityConfig& cfg) {
  const std::size_t n1 = observed.count_arm(1);
  if (n1 == 0 || n1 == observed.size()) throw EstimationError("cannot fit propensity: degenerate treatment");
  if (cfg.folds < 2) throw ConfigError("propensity calibration needs at least 2 folds");
  if (observed.size() < static_cast<std::size_t>(cfg.folds)) {
    throw EstimationError("cannot fit propensity: fewer samples than folds");
  }
  const std::vector<double> xs = observed.xs();
  const std::vector<int> ts = observed.ts();
  const double mu = mean(xs);
  double sd = std::sqrt(sample_variance(xs));
  if (!(sd > 1e-12)) sd = 1.0;
  std::vector<double> z(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) z[i] = (xs[i] - mu) / sd;

  // Fold assignment by a seeded shuffle.
  std::vector<std::size_t> perm(xs.size());
  std::iota(perm.begin(), perm.end(), 0);
  RngStream rng = RngStream(cfg.seed).split("folds");
  for (std::size_t i = perm.size(); i > 1; --i) {
    std::swap(perm[i - 1], perm[rng.next_u64() % i]);
  }
  std::vector<int> fold(xs.size());
  for (std::size_t i = 0; i < perm.size(); ++i) fold[perm[i]] = static_cast<int>(i % cfg.folds);

  std::vector<double> oof_raw(xs.size());
  for (int f = 0; f < cfg.folds; ++f) {
    std::vector<double> zt;
    std::vector<int> tt;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      if (fold[i] != f) {
        zt.push_back(z[i]);
        tt.push_back(ts[i]);
      }
    }
    const Mlp net = train_classifier(zt, tt, cfg, cfg.seed + 1 + static_cast<std::uint64_t>(f));
    std::vector<std::size_t> held;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      if (fold[i] == f) held.push_back(i);
    }
    Eigen::MatrixXd hin(1, static_cast<Eigen::Index>(held.size()));
    for (std::size_t j = 0; j < held.size(); ++j) hin(0, static_cast<Eigen::Index>(j)) = z[held[j]];
    const Eigen::MatrixXd out = net.forward(hin);
    for (std::size_t j = 0; j < held.size(); ++j) oof_raw[held[j]] = out(0, static_cast<Eigen::Index>(j));
  }
  IsotonicCalibrator cal;
  std::vector<double> target(ts.begin(), ts.end());
  cal.fit(oof_raw, target);
  Mlp full = train_classifier(z, ts, cfg, cfg.seed);
  return PropensityModel(std::move(full), std::move(cal), mu, sd);
}

OverlapRegions overlap_filter(const Dataset& observed, const PropensityModel& model, double c) {
  if (!(c > 0.0 && c < 0.5)) throw ConfigError("overlap threshold c must lie in (0, 1/2)");
  OverlapRegions r;
  r.c = c;
  r.e_hat = model.predict(observed.xs());
  for (std::size_t i = 0; i < r.e_hat.size(); ++i) {
    const bool in1 = r.e_hat[i] >= c;
    const bool in0 = r.e_hat[i] <= 1.0 - c;
    if (in1) r.s1_indices.push_back(i);
    if (in0) r.s0_indices.push_back(i);
    if (in1 && in0) r.b_indices.push_back(i);
  }
  return r;
}

bool in_overlap(const PropensityModel& model, double x, double c) {
  const double e = model.predict(x);
  return e >= c && e <= 1.0 - c;
}

}  // namespace selbias
