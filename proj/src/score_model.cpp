#include "selbias/score_model.hpp"

#include "selbias/rng.hpp"
#include "selbias/stats.hpp"

#include <algorithm>
#include <cmath>

namespace selbias {

Standardizer Standardizer::fit(const Dataset& data) {
  Standardizer s;
  const auto xs = data.xs();
  const auto ys = data.ys();
  if (xs.empty()) return s;
  s.x_mean = mean(xs);
  s.y_mean = mean(ys);
  const double vx = sample_variance(xs), vy = sample_variance(ys);
  s.x_sd = vx > 1e-24 ? std::sqrt(vx) : 1.0;
  s.y_sd = vy > 1e-24 ? std::sqrt(vy) : 1.0;
  return s;
}

BetaModel BetaModel::make(const Standardizer& scale, int hidden, std::uint64_t seed) {
  BetaModel b{Mlp({3, hidden, 1}, Activation::Tanh, seed), scale};
  b.net.zero_output_layer();
  return b;
}

Eigen::MatrixXd BetaModel::inputs(const std::vector<double>& xs, const std::vector<double>& ys,
                                  const std::vector<int>& ts) const {
  Eigen::MatrixXd in(3, static_cast<Eigen::Index>(xs.size()));
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const auto c = static_cast<Eigen::Index>(i);
    in(0, c) = scale.zx(xs[i]);
    in(1, c) = scale.zy(ys[i]);
    in(2, c) = ts[i];
  }
  return in;
}

double BetaModel::log_beta(double x, double y, int t) const {
  return net.forward(inputs({x}, {y}, {t}))(0, 0);
}

std::vector<double> BetaModel::beta(const Dataset& data, bool* clamped) const {
  const Eigen::MatrixXd out = net.forward(inputs(data.xs(), data.ys(), data.ts()));
  std::vector<double> b(static_cast<std::size_t>(out.cols()));
  bool hit = false;
  for (Eigen::Index i = 0; i < out.cols(); ++i) {
    double v = std::exp(out(0, i));
    if (!(v >= kBetaMin) || !(v <= kBetaMax)) {
      hit = true;
      v = std::clamp(std::isnan(v) ? 1.0 : v, kBetaMin, kBetaMax);
    }
    b[static_cast<std::size_t>(i)] = v;
  }
  if (clamped) *clamped = hit;
  return b;
}

namespace {

struct GridPass {
  double mean = 0.0;
  double outer_mass = 0.0;
};

GridPass grid_pass(const Eigen::ArrayXd& ys, const Eigen::ArrayXd& scores) {
  const Eigen::Index m = ys.size();
  const double dy = m > 1 ? ys(1) - ys(0) : 1.0;
  Eigen::ArrayXd logp(m);
  double run = 0.0;
  for (Eigen::Index j = 0; j < m; ++j) {
    run += scores(j) * dy;
    logp(j) = run;
  }
  const double top = logp.maxCoeff();
  const Eigen::ArrayXd p = (logp - top).exp();
  const Eigen::ArrayXd prob = p / p.sum();
  GridPass out;
  out.mean = (ys * prob).sum();
  const Eigen::Index edge = std::max<Eigen::Index>(1, m / 50);
  out.outer_mass = prob.head(edge).sum() + prob.tail(edge).sum();
  if (!std::isfinite(out.mean)) out.outer_mass = 1.0;
  return out;
}

Eigen::ArrayXd grid_points(const GridSpec& g) {
  if (g.m < 2 || !(g.y_max > g.y_min)) throw ConfigError("integration grid needs m >= 2 and y_max > y_min");
  return Eigen::ArrayXd::LinSpaced(g.m, g.y_min, g.y_max);
}

GridSpec widen(const GridSpec& g) {
  const double c = 0.5 * (g.y_min + g.y_max);
  const double half = g.y_max - g.y_min;
  return {c - half, c + half, g.m};
}

constexpr double kOuterMassLimit = 1e-3;

}  // namespace

GridMean grid_conditional_mean(const std::function<Eigen::ArrayXd(const Eigen::ArrayXd&)>& score,
                               const GridSpec& grid) {
  Eigen::ArrayXd ys = grid_points(grid);
  GridPass pass = grid_pass(ys, score(ys));
  GridMean out{pass.mean};
  if (pass.outer_mass > kOuterMassLimit) {
    out.widened = true;
    ys = grid_points(widen(grid));
    pass = grid_pass(ys, score(ys));
    out.value = pass.mean;
    out.flagged = pass.outer_mass > kOuterMassLimit;
  }
  return out;
}

double ScoreModel::score(double x, double y) const {
  Eigen::ArrayXd ys(1);
  ys(0) = y;
  return score(x, ys)(0);
}

Eigen::ArrayXd ScoreModel::score(double x, const Eigen::ArrayXd& ys) const {
  Eigen::MatrixXd in(2, ys.size());
  in.row(0).setConstant(scale.zx(x));
  in.row(1) = ((ys - scale.y_mean) / scale.y_sd).matrix().transpose();
  return score_net.forward(in).row(0).transpose().array() / scale.y_sd;
}

GridMean score_conditional_mean(const ScoreModel& model, double x) {
  return grid_conditional_mean([&](const Eigen::ArrayXd& ys) { return model.score(x, ys); }, model.grid);
}

std::vector<GridMean> score_conditional_mean(const ScoreModel& model, const std::vector<double>& xs) {
  const Eigen::ArrayXd ys = grid_points(model.grid);
  const Eigen::Index m = ys.size();
  constexpr std::size_t kChunk = 16;
  std::vector<GridMean> out(xs.size());
  for (std::size_t start = 0; start < xs.size(); start += kChunk) {
    const std::size_t len = std::min(kChunk, xs.size() - start);
    Eigen::MatrixXd in(2, static_cast<Eigen::Index>(len) * m);
    for (std::size_t c = 0; c < len; ++c) {
      const auto off = static_cast<Eigen::Index>(c) * m;
      in.block(0, off, 1, m).setConstant(model.scale.zx(xs[start + c]));
      in.block(1, off, 1, m) = ((ys - model.scale.y_mean) / model.scale.y_sd).matrix().transpose();
    }
    const Eigen::MatrixXd s = model.score_net.forward(in) / model.scale.y_sd;
    for (std::size_t c = 0; c < len; ++c) {
      const Eigen::ArrayXd sc = s.block(0, static_cast<Eigen::Index>(c) * m, 1, m).transpose().array();
      const GridPass pass = grid_pass(ys, sc);
      if (pass.outer_mass > kOuterMassLimit) {
        out[start + c] = score_conditional_mean(model, xs[start + c]);
      } else {
        out[start + c] = GridMean{pass.mean};
      }
    }
  }
  return out;
}

Tape::Var score_matching_loss(Tape& tape, const Mlp& score_net, const Mlp* beta_net, const Eigen::MatrixXd& zxy,
                              int arm, const ScoreConfig& cfg) {
  const double h = cfg.h;
  const TapeFn s_fn = net_fn(score_net);
  const Tape::Var s = tape.net(score_net, zxy);
  const Tape::Var ds = d_dy(tape, s_fn, zxy, 1, h);
  Tape::Var psi = s;
  Tape::Var dpsi = ds;
  Tape::Var penalty = 0;
  if (beta_net) {
    Eigen::MatrixXd in3(3, zxy.cols());
    in3.topRows(2) = zxy;
    in3.row(2).setConstant(arm);
    const TapeFn r_fn = net_fn(*beta_net);
    const TapeFn dr_fn = [&](Tape& tp, const Eigen::MatrixXd& in) { return d_dy(tp, r_fn, in, 1, h); };
    const Tape::Var log_beta = tape.net(*beta_net, in3);
    psi = tape.add(s, dr_fn(tape, in3));
    dpsi = tape.add(ds, d_dy(tape, dr_fn, in3, 1, h));
    const Tape::Var beta_sq = tape.unary("exp", tape.scale(log_beta, 2.0));
    penalty = tape.add(tape.scale(log_beta, -cfg.lambda1), tape.scale(beta_sq, cfg.lambda2));
  }
  Tape::Var per_unit = tape.add(tape.scale(tape.unary("square", psi), 0.5), dpsi);
  if (beta_net) per_unit = tape.add(per_unit, penalty);
  return tape.mean(per_unit);
}

namespace {

struct TrainAttempt {
  bool finite = true;
  std::vector<double> trace;
};

/// Number of covariate quantiles per arm at which the fitted density must
/// integrate inside the grid for the fit to be accepted.
constexpr std::size_t kSupportChecks = 21;

std::size_t unnormalizable_points(const ScoreFit& fit, const Dataset& observed_b) {
  std::size_t bad = 0;
  for (int arm = 0; arm < 2; ++arm) {
    std::vector<double> xs;
    for (const Sample& s : observed_b.samples()) {
      if (s.t == arm) xs.push_back(s.x);
    }
    std::sort(xs.begin(), xs.end());
    for (std::size_t q = 0; q < kSupportChecks; ++q) {
      const double x = xs[q * (xs.size() - 1) / (kSupportChecks - 1)];
      bad += score_conditional_mean(fit.arms[static_cast<std::size_t>(arm)], x).flagged;
    }
  }
  return bad;
}

}  // namespace

ScoreFit fit_score_model(const Dataset& observed_b, bool correction, const ScoreConfig& cfg) {
  if (observed_b.count_arm(0) == 0 || observed_b.count_arm(1) == 0) {
    throw EstimationError("score model needs both arms in the overlap region");
  }
  const Standardizer scale = Standardizer::fit(observed_b);
  const auto n = observed_b.size();
  Eigen::MatrixXd z(2, static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    z(0, static_cast<Eigen::Index>(i)) = scale.zx(observed_b[i].x);
    z(1, static_cast<Eigen::Index>(i)) = scale.zy(observed_b[i].y);
  }

  std::vector<int> sizes{2};
  sizes.insert(sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
  sizes.push_back(1);

  double lr = cfg.learning_rate;
  std::optional<ScoreFit> best;
  std::size_t best_bad = 0;
  for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
    const std::uint64_t init = cfg.seed * 2 + 11 + 1000 * static_cast<std::uint64_t>(attempt);
    std::array<Mlp, 2> nets{Mlp(sizes, Activation::Softplus, init), Mlp(sizes, Activation::Softplus, init + 1)};
    std::optional<BetaModel> beta;
    if (correction) beta = BetaModel::make(scale, cfg.beta_hidden, cfg.seed + 101);
    std::array<Adam, 2> opts{Adam(nets[0].num_params(), lr), Adam(nets[1].num_params(), lr)};
    Adam beta_opt(beta ? beta->net.num_params() : 0, lr);

    RngStream rng = RngStream(cfg.seed).split("score-batches");
    TrainAttempt run;
    std::vector<Eigen::Index> cols[2];
    for (int step = 0; step < cfg.steps && run.finite; ++step) {
      cols[0].clear();
      cols[1].clear();
      const std::size_t b = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch), n);
      for (std::size_t j = 0; j < b; ++j) {
        const std::size_t i = rng.next_u64() % n;
        cols[observed_b[i].t].push_back(static_cast<Eigen::Index>(i));
      }
      Tape tape;
      std::vector<Tape::Var> parts;
      for (int arm = 0; arm < 2; ++arm) {
        if (cols[arm].empty()) continue;
        const Eigen::MatrixXd batch = z(Eigen::all, cols[arm]);
        const Tape::Var l = score_matching_loss(tape, nets[arm], beta ? &beta->net : nullptr, batch, arm, cfg);
        parts.push_back(tape.scale(l, static_cast<double>(cols[arm].size()) / static_cast<double>(b)));
      }
      const Tape::Var loss = parts.size() == 2 ? tape.add(parts[0], parts[1]) : parts[0];
      const double value = tape.scalar(loss);
      if (!std::isfinite(value)) {
        run.finite = false;
        break;
      }
      run.trace.push_back(value);
      const Mlp* targets[] = {&nets[0], &nets[1], beta ? &beta->net : nullptr};
      const std::size_t nt = beta ? 3 : 2;
      const auto grads = tape.backward(loss, std::span<const Mlp* const>(targets, nt));
      for (int arm = 0; arm < 2; ++arm) opts[arm].step(nets[arm].params(), grads[arm]);
      if (beta) beta_opt.step(beta->net.params(), grads[2]);
      for (int arm = 0; arm < 2 && run.finite; ++arm) run.finite = nets[arm].params().allFinite();
    }
    if (run.finite) {
      ScoreFit fit{{ScoreModel{0, std::move(nets[0]), scale, cfg.grid}, ScoreModel{1, std::move(nets[1]), scale, cfg.grid}},
                   std::move(beta), std::move(run.trace), attempt};
      const std::size_t bad = unnormalizable_points(fit, observed_b);
      if (bad == 0) return fit;
      if (!best || bad < best_bad) {
        best = std::move(fit);
        best_bad = bad;
      }
    }
    lr *= 0.5;
  }
  if (best) return std::move(*best);
  throw EstimationError("score matching loss diverged after " + std::to_string(cfg.max_retries) +
                        " learning-rate halvings");
}

}  // namespace selbias
