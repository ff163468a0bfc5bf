#include "selbias/estimators.hpp"

#include "selbias/regression.hpp"
#include "selbias/rng.hpp"
#include "selbias/stats.hpp"

#include <algorithm>
#include <cmath>

namespace selbias {

double ipw_arm_mean(const Dataset& observed, const OverlapRegions& regions, int arm) {
  const auto& idx = arm == 1 ? regions.s1_indices : regions.s0_indices;
  double num = 0.0, den = 0.0;
  for (std::size_t i : idx) {
    const Sample& s = observed[i];
    if (s.t != arm) continue;
    const double p = arm == 1 ? regions.e_hat[i] : 1.0 - regions.e_hat[i];
    const double w = 1.0 / p;
    num += w * s.y;
    den += w;
  }
  if (den == 0.0) throw EstimationError("no overlap support for arm " + std::to_string(arm));
  return num / den;
}

namespace {

Eigen::MatrixX2d arm_points(const Dataset& data, int arm, std::vector<std::size_t>* rows = nullptr) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data[i].t == arm) idx.push_back(i);
  }
  Eigen::MatrixX2d pts(static_cast<Eigen::Index>(idx.size()), 2);
  for (std::size_t j = 0; j < idx.size(); ++j) {
    pts(static_cast<Eigen::Index>(j), 0) = data[idx[j]].x;
    pts(static_cast<Eigen::Index>(j), 1) = data[idx[j]].y;
  }
  if (rows) *rows = std::move(idx);
  return pts;
}

}  // namespace

Tape::Var beta_step_loss(Tape& tape, const BetaModel& beta, const std::array<GmmParams, 2>& gmm,
                         const Dataset& batch, double lambda, std::size_t quadrature_order) {
  const GaussHermite& gh = gauss_hermite(quadrature_order);
  const std::size_t k = gmm[0].k();
  if (gmm[1].k() != k) throw ConfigError("arm mixtures differ in component count");
  const std::size_t group = k * gh.nodes.size();
  std::vector<double> qx, qy;
  std::vector<int> qt;
  Eigen::ArrayXd coef(static_cast<Eigen::Index>(batch.size() * group));
  qx.reserve(batch.size() * group);
  qy.reserve(batch.size() * group);
  qt.reserve(batch.size() * group);
  Eigen::Index pos = 0;
  for (const Sample& s : batch.samples()) {
    const ConditionalMixture cm = gmm_conditional(gmm[static_cast<std::size_t>(s.t)], s.x);
    for (std::size_t c = 0; c < k; ++c) {
      for (std::size_t j = 0; j < gh.nodes.size(); ++j) {
        qx.push_back(s.x);
        qy.push_back(cm.means[c] + cm.sds[c] * gh.nodes[j]);
        qt.push_back(s.t);
        coef(pos++) = cm.weights[c] * gh.weights[j];
      }
    }
  }
  const Tape::Var r_obs = tape.net(beta.net, beta.inputs(batch.xs(), batch.ys(), batch.ts()));
  const Tape::Var r_q = tape.net(beta.net, beta.inputs(qx, qy, qt));
  const Tape::Var z = tape.group_sum(tape.mul(tape.constant(coef), tape.unary("exp", r_q)), group);
  const Tape::Var nll = tape.sub(tape.unary("log", z), r_obs);
  const Tape::Var pen = tape.scale(tape.unary("square", r_obs), lambda);
  return tape.mean(tape.add(nll, pen));
}

MleFit fit_mle(const Dataset& observed_b, bool correction, const MleConfig& cfg) {
  MleFit fit;
  std::array<Eigen::MatrixX2d, 2> pts;
  std::array<std::vector<std::size_t>, 2> rows;
  for (int arm = 0; arm < 2; ++arm) {
    pts[arm] = arm_points(observed_b, arm, &rows[arm]);
    if (static_cast<std::size_t>(pts[arm].rows()) < cfg.k) {
      throw EstimationError("arm " + std::to_string(arm) + " has fewer points than mixture components");
    }
  }
  auto run_em = [&](int arm, const std::vector<double>& w, const GmmParams* init) {
    EmOptions opts;
    opts.tol = cfg.em_tol;
    opts.max_iter = cfg.em_max_iter;
    opts.seed = cfg.seed * 2 + static_cast<std::uint64_t>(arm);
    opts.init = init;
    GmmFit g = gmm_weighted_em(pts[arm], w, cfg.k, opts);
    fit.em_traces.push_back(std::move(g.loglik_trace));
    fit.gmm[arm] = std::move(g.params);
  };
  for (int arm = 0; arm < 2; ++arm) run_em(arm, std::vector<double>(rows[arm].size(), 1.0), nullptr);
  if (!correction) return fit;

  BetaModel beta = BetaModel::make(Standardizer::fit(observed_b), cfg.beta_hidden, cfg.seed + 7);
  Adam opt(beta.net.num_params(), cfg.learning_rate);
  RngStream rng = RngStream(cfg.seed).split("beta-batches");
  const std::size_t n = observed_b.size();
  const std::size_t b = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch), n);
  const Mlp* targets[] = {&beta.net};
  for (int round = 0; round < cfg.rounds; ++round) {
    for (int step = 0; step < cfg.beta_steps; ++step) {
      std::vector<std::size_t> idx(b);
      for (auto& i : idx) i = rng.next_u64() % n;
      Tape tape;
      const Tape::Var loss = beta_step_loss(tape, beta, fit.gmm, observed_b.subset(idx), cfg.lambda,
                                            cfg.quadrature_order);
      const double v = tape.scalar(loss);
      if (!std::isfinite(v)) throw EstimationError("selection-weight loss is not finite");
      fit.beta_loss_trace.push_back(v);
      opt.step(beta.net.params(), tape.backward(loss, targets).front());
    }
    bool clamped = false;
    const std::vector<double> bvals = beta.beta(observed_b, &clamped);
    fit.beta_clamped = fit.beta_clamped || clamped;
    for (int arm = 0; arm < 2; ++arm) {
      std::vector<double> w;
      w.reserve(rows[arm].size());
      for (std::size_t i : rows[arm]) w.push_back(1.0 / bvals[i]);
      const GmmParams warm = fit.gmm[arm];
      run_em(arm, w, &warm);
    }
  }
  fit.beta = std::move(beta);
  return fit;
}

AteEstimate heckman_ate(const Dataset& observed, const HeckmanInputs& inputs) {
  if (observed.count_arm(0) < 3 || observed.count_arm(1) < 3) {
    throw EstimationError("heckman needs at least three units per arm");
  }
  AteEstimate est;
  est.method = Method::Heckman;
  est.n_used = observed.size();

  Eigen::MatrixXd design;
  std::vector<int> label;
  if (inputs.mode == HeckmanMode::PopulationCovariates) {
    if (!inputs.population) throw ConfigError("heckman population mode needs the population covariates");
    const Dataset& pop = *inputs.population;
    design.resize(static_cast<Eigen::Index>(pop.size()), 3);
    for (std::size_t i = 0; i < pop.size(); ++i) {
      design.row(static_cast<Eigen::Index>(i)) << 1.0, pop[i].x, static_cast<double>(pop[i].t);
      label.push_back(pop[i].selected ? 1 : 0);
    }
    est.diagnostics["proxy_selection"] = 0.0;
  } else {
    if (inputs.proxy_label.size() != observed.size()) throw ConfigError("one proxy label per observed unit");
    design.resize(static_cast<Eigen::Index>(observed.size()), 3);
    for (std::size_t i = 0; i < observed.size(); ++i) {
      design.row(static_cast<Eigen::Index>(i)) << 1.0, observed[i].x, static_cast<double>(observed[i].t);
      label.push_back(inputs.proxy_label[i] ? 1 : 0);
    }
    est.diagnostics["proxy_selection"] = 1.0;
  }

  const std::size_t positives = static_cast<std::size_t>(std::count(label.begin(), label.end(), 1));
  const bool degenerate = positives == 0 || positives == label.size();
  Eigen::VectorXd gamma;
  if (!degenerate) {
    ProbitFit probit = fit_probit(design, label);
    est.diagnostics["probit_ridge"] = 0.0;
    if (!probit.converged) {
      probit = fit_probit(design, label, 100, 1e-10, 1.0);
      est.diagnostics["probit_ridge"] = 1.0;
    }
    if (!probit.converged) throw EstimationError("probit did not converge in 100 Newton steps");
    gamma = probit.coef;
    est.diagnostics["probit_iterations"] = probit.iterations;
  }
  est.diagnostics["mills_dropped"] = degenerate ? 1.0 : 0.0;

  std::array<Eigen::VectorXd, 2> coef;
  bool collinear = false;
  for (int arm = 0; arm < 2; ++arm) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < observed.size(); ++i) {
      if (observed[i].t == arm) idx.push_back(i);
    }
    const Eigen::Index cols = degenerate ? 2 : 3;
    Eigen::MatrixXd x(static_cast<Eigen::Index>(idx.size()), cols);
    Eigen::VectorXd y(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t j = 0; j < idx.size(); ++j) {
      const Sample& s = observed[idx[j]];
      const auto r = static_cast<Eigen::Index>(j);
      x(r, 0) = 1.0;
      x(r, 1) = s.x;
      if (!degenerate) x(r, 2) = inverse_mills(gamma(0) + gamma(1) * s.x + gamma(2) * s.t);
      y(r) = s.y;
    }
    try {
      coef[arm] = ols(x, y);
    } catch (const EstimationError&) {
      if (cols == 2) throw;
      coef[arm] = ols(x.leftCols(2), y);
      collinear = true;
    }
  }
  est.diagnostics["mills_collinear"] = collinear ? 1.0 : 0.0;
  double acc = 0.0;
  for (const Sample& s : observed.samples()) {
    acc += (coef[1](0) - coef[0](0)) + (coef[1](1) - coef[0](1)) * s.x;
  }
  est.value = acc / static_cast<double>(observed.size());
  if (!degenerate) {
    if (coef[0].size() > 2) est.diagnostics["mills_coef_0"] = coef[0](2);
    if (coef[1].size() > 2) est.diagnostics["mills_coef_1"] = coef[1](2);
  }
  return est;
}

AteEstimate aipw_ate(const Dataset& data, const PropensityModel& prop, bool oracle) {
  std::array<Eigen::VectorXd, 2> coef;
  for (int arm = 0; arm < 2; ++arm) {
    std::vector<double> xs, ys;
    for (const Sample& s : data.samples()) {
      if (s.t == arm) {
        xs.push_back(s.x);
        ys.push_back(s.y);
      }
    }
    coef[arm] = polynomial_fit(xs, ys, 3);
  }
  const std::vector<double> e = prop.predict(data.xs());
  double acc = 0.0;
  std::size_t clipped = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Sample& s = data[i];
    double p = e[i];
    if (p < 0.01 || p > 0.99) {
      ++clipped;
      p = std::clamp(p, 0.01, 0.99);
    }
    const double m1 = polynomial_mu(coef[1], s.x);
    const double m0 = polynomial_mu(coef[0], s.x);
    acc += m1 - m0 + s.t * (s.y - m1) / p - (1 - s.t) * (s.y - m0) / (1.0 - p);
  }
  AteEstimate est;
  est.method = oracle ? Method::AIPW_Oracle : Method::AIPW;
  est.value = acc / static_cast<double>(data.size());
  est.n_used = data.size();
  est.diagnostics["clipped"] = static_cast<double>(clipped);
  return est;
}

std::array<Eigen::VectorXd, 2> fit_polynomial_arms(const Dataset& observed, const OverlapRegions& regions) {
  std::array<Eigen::VectorXd, 2> coef;
  for (int arm = 0; arm < 2; ++arm) {
    std::vector<double> xs, ys;
    for (std::size_t i : arm == 1 ? regions.s1_indices : regions.s0_indices) {
      if (observed[i].t != arm) continue;
      xs.push_back(observed[i].x);
      ys.push_back(observed[i].y);
    }
    coef[arm] = polynomial_fit(xs, ys, 3);
  }
  return coef;
}

double weighted_effect(const std::vector<double>& xs, const std::vector<double>& weights,
                       const std::function<std::vector<double>(const std::vector<double>&, int)>& mu) {
  if (xs.empty()) throw EstimationError("no units in the overlap region");
  if (weights.size() != xs.size()) throw ConfigError("one weight per unit required");
  const std::vector<double> m1 = mu(xs, 1);
  const std::vector<double> m0 = mu(xs, 0);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    num += weights[i] * (m1[i] - m0[i]);
    den += weights[i];
  }
  if (!(den > 0.0)) throw EstimationError("reweighting mass is zero");
  return num / den;
}

namespace {

[[noreturn]] void missing(Method m) {
  throw EstimationError("no fitted model for method " + std::string(method_name(m)));
}

}  // namespace

AteEstimate estimate_ate(Method method, const Dataset& observed, const OverlapRegions& regions,
                         const FittedModels& models) {
  AteEstimate est;
  est.method = method;
  const Dataset b = observed.subset(regions.b_indices);
  const std::vector<double> xs = b.xs();
  std::vector<double> unit(xs.size(), 1.0);

  auto gmm_mu = [](const MleFit& fit, std::size_t* fallbacks) {
    return [&fit, fallbacks](const std::vector<double>& q, int arm) {
      std::vector<double> out;
      out.reserve(q.size());
      for (double x : q) {
        bool fb = false;
        out.push_back(gmm_conditional_mean(fit.gmm[static_cast<std::size_t>(arm)], x, &fb));
        if (fb) ++*fallbacks;
      }
      return out;
    };
  };
  auto score_mu = [](const ScoreFit& fit, std::size_t* flagged) {
    return [&fit, flagged](const std::vector<double>& q, int arm) {
      std::vector<double> out;
      out.reserve(q.size());
      for (const GridMean& g : score_conditional_mean(fit.arms[static_cast<std::size_t>(arm)], q)) {
        out.push_back(g.value);
        if (g.flagged) ++*flagged;
      }
      return out;
    };
  };
  auto beta_weights = [&](const BetaModel& beta) {
    bool clamped = false;
    std::vector<double> w = beta.beta(b, &clamped);
    for (double& v : w) v = 1.0 / v;
    est.diagnostics["beta_clamped"] = clamped ? 1.0 : 0.0;
    return w;
  };

  switch (method) {
    case Method::IPW: {
      est.value = ipw_arm_mean(observed, regions, 1) - ipw_arm_mean(observed, regions, 0);
      std::size_t used = 0;
      for (std::size_t i : regions.s1_indices) used += observed[i].t == 1;
      for (std::size_t i : regions.s0_indices) used += observed[i].t == 0;
      est.n_used = used;
      return est;
    }
    case Method::Polynomial: {
      if (!models.poly) missing(method);
      const auto& coef = *models.poly;
      est.value = weighted_effect(xs, unit, [&](const std::vector<double>& q, int arm) {
        std::vector<double> out;
        for (double x : q) out.push_back(polynomial_mu(coef[static_cast<std::size_t>(arm)], x));
        return out;
      });
      break;
    }
    case Method::MLE:
    case Method::MLE_Beta: {
      const auto& fit = method == Method::MLE ? models.mle : models.mle_beta;
      if (!fit) missing(method);
      std::size_t fallbacks = 0;
      std::vector<double> w = unit;
      if (method == Method::MLE_Beta) {
        if (!fit->beta) missing(method);
        w = beta_weights(*fit->beta);
        est.diagnostics["beta_clamped_training"] = fit->beta_clamped ? 1.0 : 0.0;
      }
      est.value = weighted_effect(xs, w, gmm_mu(*fit, &fallbacks));
      est.diagnostics["conditional_fallbacks"] = static_cast<double>(fallbacks);
      break;
    }
    case Method::SM:
    case Method::SM_Beta: {
      const auto& fit = method == Method::SM ? models.sm : models.sm_beta;
      if (!fit) missing(method);
      std::size_t flagged = 0;
      std::vector<double> w = unit;
      if (method == Method::SM_Beta) {
        if (!fit->beta) missing(method);
        w = beta_weights(*fit->beta);
      }
      est.value = weighted_effect(xs, w, score_mu(*fit, &flagged));
      est.diagnostics["grid_flagged"] = static_cast<double>(flagged);
      if (!fit->loss_trace.empty()) est.diagnostics["final_loss"] = fit->loss_trace.back();
      est.diagnostics["lr_halvings"] = fit->lr_halvings;
      break;
    }
    case Method::Heckman:
    case Method::AIPW:
    case Method::AIPW_Oracle:
      throw ConfigError("method " + std::string(method_name(method)) + " has its own entry point");
  }
  est.n_used = b.size();
  return est;
}

}  // namespace selbias
