#include "fixtures.hpp"
#include "oracles.hpp"

#include "selbias/config.hpp"
#include "selbias/datagen.hpp"
#include "selbias/estimators.hpp"
#include "selbias/gmm.hpp"
#include "selbias/graph.hpp"
#include "selbias/harness.hpp"
#include "selbias/identifiability.hpp"
#include "selbias/report_io.hpp"
#include "selbias/score_model.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

using namespace selbias;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const Outcome& o) {
  std::printf("%s criterion %d (%s): %s\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str());
  std::fflush(stdout);
  if (!o.pass) ++failures;
}

void run(int id, const std::string& name, const std::function<Outcome()>& body) {
  try {
    report(id, name, body());
  } catch (const std::exception& e) {
    report(id, name, {false, std::string("exception: ") + e.what()});
  }
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::map<Method, double> mean_errors(const RunReport& r) {
  std::map<Method, double> out;
  for (const auto& s : summarize(r)) out[s.method] = s.n > 0 ? s.mean_error : std::nan("");
  return out;
}

double runtime_of(const RunReport& r, std::initializer_list<Method> methods) {
  double t = 0.0;
  for (const auto& row : r.rows) {
    for (Method m : methods) t += row.method == m ? row.runtime_sec : 0.0;
  }
  return t;
}

ExperimentConfig sweep_point(double c, double s) {
  ExperimentConfig cfg;
  cfg.selection.sig_form = SigmoidForm::OutcomeCovariate;
  cfg.selection.beta_C = c;
  cfg.selection.beta_S = s;
  return cfg;
}

Outcome oracle_criterion() {
  const auto t0 = Clock::now();
  PopulationConfig pc;
  const double ate = oracle_ate(pc, 1000000);
  PopulationConfig semi;
  semi.outcome.form = OutcomeForm::SemiSyntheticLinear;
  const double semi_ate = oracle_ate(semi, 1000000);
  const double dt = seconds_since(t0);
  const bool ok = std::abs(ate - 2.0) <= 0.02 && std::abs(semi_ate) <= 0.02 && dt < 5.0;
  return {ok, fmt("oracle %.5f (target 2.00 +- 0.02), semi-synthetic %.5f (target 0 +- 0.02), %.2f s (< 5 s)", ate,
                  semi_ate, dt)};
}

Outcome selection_rate_criterion() {
  const auto t0 = Clock::now();
  const ExperimentConfig cfg;
  double kept = 0.0;
  std::string per_seed;
  for (std::uint64_t seed : cfg.seeds) {
    const SeedData d = simulate_seed(cfg, seed);
    kept += static_cast<double>(d.selection.report.kept);
    per_seed += (per_seed.empty() ? "" : " ") + std::to_string(d.selection.report.kept);
  }
  kept /= static_cast<double>(cfg.seeds.size());
  const double dt = seconds_since(t0) / static_cast<double>(cfg.seeds.size());
  const bool ok = std::abs(kept - 3000.0) <= 200.0 && dt < 5.0;
  return {ok, fmt("mean retained %.1f of 5000 (target 3000 +- 200; seeds %s), %.2f s per pipeline (< 5 s)", kept,
                  per_seed.c_str(), dt)};
}

Outcome baseline_criterion(const RunReport& r) {
  auto e = mean_errors(r);
  const double ipw = e[Method::IPW], aipw = e[Method::AIPW], oracle = e[Method::AIPW_Oracle];
  const double dt = runtime_of(r, {Method::IPW, Method::AIPW, Method::AIPW_Oracle});
  const bool ok = ipw >= 3.0 && ipw <= 5.0 && aipw >= 3.0 && aipw <= 4.6 && std::abs(oracle) < 0.3 && dt < 120.0;
  return {ok, fmt("IPW %+.4f (target [3.0, 5.0]), AIPW %+.4f (target [3.0, 4.6]), AIPW-oracle %+.4f (target |.| < 0.3), "
                  "%.1f s (< 120 s)",
                  ipw, aipw, oracle, dt)};
}

Outcome corrected_criterion(const RunReport& r, double total_seconds) {
  auto e = mean_errors(r);
  const double mle = e[Method::MLE], mle_b = e[Method::MLE_Beta], sm_b = e[Method::SM_Beta];
  const bool ok = std::abs(mle) <= 0.6 && std::abs(mle_b) <= 0.8 && std::abs(sm_b) <= 1.0 && total_seconds < 900.0;
  return {ok, fmt("MLE %+.4f (|.| <= 0.6), MLE+beta %+.4f (|.| <= 0.8), SM+beta %+.4f (|.| <= 1.0), all methods x 5 seeds "
                  "%.1f s (< 900 s)",
                  mle, mle_b, sm_b, total_seconds)};
}

Outcome ordering_criterion() {
  std::string detail;
  bool ok = true;
  const std::pair<const char*, ExperimentConfig> points[] = {{"default", ExperimentConfig{}},
                                                             {"C3/S1", sweep_point(3.0, 1.0)}};
  for (auto [label, cfg] : points) {
    cfg.methods = {Method::IPW, Method::MLE_Beta, Method::SM_Beta};
    auto e = mean_errors(run_experiment(cfg));
    const double ipw = std::abs(e[Method::IPW]), mle = std::abs(e[Method::MLE_Beta]), sm = std::abs(e[Method::SM_Beta]);
    ok = ok && mle < ipw && sm < ipw;
    detail += fmt("%s%s: |IPW| %.4f, |MLE+beta| %.4f, |SM+beta| %.4f", detail.empty() ? "" : "; ", label, ipw, mle, sm);
  }
  return {ok, detail};
}

Outcome gmm_criterion() {
  const auto t0 = Clock::now();
  RngStream r(6001);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const GmmParams g = fixtures::random_mixture(r);
    for (int i = 0; i < 20; ++i) {
      const double x = r.uniform(-3, 3);
      const double num = oracle::simpson([&](double y) { return y * fixtures::joint_density(g, x, y); }, -25, 25, 20000);
      const double den = oracle::simpson([&](double y) { return fixtures::joint_density(g, x, y); }, -25, 25, 20000);
      worst = std::max(worst, std::abs(gmm_conditional_mean(g, x) - num / den));
    }
  }
  const double dt = seconds_since(t0);
  return {worst < 1e-6 && dt < 10.0, fmt("max |error| %.3g over 50 mixtures x 20 points (< 1e-6), %.2f s (< 10 s)", worst, dt)};
}

Outcome score_criterion() {
  const auto t0 = Clock::now();
  RngStream rng(7001);
  std::vector<Sample> v;
  for (int i = 0; i < 3000; ++i) {
    Sample s;
    s.x = rng.uniform(-2.0, 2.0);
    s.t = i % 2;
    s.y0 = s.y1 = 1.0 + s.x + 0.5 * rng.normal();
    s.y = s.y0;
    v.push_back(s);
  }
  ScoreConfig cfg;
  cfg.seed = 11;
  const ScoreFit fit = fit_score_model(Dataset(v, 7001), false, cfg);
  double err = 0.0;
  int n = 0;
  for (double x = -1.5; x <= 1.5 + 1e-9; x += 0.25) {
    for (int arm = 0; arm < 2; ++arm) {
      err += std::abs(score_conditional_mean(fit.arms[static_cast<std::size_t>(arm)], x).value - (1.0 + x));
      ++n;
    }
  }
  err /= n;
  const double dt = seconds_since(t0);
  return {err < 0.15 && dt < 180.0,
          fmt("mean |E[y|x] - (1 + x)| %.4f over the x-grid (< 0.15), %.1f s (< 180 s)", err, dt)};
}

Outcome gradient_criterion() {
  const auto t0 = Clock::now();
  const double worst = fixtures::worst_gradient_error(2025, 20);
  const double dt = seconds_since(t0);
  return {worst < 1e-4 && dt < 10.0, fmt("max relative error %.3g over 20 nets/losses (< 1e-4), %.2f s (< 10 s)", worst, dt)};
}

Outcome em_criterion() {
  std::size_t fits = 0, violations = 0;
  double worst_drop = 0.0;
  auto check = [&](const std::vector<double>& trace) {
    ++fits;
    bool bad = false;
    for (std::size_t i = 1; i < trace.size(); ++i) {
      const double drop = trace[i - 1] - trace[i];
      worst_drop = std::max(worst_drop, drop);
      bad = bad || drop > 1e-9;
    }
    violations += bad;
  };
  RngStream r(8001);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 200 + static_cast<std::size_t>(r.uniform() * 300);
    Eigen::MatrixX2d pts(static_cast<Eigen::Index>(n), 2);
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double x = r.uniform(-3, 3);
      pts(static_cast<Eigen::Index>(i), 0) = x;
      pts(static_cast<Eigen::Index>(i), 1) = 1 + 0.5 * x - 0.2 * x * x * x + 0.5 * r.normal();
      w[i] = 0.2 + 3 * r.uniform();
    }
    EmOptions opts;
    opts.seed = static_cast<std::uint64_t>(trial);
    check(gmm_weighted_em(pts, w, 5, opts).loglik_trace);
  }
  const ExperimentConfig cfg;
  const SeedData d = simulate_seed(cfg, 0);
  PropensityConfig pcfg = cfg.propensity;
  pcfg.seed = derive_seed(0, "propensity");
  const PropensityModel prop = fit_propensity(d.selection.observed, pcfg);
  const OverlapRegions regions = overlap_filter(d.selection.observed, prop, cfg.c);
  const Dataset b = d.selection.observed.subset(regions.b_indices);
  MleConfig mc = cfg.mle;
  mc.seed = derive_seed(0, "mle_beta");
  for (const auto& trace : fit_mle(b, true, mc).em_traces) check(trace);
  return {violations == 0,
          fmt("%zu of %zu EM fits violate monotonicity, largest drop %.3g (slack 1e-9)", violations, fits, worst_drop)};
}

Outcome witness_criterion() {
  const auto t0 = Clock::now();
  const RatioBound bound{0.1, 0.1, 1.0, 1.0};
  const std::pair<OutcomeFamily, OutcomeFamily> distinct[] = {
      {OutcomeFamily::gaussian(0, 1), OutcomeFamily::gaussian(1, 1)},
      {OutcomeFamily::laplace(0, 1), OutcomeFamily::laplace(0, 2)},
      {OutcomeFamily::pareto(1, 2), OutcomeFamily::pareto(1, 3)},
      {OutcomeFamily::lognormal(0, 1), OutcomeFamily::lognormal(1, 1)},
  };
  std::string detail;
  bool ok = true;
  for (const auto& [p, q] : distinct) {
    const auto y = find_witness(p, q, bound);
    const auto none = find_witness(p, p, bound);
    ok = ok && y.has_value() && !none.has_value();
    detail += fmt("%s%s: witness %s, identical %s", detail.empty() ? "" : "; ", std::string(family_name(p.kind)).c_str(),
                  y ? fmt("y=%g", *y).c_str() : "none", none ? "found" : "none");
  }
  const double dt = seconds_since(t0);
  ok = ok && dt < 5.0;
  return {ok, detail + fmt("; %.3f s (< 5 s)", dt)};
}

Outcome poly_criterion() {
  RngStream r(9001);
  std::vector<std::pair<double, double>> region;
  for (double x : {-2.0, -1.0, 0.0, 0.5, 1.5, 3.0}) {
    for (double y = -2.0; y <= 2.0 + 1e-9; y += 0.25) region.emplace_back(x, y);
  }
  int wrong = 0;
  for (int trial = 0; trial < 200; ++trial) {
    PolyExponent fp{Eigen::MatrixXd::Zero(4, 4)};
    for (Eigen::Index i = 0; i < 4; ++i) {
      for (Eigen::Index j = 0; j < 4; ++j) fp.coef(i, j) = r.normal();
    }
    PolyExponent fq = fp;
    const bool constant = trial < 100;
    for (Eigen::Index i = 0; i < 4; ++i) fq.coef(i, 0) += r.normal();
    if (!constant) {
      const auto i = static_cast<Eigen::Index>(r.uniform() * 4);
      const auto j = 1 + static_cast<Eigen::Index>(r.uniform() * 3);
      const double size = 0.05 + r.uniform();
      fq.coef(i, j) += r.uniform() < 0.5 ? -size : size;
    }
    const PolyVerdict v = poly_exponent_equal_on_region(fp, fq, region, 1e-9);
    wrong += v.constant_difference != constant;
  }
  return {wrong == 0, fmt("%d misclassified of 100 constant-difference and 100 y-dependent pairs (tolerance 1e-9)", wrong)};
}

Dag selection_template(const std::vector<std::string>& parents) {
  std::string text =
      "role X = covariate\nrole T = treatment\nrole Y = outcome\nrole S = selection\nX -> T\nX -> Y\nT -> Y\n";
  for (const auto& p : parents) text += p + " -> S\n";
  return parse_dag(text);
}

Outcome graph_criterion() {
  const auto t0 = Clock::now();
  struct Row {
    std::vector<std::string> parents;
    DagVerdict dag;
    bool s_id;
  };
  const Row rows[] = {{{"Y"}, DagVerdict::No, false},
                      {{"T"}, DagVerdict::Yes, false},
                      {{"X"}, DagVerdict::YesWithExternal, true},
                      {{"X", "Y"}, DagVerdict::No, false},
                      {{"T", "Y"}, DagVerdict::No, false},
                      {{"T", "X"}, DagVerdict::YesWithExternal, false}};
  int row_mismatch = 0;
  std::string got;
  for (const auto& row : rows) {
    const TemplateClassification c = classify_selection_template(selection_template(row.parents));
    row_mismatch += (c.dag_framework != row.dag) + (c.s_id != row.s_id);
    std::string parents;
    for (const auto& p : row.parents) parents += p;
    got += fmt("%s%s->S=%s/%s", got.empty() ? "" : " ", parents.c_str(), std::string(dag_verdict_name(c.dag_framework)).c_str(),
               c.s_id ? "yes" : "no");
  }

  const std::vector<std::string> names{"A", "B", "C", "D", "E"};
  std::vector<std::pair<int, int>> slots;
  for (int i = 0; i < 5; ++i) {
    for (int j = i + 1; j < 5; ++j) slots.emplace_back(i, j);
  }
  std::size_t queries = 0, disagreements = 0;
  for (unsigned mask = 0; mask < (1u << slots.size()); ++mask) {
    Dag g;
    for (const auto& n : names) g.add_node(n);
    for (std::size_t k = 0; k < slots.size(); ++k) {
      if (mask >> k & 1u) g.add_edge(names[slots[k].first], names[slots[k].second]);
    }
    for (int a = 0; a < 5; ++a) {
      for (int b = a + 1; b < 5; ++b) {
        std::vector<std::string> rest;
        for (int k = 0; k < 5; ++k) {
          if (k != a && k != b) rest.push_back(names[k]);
        }
        for (unsigned zm = 0; zm < 8; ++zm) {
          Dag::NodeSet z;
          for (int k = 0; k < 3; ++k) {
            if (zm >> k & 1u) z.insert(rest[k]);
          }
          ++queries;
          disagreements += d_separated(g, {names[a]}, {names[b]}, z) != oracle::d_separated_by_paths(g, names[a], names[b], z);
        }
      }
    }
  }
  const double dt = seconds_since(t0);
  const bool ok = row_mismatch == 0 && disagreements == 0 && dt < 30.0;
  return {ok, fmt("%d template mismatches [%s]; %zu of %zu d-separation queries disagree with path enumeration; %.2f s (< 30 s)",
                  row_mismatch, got.c_str(), disagreements, queries, dt)};
}

Outcome determinism_criterion() {
  ExperimentConfig cfg;
  cfg.population.n = 2000;
  cfg.seeds = {0, 1};
  cfg.methods = {Method::IPW, Method::Polynomial, Method::MLE, Method::Heckman};
  cfg.threads = 2;
  const std::string a = report_csv(run_experiment(cfg));
  cfg.threads = 1;
  const std::string b = report_csv(run_experiment(cfg));
  return {a == b, fmt("two runs produced %zu and %zu bytes, %s", a.size(), b.size(), a == b ? "identical" : "different")};
}

}  // namespace

int main() {
  run(1, "oracle ATE", oracle_criterion);
  run(2, "selection rate", selection_rate_criterion);

  std::optional<RunReport> sweep;
  double sweep_seconds = 0.0;
  try {
    ExperimentConfig cfg = sweep_point(1.0, 0.1);
    cfg.timing = true;
    const auto t0 = Clock::now();
    sweep = run_experiment(cfg);
    sweep_seconds = seconds_since(t0);
  } catch (const std::exception& e) {
    std::printf("sweep run failed: %s\n", e.what());
  }
  run(3, "baseline bias at C1/S0.1", [&] {
    if (!sweep) return Outcome{false, "sweep run unavailable"};
    return baseline_criterion(*sweep);
  });
  run(4, "corrected estimators at C1/S0.1", [&] {
    if (!sweep) return Outcome{false, "sweep run unavailable"};
    return corrected_criterion(*sweep, sweep_seconds);
  });
  run(5, "qualitative ordering", ordering_criterion);
  run(6, "GMM conditional mean", gmm_criterion);
  run(7, "score model sanity", score_criterion);
  run(8, "gradient checks", gradient_criterion);
  run(9, "EM monotonicity", em_criterion);
  run(10, "identifiability witnesses", witness_criterion);
  run(11, "polynomial exponent logic", poly_criterion);
  run(12, "graphical criteria", graph_criterion);
  run(13, "determinism", determinism_criterion);
  std::printf("%d of 13 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
