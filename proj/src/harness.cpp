#include "selbias/harness.hpp"

#include "selbias/estimators.hpp"
#include "selbias/propensity.hpp"
#include "selbias/rng.hpp"
#include "selbias/stats.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <thread>

namespace selbias {

std::size_t RunReport::failures() const {
  return static_cast<std::size_t>(
      std::count_if(rows.begin(), rows.end(), [](const RunRow& r) { return !r.message.empty(); }));
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view stage) {
  return RngStream(seed).split(stage).seed();
}

SeedData simulate_seed(const ExperimentConfig& cfg, std::uint64_t seed) {
  PopulationConfig pc = cfg.population;
  pc.seed = seed;
  Dataset pop = generate_population(pc);
  RngStream rng(derive_seed(seed, "selection"));
  SelectionResult sel = apply_selection(pop, cfg.selection, rng);
  std::vector<Sample> flagged = pop.samples();
  for (std::size_t i = 0; i < flagged.size(); ++i) flagged[i].selected = sel.kept_mask[i];
  return {Dataset(std::move(flagged), pop.seed(), pop.meta()), std::move(sel)};
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct SeedResult {
  SeedInfo info;
  std::vector<RunRow> rows;
};

SeedResult run_seed(const ExperimentConfig& cfg, std::uint64_t seed, double oracle) {
  SeedResult out;
  out.info.seed = seed;
  auto row_for = [&](Method m) {
    RunRow r;
    r.seed = seed;
    r.method = m;
    return r;
  };
  auto fail_all = [&](const std::string& why) {
    out.rows.clear();
    for (Method m : cfg.methods) {
      RunRow r = row_for(m);
      r.estimate = r.error = std::numeric_limits<double>::quiet_NaN();
      r.message = why;
      out.rows.push_back(r);
    }
  };

  const auto shared_start = Clock::now();
  SeedData data;
  PropensityModel prop;
  OverlapRegions regions;
  try {
    data = simulate_seed(cfg, seed);
    out.info.selection = data.selection.report;
    PropensityConfig pcfg = cfg.propensity;
    pcfg.seed = derive_seed(seed, "propensity");
    prop = fit_propensity(data.selection.observed, pcfg);
    regions = overlap_filter(data.selection.observed, prop, cfg.c);
    out.info.overlap = regions.b_indices.size();
  } catch (const std::exception& e) {
    fail_all(e.what());
    return out;
  }
  const double shared_sec = seconds_since(shared_start);
  const Dataset& observed = data.selection.observed;
  const Dataset b = observed.subset(regions.b_indices);

  FittedModels models;
  std::optional<PropensityModel> oracle_prop;
  for (Method m : cfg.methods) {
    RunRow r = row_for(m);
    const auto start = Clock::now();
    try {
      AteEstimate est;
      switch (m) {
        case Method::Polynomial:
          if (!models.poly) models.poly = fit_polynomial_arms(observed, regions);
          break;
        case Method::MLE:
        case Method::MLE_Beta: {
          MleConfig mc = cfg.mle;
          mc.seed = derive_seed(seed, m == Method::MLE ? "mle" : "mle_beta");
          (m == Method::MLE ? models.mle : models.mle_beta) = fit_mle(b, m == Method::MLE_Beta, mc);
          break;
        }
        case Method::SM:
        case Method::SM_Beta: {
          ScoreConfig sc = cfg.score;
          sc.seed = derive_seed(seed, m == Method::SM ? "sm" : "sm_beta");
          (m == Method::SM ? models.sm : models.sm_beta) = fit_score_model(b, m == Method::SM_Beta, sc);
          break;
        }
        default:
          break;
      }
      if (m == Method::Heckman) {
        HeckmanInputs in;
        in.mode = cfg.heckman;
        in.population = &data.population;
        std::vector<bool> label(observed.size(), false);
        for (std::size_t i : regions.b_indices) label[i] = true;
        in.proxy_label = std::move(label);
        est = heckman_ate(observed, in);
      } else if (m == Method::AIPW) {
        est = aipw_ate(observed, prop, false);
      } else if (m == Method::AIPW_Oracle) {
        if (!oracle_prop) {
          PropensityConfig pcfg = cfg.propensity;
          pcfg.seed = derive_seed(seed, "propensity_oracle");
          oracle_prop = fit_propensity(data.population, pcfg);
        }
        est = aipw_ate(data.population, *oracle_prop, true);
      } else {
        est = estimate_ate(m, observed, regions, models);
      }
      if (!std::isfinite(est.value)) throw EstimationError("non-finite estimate");
      r.estimate = est.value;
      r.error = est.value - oracle;
    } catch (const std::exception& e) {
      r.estimate = r.error = std::numeric_limits<double>::quiet_NaN();
      r.message = e.what();
      if (r.message.empty()) r.message = "estimator failed";
    }
    r.runtime_sec = cfg.timing ? seconds_since(start) + shared_sec : 0.0;
    out.rows.push_back(std::move(r));
  }
  return out;
}

}  // namespace

RunReport run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  RunReport report;
  report.config_hash = config_hash(cfg);
  report.oracle_ate = oracle_ate(cfg.population, cfg.oracle_draws);

  const std::size_t n = cfg.seeds.size();
  std::vector<SeedResult> results(n);
  std::size_t workers = cfg.threads > 0 ? static_cast<std::size_t>(cfg.threads)
                                        : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, n);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) results[i] = run_seed(cfg, cfg.seeds[i], report.oracle_ate);
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (auto& r : results) {
    report.seeds.push_back(r.info);
    for (auto& row : r.rows) report.rows.push_back(std::move(row));
  }
  return report;
}

std::vector<MethodSummary> summarize(const RunReport& report) {
  if (report.rows.empty()) throw ConfigError("cannot summarize an empty report");
  std::vector<MethodSummary> out;
  std::vector<std::vector<double>> errors;
  for (const RunRow& r : report.rows) {
    auto it = std::find_if(out.begin(), out.end(), [&](const MethodSummary& s) { return s.method == r.method; });
    if (it == out.end()) {
      out.push_back(MethodSummary{r.method});
      errors.emplace_back();
      it = out.end() - 1;
    }
    auto& errs = errors[static_cast<std::size_t>(it - out.begin())];
    if (std::isfinite(r.error)) {
      errs.push_back(r.error);
    } else {
      ++it->failures;
    }
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].n = errors[i].size();
    out[i].mean_error = errors[i].empty() ? std::numeric_limits<double>::quiet_NaN() : mean(errors[i]);
    out[i].std_error = std::sqrt(sample_variance(errors[i]));
    out[i].single_seed = errors[i].size() < 2;
  }
  return out;
}

std::vector<SweepPoint> run_sweep(const ExperimentConfig& base, const std::vector<double>& beta_c,
                                  const std::vector<double>& beta_s) {
  if (beta_c.empty() || beta_s.empty()) throw ConfigError("sweep grid must be nonempty");
  std::vector<SweepPoint> out;
  for (double bc : beta_c) {
    for (double bs : beta_s) {
      ExperimentConfig cfg = base;
      cfg.selection.sig_enabled = true;
      cfg.selection.sig_form = SigmoidForm::OutcomeCovariate;
      cfg.selection.beta_C = bc;
      cfg.selection.beta_S = bs;
      out.push_back({bc, bs, run_experiment(cfg)});
    }
  }
  return out;
}

}  // namespace selbias
