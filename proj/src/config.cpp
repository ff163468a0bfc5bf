#include "selbias/config.hpp"

#include "selbias/rng.hpp"
#include "selbias/stats.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace selbias {

using nlohmann::json;

namespace {

/// Reads fields of one JSON object and rejects keys nobody asked for.
class Reader {
public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + "expected an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(where() + "bad value for '" + key + "'");
    }
  }

  template <typename F>
  void get_with(const char* key, F&& parse) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      parse(j_.at(key));
    } catch (const json::exception&) {
      throw ConfigError(where() + "bad value for '" + key + "'");
    }
  }

  [[nodiscard]] bool has(const char* key) const { return j_.contains(key); }
  [[nodiscard]] std::string child(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError(where() + "unknown key '" + key + "'");
    }
  }

private:
  [[nodiscard]] std::string where() const { return path_.empty() ? "config: " : "config." + path_ + ": "; }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

std::string_view noise_mode_name(NoiseMode m) { return m == NoiseMode::Additive ? "additive" : "multiplicative"; }

NoiseMode parse_noise_mode(std::string_view s) {
  if (s == "additive") return NoiseMode::Additive;
  if (s == "multiplicative") return NoiseMode::Multiplicative;
  throw ConfigError("unknown noise mode '" + std::string(s) + "'");
}

std::string_view propensity_kind_name(PropensityKind k) { return k == PropensityKind::Mlp ? "mlp" : "logistic"; }

PropensityKind parse_propensity_kind(std::string_view s) {
  if (s == "mlp") return PropensityKind::Mlp;
  if (s == "logistic") return PropensityKind::Logistic;
  throw ConfigError("unknown propensity kind '" + std::string(s) + "'");
}

std::string_view heckman_mode_name(HeckmanMode m) {
  return m == HeckmanMode::ObservedProxy ? "proxy" : "population";
}

HeckmanMode parse_heckman_mode(std::string_view s) {
  if (s == "proxy") return HeckmanMode::ObservedProxy;
  if (s == "population") return HeckmanMode::PopulationCovariates;
  throw ConfigError("unknown heckman mode '" + std::string(s) + "'");
}

void read_noise(const json& j, const std::string& path, NoiseSpec& n) {
  Reader r(j, path);
  r.get_with("family", [&](const json& v) { n.family = parse_noise_family(v.get<std::string>()); });
  r.get("scale", n.scale);
  r.get_with("mode", [&](const json& v) { n.mode = parse_noise_mode(v.get<std::string>()); });
  r.get("pareto_shape", n.pareto_shape);
  r.finish();
}

void read_outcome(const json& j, const std::string& path, OutcomeSpec& o) {
  Reader r(j, path);
  r.get_with("form", [&](const json& v) { o.form = parse_outcome_form(v.get<std::string>()); });
  r.get("coef0", o.coef0);
  r.get("coef1", o.coef1);
  r.get_with("noise", [&](const json& v) { read_noise(v, r.child("noise"), o.noise); });
  r.finish();
}

void read_population(const json& j, PopulationConfig& p) {
  Reader r(j, "population");
  r.get("n", p.n);
  r.get("x_low", p.x_low);
  r.get("x_high", p.x_high);
  r.get("propensity_slope", p.propensity_slope);
  r.get("propensity_intercept", p.propensity_intercept);
  r.get_with("outcome", [&](const json& v) { read_outcome(v, r.child("outcome"), p.outcome); });
  r.finish();
}

void read_selection(const json& j, SelectionSpec& s) {
  Reader r(j, "selection");
  r.get("det_enabled", s.det_enabled);
  r.get("x_thresh", s.x_thresh);
  r.get("det_arm", s.det_arm);
  r.get("sig_enabled", s.sig_enabled);
  r.get_with("sig_form", [&](const json& v) { s.sig_form = parse_sigmoid_form(v.get<std::string>()); });
  r.get("alpha", s.alpha);
  r.get("gamma", s.gamma);
  r.get("beta_C", s.beta_C);
  r.get("beta_S", s.beta_S);
  r.finish();
}

void read_propensity(const json& j, PropensityConfig& p) {
  Reader r(j, "propensity");
  r.get_with("kind", [&](const json& v) { p.kind = parse_propensity_kind(v.get<std::string>()); });
  r.get("hidden", p.hidden);
  r.get("folds", p.folds);
  r.get("iterations", p.iterations);
  r.get("learning_rate", p.learning_rate);
  r.finish();
}

void read_mle(const json& j, MleConfig& m) {
  Reader r(j, "mle");
  r.get("k", m.k);
  r.get("lambda", m.lambda);
  r.get("rounds", m.rounds);
  r.get("beta_steps", m.beta_steps);
  r.get("batch", m.batch);
  r.get("beta_hidden", m.beta_hidden);
  r.get("learning_rate", m.learning_rate);
  r.get("quadrature_order", m.quadrature_order);
  r.get("em_tol", m.em_tol);
  r.get("em_max_iter", m.em_max_iter);
  r.finish();
}

void read_grid(const json& j, const std::string& path, GridSpec& g) {
  Reader r(j, path);
  r.get("y_min", g.y_min);
  r.get("y_max", g.y_max);
  r.get("m", g.m);
  r.finish();
}

void read_score(const json& j, ScoreConfig& s) {
  Reader r(j, "score");
  r.get("hidden", s.hidden);
  r.get("beta_hidden", s.beta_hidden);
  r.get("steps", s.steps);
  r.get("batch", s.batch);
  r.get("learning_rate", s.learning_rate);
  r.get("lambda1", s.lambda1);
  r.get("lambda2", s.lambda2);
  r.get("h", s.h);
  r.get("max_retries", s.max_retries);
  r.get_with("grid", [&](const json& v) { read_grid(v, r.child("grid"), s.grid); });
  r.finish();
}

}  // namespace

void ExperimentConfig::validate() const {
  population.validate();
  selection.validate();
  if (methods.empty()) throw ConfigError("config: at least one method is required");
  if (std::set<Method>(methods.begin(), methods.end()).size() != methods.size()) {
    throw ConfigError("config: duplicate method");
  }
  if (seeds.empty()) throw ConfigError("config: at least one seed is required");
  if (!(c > 0.0 && c < 0.5)) throw ConfigError("config: c must lie in (0, 1/2)");
  if (propensity.folds < 2) throw ConfigError("config.propensity: folds must be at least 2");
  if (propensity.iterations < 1) throw ConfigError("config.propensity: iterations must be positive");
  for (int h : propensity.hidden) {
    if (h < 1) throw ConfigError("config.propensity: hidden sizes must be positive");
  }
  if (mle.k < 1) throw ConfigError("config.mle: k must be positive");
  if (mle.lambda < 0.0) throw ConfigError("config.mle: lambda must be non-negative");
  if (mle.rounds < 1 || mle.batch < 1 || mle.beta_steps < 0) throw ConfigError("config.mle: bad schedule");
  if (mle.quadrature_order < 1) throw ConfigError("config.mle: quadrature_order must be positive");
  if (score.steps < 1 || score.batch < 1) throw ConfigError("config.score: bad schedule");
  if (!(score.h > 0.0)) throw ConfigError("config.score: h must be positive");
  if (!(score.grid.y_max > score.grid.y_min) || score.grid.m < 2) throw ConfigError("config.score.grid: bad grid");
  for (int h : score.hidden) {
    if (h < 1) throw ConfigError("config.score: hidden sizes must be positive");
  }
  if (oracle_draws < 1) throw ConfigError("config: oracle_draws must be positive");
  if (threads < 0) throw ConfigError("config: threads must be non-negative");
}

ExperimentConfig parse_config(const json& j) {
  ExperimentConfig cfg;
  Reader r(j, "");
  r.get_with("population", [&](const json& v) { read_population(v, cfg.population); });
  r.get_with("selection", [&](const json& v) { read_selection(v, cfg.selection); });
  r.get_with("methods", [&](const json& v) {
    cfg.methods.clear();
    for (const auto& m : v) cfg.methods.push_back(parse_method(m.get<std::string>()));
  });
  r.get("seeds", cfg.seeds);
  r.get("c", cfg.c);
  r.get_with("propensity", [&](const json& v) { read_propensity(v, cfg.propensity); });
  r.get_with("mle", [&](const json& v) { read_mle(v, cfg.mle); });
  r.get_with("score", [&](const json& v) { read_score(v, cfg.score); });
  r.get_with("heckman", [&](const json& v) { cfg.heckman = parse_heckman_mode(v.get<std::string>()); });
  r.get("oracle_draws", cfg.oracle_draws);
  r.get("threads", cfg.threads);
  r.get("timing", cfg.timing);
  r.finish();
  cfg.validate();
  return cfg;
}

ExperimentConfig parse_config_text(const std::string& text) {
  json j;
  try {
    j = text.find_first_not_of(" \t\r\n") == std::string::npos ? json::object() : json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(j);
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

json config_to_json(const ExperimentConfig& cfg) {
  const auto& p = cfg.population;
  const auto& n = p.outcome.noise;
  const auto& s = cfg.selection;
  json methods = json::array();
  for (Method m : cfg.methods) methods.push_back(std::string(method_name(m)));
  return json{
      {"population",
       {{"n", p.n},
        {"x_low", p.x_low},
        {"x_high", p.x_high},
        {"propensity_slope", p.propensity_slope},
        {"propensity_intercept", p.propensity_intercept},
        {"outcome",
         {{"form", std::string(outcome_form_name(p.outcome.form))},
          {"coef0", p.outcome.coef0},
          {"coef1", p.outcome.coef1},
          {"noise",
           {{"family", std::string(noise_family_name(n.family))},
            {"scale", n.scale},
            {"mode", std::string(noise_mode_name(n.mode))},
            {"pareto_shape", n.pareto_shape}}}}}}},
      {"selection",
       {{"det_enabled", s.det_enabled},
        {"x_thresh", s.x_thresh},
        {"det_arm", s.det_arm},
        {"sig_enabled", s.sig_enabled},
        {"sig_form", std::string(sigmoid_form_name(s.sig_form))},
        {"alpha", s.alpha},
        {"gamma", s.gamma},
        {"beta_C", s.beta_C},
        {"beta_S", s.beta_S}}},
      {"methods", methods},
      {"seeds", cfg.seeds},
      {"c", cfg.c},
      {"propensity",
       {{"kind", std::string(propensity_kind_name(cfg.propensity.kind))},
        {"hidden", cfg.propensity.hidden},
        {"folds", cfg.propensity.folds},
        {"iterations", cfg.propensity.iterations},
        {"learning_rate", cfg.propensity.learning_rate}}},
      {"mle",
       {{"k", cfg.mle.k},
        {"lambda", cfg.mle.lambda},
        {"rounds", cfg.mle.rounds},
        {"beta_steps", cfg.mle.beta_steps},
        {"batch", cfg.mle.batch},
        {"beta_hidden", cfg.mle.beta_hidden},
        {"learning_rate", cfg.mle.learning_rate},
        {"quadrature_order", cfg.mle.quadrature_order},
        {"em_tol", cfg.mle.em_tol},
        {"em_max_iter", cfg.mle.em_max_iter}}},
      {"score",
       {{"hidden", cfg.score.hidden},
        {"beta_hidden", cfg.score.beta_hidden},
        {"steps", cfg.score.steps},
        {"batch", cfg.score.batch},
        {"learning_rate", cfg.score.learning_rate},
        {"lambda1", cfg.score.lambda1},
        {"lambda2", cfg.score.lambda2},
        {"h", cfg.score.h},
        {"max_retries", cfg.score.max_retries},
        {"grid", {{"y_min", cfg.score.grid.y_min}, {"y_max", cfg.score.grid.y_max}, {"m", cfg.score.grid.m}}}}},
      {"heckman", std::string(heckman_mode_name(cfg.heckman))},
      {"oracle_draws", cfg.oracle_draws},
      {"threads", cfg.threads},
      {"timing", cfg.timing},
  };
}

std::string config_hash(const ExperimentConfig& cfg) {
  json j = config_to_json(cfg);
  // Execution knobs do not change results.
  j.erase("threads");
  j.erase("timing");
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(j.dump())));
  return buf;
}

namespace {

OutcomeFamily read_arm_family(const json& j, const std::string& path, double x) {
  Reader r(j, path);
  std::string family = "gaussian";
  std::vector<double> p1{0.0, 0.0};
  double p2 = 1.0;
  r.get("family", family);
  r.get("p1", p1);
  r.get("p2", p2);
  r.finish();
  if (p1.size() != 2) throw ConfigError(path + ": p1 must be [intercept, slope]");
  return OutcomeFamily{parse_family(family), p1[0] + p1[1] * x, p2};
}

ParamTuple read_tuple(const json& j, const std::string& path) {
  Reader r(j, path);
  ParamTuple t;
  r.get("x_grid", t.x_grid);
  r.get("px", t.px);

  double pi = 0.5, ps = 0.0;
  r.get_with("propensity", [&](const json& v) {
    Reader pr(v, r.child("propensity"));
    pr.get("intercept", pi);
    pr.get("slope", ps);
    pr.finish();
  });
  t.propensity = [pi, ps](double x) { return pi + ps * x; };

  if (!r.has("outcome")) throw ConfigError(path + ": missing 'outcome'");
  json arms;
  r.get("outcome", arms);
  if (!arms.is_array() || arms.size() != 2) throw ConfigError(path + ".outcome: expected two arms");
  read_arm_family(arms[0], r.child("outcome") + "[0]", 0.0);
  read_arm_family(arms[1], r.child("outcome") + "[1]", 0.0);
  const std::string opath = r.child("outcome");
  t.outcome = [arms, opath](int arm, double x) {
    return read_arm_family(arms[static_cast<std::size_t>(arm)], opath, x);
  };

  double floor = 0.0, a = 0.0, by = 0.0, bx = 0.0, bt = 0.0;
  r.get_with("selection", [&](const json& v) {
    Reader sr(v, r.child("selection"));
    sr.get("floor", floor);
    sr.get("a", a);
    sr.get("by", by);
    sr.get("bx", bx);
    sr.get("bt", bt);
    sr.finish();
  });
  if (!(floor >= 0.0 && floor <= 1.0)) throw ConfigError(path + ".selection: floor must lie in [0, 1]");
  t.selection = [=](double x, double y, int arm) {
    return floor + (1.0 - floor) * logistic(a + by * y + bx * x + bt * arm);
  };
  t.d = floor;
  r.get("c", t.c);
  r.get("d", t.d);
  r.finish();
  t.validate();
  return t;
}

OutcomeFamily read_family(const json& j, const std::string& path) {
  Reader r(j, path);
  std::string family = "gaussian";
  OutcomeFamily f;
  r.get("family", family);
  r.get("a", f.a);
  r.get("b", f.b);
  r.finish();
  f.kind = parse_family(family);
  f.validate();
  return f;
}

json witness_json(const std::optional<Witness>& w) {
  if (!w) return nullptr;
  return {{"x", w->x}, {"y", w->y}, {"t", w->t}, {"covariate_marginal", w->covariate_marginal}};
}

}  // namespace

IdcheckRequest parse_idcheck(const json& j) {
  IdcheckRequest req;
  Reader r(j, "");
  std::string mode = "condition";
  r.get("mode", mode);
  if (mode == "condition") {
    req.mode = IdcheckRequest::Mode::Condition;
    if (!r.has("p") || !r.has("q")) throw ConfigError("condition mode needs tuples 'p' and 'q'");
    r.get_with("p", [&](const json& v) { req.p = read_tuple(v, "p"); });
    r.get_with("q", [&](const json& v) { req.q = read_tuple(v, "q"); });
    r.get_with("options", [&](const json& v) {
      Reader o(v, "options");
      o.get("external_unbiased_x", req.options.external_unbiased_x);
      o.get("rel_tol", req.options.rel_tol);
      o.get("quad_tol", req.options.quad_tol);
      o.get("gap_tol", req.options.gap_tol);
      o.get("y_doublings", req.options.y_doublings);
      o.finish();
    });
  } else if (mode == "witness") {
    req.mode = IdcheckRequest::Mode::Witness;
    if (!r.has("p") || !r.has("q")) throw ConfigError("witness mode needs families 'p' and 'q'");
    r.get_with("p", [&](const json& v) { req.wp = read_family(v, "p"); });
    r.get_with("q", [&](const json& v) { req.wq = read_family(v, "q"); });
    r.get_with("bound", [&](const json& v) {
      Reader b(v, "bound");
      b.get("c", req.bound.c);
      b.get("d", req.bound.d);
      b.get("r", req.bound.r);
      b.get("h", req.bound.h);
      b.finish();
    });
    req.bound.validate();
  } else {
    throw ConfigError("unknown idcheck mode '" + mode + "'");
  }
  r.finish();
  return req;
}

json run_idcheck(const IdcheckRequest& req) {
  if (req.mode == IdcheckRequest::Mode::Witness) {
    const auto y = find_witness(req.wp, req.wq, req.bound);
    json out{{"mode", "witness"},
             {"lower", req.bound.lower()},
             {"upper", req.bound.upper()},
             {"witness_found", y.has_value()}};
    if (y) {
      out["y"] = *y;
      out["ratio"] = density_ratio(req.wp, req.wq, *y);
    } else {
      out["y"] = nullptr;
    }
    return out;
  }
  const ConditionReport rep = check_distinguishability(req.p, req.q, req.options);
  return {{"mode", "condition"},
          {"tau_p", rep.tau_p},
          {"tau_q", rep.tau_q},
          {"ate_gap", rep.ate_gap},
          {"ps_p", rep.ps_p},
          {"ps_q", rep.ps_q},
          {"witness", witness_json(rep.witness)},
          {"verdict", std::string(verdict_name(rep.verdict))},
          {"message", rep.message}};
}

}  // namespace selbias
