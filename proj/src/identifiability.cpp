#include "selbias/identifiability.hpp"

#include "selbias/core.hpp"
#include "selbias/regression.hpp"
#include "selbias/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

namespace selbias {

namespace {

constexpr double kLogSqrt2Pi = 0.91893853320467274178;
constexpr double kInf = std::numeric_limits<double>::infinity();

double normal_upper_quantile(double tail) {
  double lo = 0.0, hi = 40.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (normal_cdf(-mid) > tail ? lo : hi) = mid;
  }
  return hi;
}

}  // namespace

void OutcomeFamily::validate() const {
  if (!std::isfinite(a) || !std::isfinite(b)) throw ConfigError("family parameters must be finite");
  if (!(b > 0.0)) throw ConfigError("family scale or shape must be positive");
  if (kind == FamilyKind::Pareto && !(a > 0.0)) throw ConfigError("pareto y_m must be positive");
}

bool OutcomeFamily::in_support(double y) const {
  switch (kind) {
    case FamilyKind::Pareto:
      return y >= a;
    case FamilyKind::LogNormal:
      return y > 0.0;
    default:
      return std::isfinite(y);
  }
}

double OutcomeFamily::log_pdf(double y) const {
  if (!in_support(y)) return -kInf;
  switch (kind) {
    case FamilyKind::Gaussian: {
      const double z = (y - a) / b;
      return -0.5 * z * z - kLogSqrt2Pi - std::log(b);
    }
    case FamilyKind::Laplace:
      return -std::abs(y - a) / b - std::log(2.0 * b);
    case FamilyKind::Pareto:
      return std::log(b) + b * std::log(a) - (b + 1.0) * std::log(y);
    case FamilyKind::LogNormal: {
      const double z = (std::log(y) - a) / b;
      return -0.5 * z * z - kLogSqrt2Pi - std::log(b) - std::log(y);
    }
  }
  return -kInf;
}

double OutcomeFamily::pdf(double y) const { return std::exp(log_pdf(y)); }

double OutcomeFamily::mean() const {
  switch (kind) {
    case FamilyKind::Gaussian:
    case FamilyKind::Laplace:
      return a;
    case FamilyKind::Pareto:
      return b > 1.0 ? b * a / (b - 1.0) : kInf;
    case FamilyKind::LogNormal:
      return std::exp(a + 0.5 * b * b);
  }
  return 0.0;
}

std::pair<double, double> OutcomeFamily::bulk(double tail) const {
  switch (kind) {
    case FamilyKind::Gaussian: {
      const double z = normal_upper_quantile(0.5 * tail);
      return {a - z * b, a + z * b};
    }
    case FamilyKind::Laplace: {
      const double u = b * std::log(1.0 / tail);
      return {a - u, a + u};
    }
    case FamilyKind::Pareto:
      return {a, a * std::pow(tail, -1.0 / b)};
    case FamilyKind::LogNormal: {
      const double z = normal_upper_quantile(0.5 * tail);
      return {std::exp(a - z * b), std::exp(a + z * b)};
    }
  }
  return {0.0, 0.0};
}

namespace {

constexpr std::pair<FamilyKind, std::string_view> kFamilyNames[] = {
    {FamilyKind::Gaussian, "gaussian"},
    {FamilyKind::Laplace, "laplace"},
    {FamilyKind::Pareto, "pareto"},
    {FamilyKind::LogNormal, "lognormal"},
};

}  // namespace

std::string_view family_name(FamilyKind k) {
  for (const auto& [e, n] : kFamilyNames) {
    if (e == k) return n;
  }
  return "unknown";
}

FamilyKind parse_family(std::string_view name) {
  for (const auto& [e, n] : kFamilyNames) {
    if (n == name) return e;
  }
  throw ConfigError("unknown outcome family '" + std::string(name) + "'");
}

double density_ratio(const OutcomeFamily& p, const OutcomeFamily& q, double y) {
  if (p.kind != q.kind) throw ConfigError("density ratio needs two families of the same kind");
  p.validate();
  q.validate();
  if (!p.in_support(y) || !q.in_support(y)) {
    std::ostringstream msg;
    msg << "y=" << y << " lies outside the " << family_name(p.kind) << " support";
    throw ConfigError(msg.str());
  }
  double log_r = 0.0;
  switch (p.kind) {
    case FamilyKind::Gaussian: {
      if (p.b == q.b) {
        log_r = (2.0 * (p.a - q.a) * y + q.a * q.a - p.a * p.a) / (2.0 * p.b * p.b);
      } else {
        const double zp = (y - p.a) / p.b, zq = (y - q.a) / q.b;
        log_r = std::log(q.b / p.b) - 0.5 * zp * zp + 0.5 * zq * zq;
      }
      break;
    }
    case FamilyKind::Laplace:
      log_r = std::log(q.b / p.b) - std::abs(y - p.a) / p.b + std::abs(y - q.a) / q.b;
      break;
    case FamilyKind::Pareto:
      // C * y^(alpha_Q - alpha_P)
      log_r = std::log(p.b / q.b) + p.b * std::log(p.a) - q.b * std::log(q.a) + (q.b - p.b) * std::log(y);
      break;
    case FamilyKind::LogNormal: {
      const double ly = std::log(y);
      if (p.b == q.b) {
        // C'' * y^k with k = (mu_P - mu_Q) / sigma^2
        const double s2 = p.b * p.b;
        log_r = (q.a * q.a - p.a * p.a) / (2.0 * s2) + (p.a - q.a) / s2 * ly;
      } else {
        const double zp = (ly - p.a) / p.b, zq = (ly - q.a) / q.b;
        log_r = std::log(q.b / p.b) - 0.5 * zp * zp + 0.5 * zq * zq;
      }
      break;
    }
  }
  return std::exp(log_r);
}

void RatioBound::validate() const {
  if (!(c > 0.0 && c < 0.5)) throw ConfigError("overlap constant c must lie in (0, 1/2)");
  if (!(d > 0.0 && d <= 1.0)) throw ConfigError("selection floor d must lie in (0, 1]");
  if (!(r > 0.0) || !(h > 0.0)) throw ConfigError("r and h must be positive");
}

std::optional<double> find_witness(const OutcomeFamily& p, const OutcomeFamily& q, const RatioBound& bound,
                                   double y_range, int steps) {
  bound.validate();
  if (p.kind != q.kind) throw ConfigError("witness search needs two families of the same kind");
  std::vector<double> grid{0.0};
  for (int k = -20; std::ldexp(1.0, k) <= y_range; ++k) {
    grid.push_back(std::ldexp(1.0, k));
    grid.push_back(-std::ldexp(1.0, k));
  }
  for (int i = 0; i < steps && steps > 1; ++i) grid.push_back(-y_range + 2.0 * y_range * i / (steps - 1));
  std::stable_sort(grid.begin(), grid.end(), [](double u, double v) {
    return std::abs(u) != std::abs(v) ? std::abs(u) < std::abs(v) : u > v;
  });
  const double lo = bound.lower(), hi = bound.upper();
  for (double y : grid) {
    const bool sp = p.in_support(y), sq = q.in_support(y);
    if (!sp && !sq) continue;
    if (sp != sq) return y;
    const double r = density_ratio(p, q, y);
    if (r < lo || r > hi) return y;
  }
  return std::nullopt;
}

double PolyExponent::eval(double x, double y) const {
  double acc = 0.0, xi = 1.0;
  for (Eigen::Index i = 0; i < coef.rows(); ++i) {
    double yj = 1.0;
    for (Eigen::Index j = 0; j < coef.cols(); ++j) {
      acc += coef(i, j) * xi * yj;
      yj *= y;
    }
    xi *= x;
  }
  return acc;
}

int PolyExponent::y_degree() const {
  for (Eigen::Index j = coef.cols(); j-- > 0;) {
    if (coef.col(j).cwiseAbs().maxCoeff() != 0.0) return static_cast<int>(j);
  }
  return 0;
}

bool PolyExponent::normalizable_at(double x) const {
  for (Eigen::Index j = coef.cols(); j-- > 1;) {
    double a = 0.0, xi = 1.0;
    for (Eigen::Index i = 0; i < coef.rows(); ++i) {
      a += coef(i, j) * xi;
      xi *= x;
    }
    if (a != 0.0) return j % 2 == 0 && a < 0.0;
  }
  return false;
}

PolyVerdict poly_exponent_equal_on_region(const PolyExponent& fp, const PolyExponent& fq,
                                          const std::vector<std::pair<double, double>>& region, double tol) {
  const int degree = std::max(fp.y_degree(), fq.y_degree());
  std::map<double, std::set<double>> by_x;
  for (const auto& [x, y] : region) by_x[x].insert(y);
  PolyVerdict out;
  out.constant_difference = true;
  for (const auto& [x, ys] : by_x) {
    if (static_cast<int>(ys.size()) < degree + 2) {
      std::ostringstream msg;
      msg << "x=" << x << " has " << ys.size() << " distinct y values, need " << degree + 2;
      throw ConfigError(msg.str());
    }
    const auto n = static_cast<Eigen::Index>(ys.size());
    Eigen::MatrixXd v(n, degree + 1);
    Eigen::VectorXd diff(n);
    Eigen::Index r = 0;
    for (double y : ys) {
      double p = 1.0;
      for (int j = 0; j <= degree; ++j) {
        v(r, j) = p;
        p *= y;
      }
      diff(r) = fq.eval(x, y) - fp.eval(x, y);
      ++r;
    }
    const Eigen::VectorXd c = ols(v, diff);
    const double slope = degree > 0 ? c.tail(degree).cwiseAbs().maxCoeff() : 0.0;
    out.max_y_coef = std::max(out.max_y_coef, slope);
    if (slope > tol) out.constant_difference = false;
    out.c_x[x] = c(0);
  }
  if (!out.constant_difference) out.c_x.clear();
  return out;
}

void ParamTuple::validate() const {
  if (x_grid.empty()) throw ConfigError("tuple needs a nonempty covariate grid");
  if (!propensity || !outcome || !selection) throw ConfigError("tuple is missing a mechanism");
  if (!px.empty()) {
    if (px.size() != x_grid.size()) throw ConfigError("one covariate mass per grid point");
    double s = 0.0;
    for (double m : px) {
      if (!(m >= 0.0)) throw ConfigError("covariate masses must be non-negative");
      s += m;
    }
    if (std::abs(s - 1.0) > 1e-9) throw ConfigError("covariate masses must sum to 1");
  }
  if (!(c >= 0.0 && c < 0.5)) throw ConfigError("declared overlap c must lie in [0, 1/2)");
  if (!(d >= 0.0 && d <= 1.0)) throw ConfigError("declared selection floor must lie in [0, 1]");
  for (double x : x_grid) {
    const double e = propensity(x);
    if (!(e > c && e < 1.0 - c)) {
      std::ostringstream msg;
      msg << "propensity " << e << " at x=" << x << " violates the declared overlap " << c;
      throw ConfigError(msg.str());
    }
    for (int t = 0; t < 2; ++t) {
      const OutcomeFamily f = outcome(t, x);
      f.validate();
      const auto [lo, hi] = f.bulk(1e-6);
      for (int k = 0; k <= 16; ++k) {
        const double y = lo + (hi - lo) * k / 16.0;
        const double s = selection(x, y, t);
        if (!(s >= 0.0 && s <= 1.0)) throw ConfigError("selection probability outside [0, 1]");
        if (s < d) {
          std::ostringstream msg;
          msg << "selection " << s << " at (x=" << x << ", y=" << y << ", t=" << t
              << ") is below the declared floor " << d;
          throw ConfigError(msg.str());
        }
      }
    }
  }
}

double ParamTuple::x_mass(std::size_t i) const {
  return px.empty() ? 1.0 / static_cast<double>(x_grid.size()) : px[i];
}

std::string_view verdict_name(Verdict v) {
  switch (v) {
    case Verdict::EqualEffects:
      return "equal_effects";
    case Verdict::Distinguishable:
      return "distinguishable";
    case Verdict::Indistinguishable:
      return "indistinguishable";
  }
  return "unknown";
}

double family_expectation(const OutcomeFamily& f, const std::function<double(double)>& g, double tol) {
  f.validate();
  const auto [lo, hi] = f.bulk(1e-10);
  auto fail = [&](const QuadratureResult& q) {
    std::ostringstream msg;
    msg << "quadrature did not converge for " << family_name(f.kind) << "(" << f.a << ", " << f.b
        << "): estimate " << q.value << ", error " << q.error_estimate << ", " << q.evaluations << " evaluations";
    throw EstimationError(msg.str());
  };
  double total = 0.0;
  if (f.kind == FamilyKind::Gaussian || f.kind == FamilyKind::Laplace) {
    for (auto [u, v] : {std::pair{lo, f.a}, std::pair{f.a, hi}}) {
      const QuadratureResult q = adaptive_simpson([&](double y) { return g(y) * f.pdf(y); }, u, v, 0.5 * tol);
      if (!q.converged) fail(q);
      total += q.value;
    }
    return total;
  }
  // Heavy right tails: integrate over u = log y.
  const QuadratureResult q = adaptive_simpson(
      [&](double u) {
        const double y = std::exp(u);
        return f.in_support(y) ? g(y) * f.pdf(y) * y : 0.0;
      },
      std::log(lo), std::log(hi), tol);
  if (!q.converged) fail(q);
  return q.value;
}

namespace {

struct TupleSummary {
  double tau = 0.0;
  double ps = 0.0;
};

TupleSummary summarize_tuple(const ParamTuple& t, double tol) {
  TupleSummary s;
  const auto identity = [](double y) { return y; };
  for (std::size_t i = 0; i < t.x_grid.size(); ++i) {
    const double x = t.x_grid[i];
    const double m = t.x_mass(i);
    const double e = t.propensity(x);
    const OutcomeFamily f0 = t.outcome(0, x), f1 = t.outcome(1, x);
    s.tau += m * (family_expectation(f1, identity, tol) - family_expectation(f0, identity, tol));
    s.ps += m * e * family_expectation(f1, [&](double y) { return t.selection(x, y, 1); }, tol);
    s.ps += m * (1.0 - e) * family_expectation(f0, [&](double y) { return t.selection(x, y, 0); }, tol);
  }
  return s;
}

double lookup_mass(const ParamTuple& t, double x) {
  for (std::size_t i = 0; i < t.x_grid.size(); ++i) {
    if (t.x_grid[i] == x) return t.x_mass(i);
  }
  return 0.0;
}

double observed_density(const ParamTuple& t, double ps, double x, double y, int arm) {
  const double m = lookup_mass(t, x);
  if (m == 0.0) return 0.0;
  const OutcomeFamily f = t.outcome(arm, x);
  if (!f.in_support(y)) return 0.0;
  const double e = t.propensity(x);
  return m * (arm == 1 ? e : 1.0 - e) * f.pdf(y) * t.selection(x, y, arm) / ps;
}

bool differs(double a, double b, double rel_tol) {
  if (a == b) return false;
  return std::abs(a - b) > rel_tol * std::max(std::abs(a), std::abs(b));
}

}  // namespace

ConditionReport check_distinguishability(const ParamTuple& p, const ParamTuple& q, const ConditionOptions& opts) {
  p.validate();
  q.validate();
  ConditionReport rep;
  const TupleSummary sp = summarize_tuple(p, opts.quad_tol);
  const TupleSummary sq = summarize_tuple(q, opts.quad_tol);
  rep.tau_p = sp.tau;
  rep.tau_q = sq.tau;
  rep.ate_gap = std::abs(sp.tau - sq.tau);
  rep.ps_p = sp.ps;
  rep.ps_q = sq.ps;
  if (!(sp.ps > 0.0) || !(sq.ps > 0.0)) throw EstimationError("a tuple selects nobody");

  std::set<double> xs(p.x_grid.begin(), p.x_grid.end());
  xs.insert(q.x_grid.begin(), q.x_grid.end());

  if (opts.external_unbiased_x) {
    for (double x : xs) {
      if (differs(lookup_mass(p, x), lookup_mass(q, x), opts.rel_tol)) {
        rep.witness = Witness{x, 0.0, 0, true};
        break;
      }
    }
  }
  if (!rep.witness) {
    std::vector<double> ys{0.0};
    for (int k = -opts.y_doublings; k <= opts.y_doublings; ++k) {
      ys.push_back(std::ldexp(1.0, k));
      ys.push_back(-std::ldexp(1.0, k));
    }
    for (int k = -32; k <= 32; ++k) ys.push_back(0.25 * k);
    std::stable_sort(ys.begin(), ys.end(), [](double u, double v) {
      return std::abs(u) != std::abs(v) ? std::abs(u) < std::abs(v) : u > v;
    });
    ys.erase(std::unique(ys.begin(), ys.end()), ys.end());
    for (double y : ys) {
      for (double x : xs) {
        for (int t = 0; t < 2 && !rep.witness; ++t) {
          const double a = observed_density(p, sp.ps, x, y, t);
          const double b = observed_density(q, sq.ps, x, y, t);
          if (differs(a, b, opts.rel_tol)) rep.witness = Witness{x, y, t, false};
        }
        if (rep.witness) break;
      }
      if (rep.witness) break;
    }
  }

  if (rep.ate_gap <= opts.gap_tol) {
    rep.verdict = Verdict::EqualEffects;
    rep.message = "effects agree; the pair is consistent with the identifiability condition";
  } else if (rep.witness) {
    rep.verdict = Verdict::Distinguishable;
    rep.message = "effects differ and the selected-data densities differ at the witness";
  } else {
    rep.verdict = Verdict::Indistinguishable;
    rep.message = "effects differ but no grid point separates the selected-data densities";
  }
  return rep;
}

}  // namespace selbias
