#pragma once

/// Experiment commands behind the command-line tool.  Each command reads an
/// ExperimentConfig, writes CSV to `out`, diagnostics to `err`, and returns
/// the process exit status (0 ok, 1 failed check, 2 invalid configuration).

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "hjbng/errors.hpp"
#include "hjbng/fd_solver.hpp"
#include "hjbng/galerkin.hpp"
#include "hjbng/mc_validator.hpp"
#include "hjbng/model.hpp"
#include "hjbng/pricing.hpp"
#include "hjbng/quadrature.hpp"
#include "hjbng/trial.hpp"

namespace hjbng {

inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitInvalidConfig = 2;

class ConfigError : public Error {
 public:
  using Error::Error;
};

struct ExperimentConfig {
  // market
  double r = 0.05;
  double lambda = 0.1;
  double gamma = 0.5;
  double a0 = 0.3;
  double b0 = 0.2;
  double rho = 0.1;
  double T = 1.0;
  std::optional<int> n;     ///< command-specific default when unset
  std::optional<double> k;  ///< command-specific default when unset
  Mode mode = Mode::oracle;

  // finite differences
  double L = 4.0;
  std::optional<int> d;
  int N = 4;
  int N_min = 3;
  int N_max = 6;
  std::optional<double> dt;
  std::optional<MetricKind> metric;

  // quadrature identities
  int order = kDefaultQuadratureOrder;
  std::vector<int> n_list{1, 2, 3};
  std::vector<double> b_list{0.5, 1.0, 2.0};
  double identity_tol = 1e-10;

  // Galerkin integration
  Assembler assembler = Assembler::closed;
  Method method = Method::rk4;
  double ng_dt = 1e-3;

  // sweep
  std::vector<std::string> params{"a0", "b0", "rho", "lambda", "r"};
  std::vector<double> rel{0.5, 0.75, 1.0, 1.5, 2.0};
  bool r_range_literal = false;

  // pricing
  std::vector<double> k_list{0.0, 1.0, 2.0};
  double x0 = 1.0;
  double y0 = 1.0;
  double bracket_lo = -10.0;
  double bracket_hi = 10.0;
  double price_tol = 1e-12;

  // Monte Carlo
  McConfig mc;
  double exposure_scale = 1.0;
};

// ---------------------------------------------------------------------------
// Config parsing

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double out = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': '" + v + "' is not a number");
  }
}

inline long parse_long(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long out = std::stol(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': '" + v + "' is not an integer");
  }
}

inline std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <class T, class Parse>
std::vector<T> parse_list(const std::string& key, const std::string& v, Parse parse) {
  std::vector<T> out;
  for (const auto& item : split_list(v)) out.push_back(static_cast<T>(parse(key, item)));
  if (out.empty()) throw ConfigError("key '" + key + "' needs at least one value");
  return out;
}

}  // namespace detail

struct ConfigKey {
  std::string name;
  std::string help;
  std::function<void(ExperimentConfig&, const std::string&)> set;
};

/// Every accepted configuration key.  Config files and command-line flags
/// share this schema.
inline const std::vector<ConfigKey>& config_keys() {
  using C = ExperimentConfig;
  using detail::parse_double;
  using detail::parse_long;
  static const std::vector<ConfigKey> keys = {
      {"r", "risk-free rate", [](C& c, const std::string& v) { c.r = parse_double("r", v); }},
      {"lambda", "Sharpe ratio",
       [](C& c, const std::string& v) { c.lambda = parse_double("lambda", v); }},
      {"gamma", "risk aversion",
       [](C& c, const std::string& v) { c.gamma = parse_double("gamma", v); }},
      {"a0", "non-tradable volatility coefficient",
       [](C& c, const std::string& v) { c.a0 = parse_double("a0", v); }},
      {"b0", "non-tradable drift coefficient",
       [](C& c, const std::string& v) { c.b0 = parse_double("b0", v); }},
      {"rho", "correlation per non-tradable coordinate",
       [](C& c, const std::string& v) { c.rho = parse_double("rho", v); }},
      {"T", "horizon", [](C& c, const std::string& v) { c.T = parse_double("T", v); }},
      {"n", "number of non-tradable assets",
       [](C& c, const std::string& v) { c.n = static_cast<int>(parse_long("n", v)); }},
      {"k", "units of the forward held",
       [](C& c, const std::string& v) { c.k = parse_double("k", v); }},
      {"mode", "paper | oracle",
       [](C& c, const std::string& v) {
         if (v == "paper") c.mode = Mode::paper;
         else if (v == "oracle") c.mode = Mode::oracle;
         else throw ConfigError("mode must be 'paper' or 'oracle'");
       }},
      {"L", "box edge", [](C& c, const std::string& v) { c.L = parse_double("L", v); }},
      {"d", "spatial dimension n + 1 (1, 2 or 3)",
       [](C& c, const std::string& v) { c.d = static_cast<int>(parse_long("d", v)); }},
      {"N", "grid refinement (2^N + 1 points per axis)",
       [](C& c, const std::string& v) { c.N = static_cast<int>(parse_long("N", v)); }},
      {"N-min", "first refinement of a comparison",
       [](C& c, const std::string& v) { c.N_min = static_cast<int>(parse_long("N-min", v)); }},
      {"N-max", "last refinement of a comparison",
       [](C& c, const std::string& v) { c.N_max = static_cast<int>(parse_long("N-max", v)); }},
      {"dt", "finite-difference time step (default: stability bound)",
       [](C& c, const std::string& v) { c.dt = parse_double("dt", v); }},
      {"metric", "mean_abs | mean_abs_log10 | mean_rel_pct | pointwise_abs | slice_mean",
       [](C& c, const std::string& v) {
         if (v == "self_error") {
           c.metric = MetricKind::pointwise_abs;
           return;
         }
         const auto m = metric_from_string(v);
         if (!m) throw ConfigError("unknown metric '" + v + "'");
         c.metric = *m;
       }},
      {"order", "Gauss-Laguerre order",
       [](C& c, const std::string& v) { c.order = static_cast<int>(parse_long("order", v)); }},
      {"n-list", "identity check: comma-separated n values",
       [](C& c, const std::string& v) { c.n_list = detail::parse_list<int>("n-list", v, parse_long); }},
      {"b-list", "identity check: comma-separated rates",
       [](C& c, const std::string& v) {
         c.b_list = detail::parse_list<double>("b-list", v, parse_double);
       }},
      {"identity-tol", "identity check relative tolerance",
       [](C& c, const std::string& v) { c.identity_tol = parse_double("identity-tol", v); }},
      {"assembler", "closed | quadrature",
       [](C& c, const std::string& v) {
         if (v == "closed") c.assembler = Assembler::closed;
         else if (v == "quadrature") c.assembler = Assembler::quadrature;
         else throw ConfigError("assembler must be 'closed' or 'quadrature'");
       }},
      {"method", "euler | rk4",
       [](C& c, const std::string& v) {
         if (v == "euler") c.method = Method::euler;
         else if (v == "rk4") c.method = Method::rk4;
         else throw ConfigError("method must be 'euler' or 'rk4'");
       }},
      {"ng-dt", "Galerkin ODE step",
       [](C& c, const std::string& v) { c.ng_dt = parse_double("ng-dt", v); }},
      {"param", "sweep: comma-separated subset of a0,b0,rho,lambda,r",
       [](C& c, const std::string& v) {
         c.params = detail::split_list(v);
         for (const auto& p : c.params) {
           if (p != "a0" && p != "b0" && p != "rho" && p != "lambda" && p != "r") {
             throw ConfigError("cannot sweep parameter '" + p + "'");
           }
         }
         if (c.params.empty()) throw ConfigError("param needs at least one value");
       }},
      {"rel", "sweep: relative positions in [0.5, 2]",
       [](C& c, const std::string& v) { c.rel = detail::parse_list<double>("rel", v, parse_double); }},
      {"r-range-literal", "sweep r over the literal range [0.25, 0.1] (true/false)",
       [](C& c, const std::string& v) {
         if (v == "true" || v == "1") c.r_range_literal = true;
         else if (v == "false" || v == "0") c.r_range_literal = false;
         else throw ConfigError("r-range-literal must be true or false");
       }},
      {"k-list", "pricing: comma-separated position sizes",
       [](C& c, const std::string& v) {
         c.k_list = detail::parse_list<double>("k-list", v, parse_double);
       }},
      {"x0", "initial wealth", [](C& c, const std::string& v) { c.x0 = parse_double("x0", v); }},
      {"y0", "initial value of every non-tradable",
       [](C& c, const std::string& v) { c.y0 = parse_double("y0", v); }},
      {"bracket-lo", "pricing bisection lower bound",
       [](C& c, const std::string& v) { c.bracket_lo = parse_double("bracket-lo", v); }},
      {"bracket-hi", "pricing bisection upper bound",
       [](C& c, const std::string& v) { c.bracket_hi = parse_double("bracket-hi", v); }},
      {"price-tol", "pricing bisection width",
       [](C& c, const std::string& v) { c.price_tol = parse_double("price-tol", v); }},
      {"paths", "Monte Carlo paths",
       [](C& c, const std::string& v) { c.mc.paths = parse_long("paths", v); }},
      {"steps", "Monte Carlo steps per path",
       [](C& c, const std::string& v) { c.mc.steps = parse_long("steps", v); }},
      {"seed", "Monte Carlo seed",
       [](C& c, const std::string& v) {
         try {
           std::size_t used = 0;
           c.mc.seed = std::stoull(v, &used);
           if (used != v.size()) throw std::invalid_argument(v);
         } catch (const std::exception&) {
           throw ConfigError("seed must be an unsigned 64-bit integer");
         }
       }},
      {"sigma-mc", "tradable volatility used by the simulation",
       [](C& c, const std::string& v) { c.mc.sigma_mc = parse_double("sigma-mc", v); }},
      {"exposure-scale", "multiply the candidate control (optimality probe)",
       [](C& c, const std::string& v) { c.exposure_scale = parse_double("exposure-scale", v); }},
  };
  return keys;
}

inline void apply_key(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& k : config_keys()) {
    if (k.name == key) {
      k.set(cfg, value);
      return;
    }
  }
  throw ConfigError("unknown configuration key '" + key + "'");
}

/// Flat `key = value` lines; '#' starts a comment.
inline void load_config_text(ExperimentConfig& cfg, std::istream& in) {
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    }
    apply_key(cfg, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
  }
}

inline void load_config_file(ExperimentConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  load_config_text(cfg, in);
}

inline MarketParams market_params(const ExperimentConfig& c, int n, double k) {
  MarketParams mp;
  mp.r = c.r;
  mp.lambda = c.lambda;
  mp.gamma = c.gamma;
  mp.a0 = c.a0;
  mp.b0 = c.b0;
  mp.rho = c.rho;
  mp.n = n;
  mp.k = k;
  mp.T = c.T;
  validate(mp);
  return mp;
}

// ---------------------------------------------------------------------------
// Output helpers

inline std::string fmt_num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17e", v);
  return buf;
}

namespace detail {

/// n for grid commands: from --d when given, else --n, else `fallback`.
inline int grid_n(const ExperimentConfig& c, int fallback) {
  if (c.d) {
    if (*c.d < 1 || *c.d > kMaxGridDim) throw ConfigError("d must be 1, 2 or 3");
    if (c.n && *c.n != *c.d - 1) throw ConfigError("n and d disagree (d = n + 1)");
    return *c.d - 1;
  }
  return c.n.value_or(fallback);
}

/// Position size for grid commands: one unit of the forward when n >= 1.
inline double grid_k(const ExperimentConfig& c, int n) { return c.k.value_or(n > 0 ? 1.0 : 0.0); }

/// Market for the grid commands.  A zero horizon is allowed there (both
/// solutions are then the terminal payoff); the market itself keeps a
/// positive placeholder T since no rate depends on it.
inline MarketParams grid_market(const ExperimentConfig& c, int n, double k) {
  if (!(c.T >= 0.0)) throw ConfigError("T must be non-negative");
  ExperimentConfig local = c;
  if (c.T == 0.0) local.T = 1.0;
  return market_params(local, n, k);
}

/// Trial solution u = -V at reversed time `horizon`.
inline std::function<double(const SpacePoint&)> trial_solution(const MarketParams& mp, Mode mode,
                                                               double horizon) {
  if (horizon == 0.0) return [mp](const SpacePoint& p) { return terminal_payoff(mp, p); };
  const TrialState s = evolve(initial_params(mp), rate_constants(mp, mode), horizon);
  return [s](const SpacePoint& p) { return trial_value(s, p); };
}

inline SpacePoint box_center(const Grid& g) { return SpacePoint::uniform(0.5 * g.L, g.d - 1, 0.5 * g.L); }

}  // namespace detail

// ---------------------------------------------------------------------------
// identities

struct IdentityCheck {
  std::string identity;
  int n = 0;
  double b = 0.0;
  double expected = 0.0;
  double computed = 0.0;
  double rel_error = 0.0;
  bool pass = false;
};

/// The five exponential-moment identities <psi| . |psi> with rate b in every
/// coordinate, by Gauss-Laguerre quadrature of the given order.
inline std::vector<IdentityCheck> run_identities(int n, double b, int order, double tol) {
  const QuadratureRule rule = laguerre_rule(order);
  TrialState s{0.0, std::log(b), std::nullopt};
  if (n > 0) s.log_zeta = std::log(b);

  std::vector<IdentityCheck> out;
  auto record = [&](const std::string& name, double expected, double computed) {
    const double rel = std::abs(computed - expected) / std::abs(expected);
    out.push_back({name, n, b, expected, computed, rel, rel <= tol});
  };
  auto E = [&](auto g) { return expect_psi2(s, n, g, rule); };

  record("x", 1.0 / b, E([](double x, const YVector&) { return x; }));
  if (n == 0) return out;

  // Worst coordinate / pair for the per-index identities.
  auto worst = [&](const std::string& name, auto expected_fn, auto integrand_fn, int pairs) {
    double exp_worst = 0.0, comp_worst = 0.0, rel_worst = -1.0;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < (pairs ? n : 1); ++j) {
        const double e = expected_fn(i, j);
        const double c = E([&](double, const YVector& y) { return integrand_fn(y, i, j); });
        const double rel = std::abs(c - e) / std::abs(e);
        if (rel > rel_worst) {
          rel_worst = rel;
          exp_worst = e;
          comp_worst = c;
        }
      }
    }
    record(name, exp_worst, comp_worst);
  };
  worst(
      "y_i", [&](int, int) { return 1.0 / b; }, [](const YVector& y, int i, int) { return y[i]; },
      0);
  worst(
      "y_i*y_j", [&](int i, int j) { return ((i == j ? 1.0 : 0.0) + 1.0) / (b * b); },
      [](const YVector& y, int i, int j) { return y[i] * y[j]; }, 1);
  record("sum_ij y_i^2*y_j", 2.0 * n * (n + 2) / (b * b * b),
         E([](double, const YVector& y) { return y.squaredNorm() * y.sum(); }));
  record("sum_ijk y_i*y_j*y_k", static_cast<double>((n + 2) * (n + 1) * n) / (b * b * b),
         E([](double, const YVector& y) {
           const double s1 = y.sum();
           return s1 * s1 * s1;
         }));
  return out;
}

inline int cmd_identities(const ExperimentConfig& c, std::ostream& out, std::ostream& err) {
  std::vector<int> ns = c.n ? std::vector<int>{*c.n} : c.n_list;
  out << "identity,n,b,expected,computed,rel_error,pass\n";
  int failures = 0, total = 0;
  for (int n : ns) {
    if (n < 0 || n > kMaxNonTradables) throw ConfigError("identity n must lie in [0, 8]");
    for (double b : c.b_list) {
      if (!(b > 0.0)) throw ConfigError("identity rates must be positive");
      for (const auto& chk : run_identities(n, b, c.order, c.identity_tol)) {
        ++total;
        out << chk.identity << ',' << chk.n << ',' << fmt_num(chk.b) << ','
            << fmt_num(chk.expected) << ',' << fmt_num(chk.computed) << ','
            << fmt_num(chk.rel_error) << ',' << (chk.pass ? "true" : "false") << '\n';
        if (!chk.pass) {
          ++failures;
          err << "FAIL identity " << chk.identity << " (n=" << chk.n << ", b=" << chk.b
              << "): relative error " << chk.rel_error << " > " << c.identity_tol << '\n';
        }
      }
    }
  }
  err << (total - failures) << " of " << total << " identity checks passed (order " << c.order
      << ")\n";
  return failures == 0 ? kExitOk : kExitCheckFailed;
}

// ---------------------------------------------------------------------------
// Trial residual and mass-matrix discrepancy

/// |du/dtau - F[u]| / |u| for the trial solution at reversed time tau.
inline double trial_pde_residual(const MarketParams& mp, Mode mode, double tau,
                                 const SpacePoint& p) {
  const TrialState s = evolve(initial_params(mp), rate_constants(mp, mode), tau);
  const RateConstants rc = rate_constants(mp, mode);
  const UJet jet = trial_jet(s, mp.n, p);
  return std::abs(trial_time_derivative(s, rc, p) - rhs_F(mp, p, jet)) / std::abs(jet.u);
}

struct DiscrepancyRecord {
  int n = 0;
  std::string entry;
  double fixed = 0.0;     ///< closed form with the alpha^2/4 normalization
  double computed = 0.0;  ///< quadrature of the inner-product definition
  double ratio = 0.0;     ///< computed / fixed
};

/// Compares every M and V entry of the alpha^2/4 closed forms against the
/// quadrature oracle at state `s`; only mismatching entries are returned.
inline std::vector<DiscrepancyRecord> mass_discrepancies(const MarketParams& mp,
                                                         const TrialState& s, double rel_tol) {
  const GalerkinSystem fixed = assemble_closed(mp, s, Mode::paper);
  const GalerkinSystem oracle = assemble_MV_quadrature(mp, s);
  std::vector<DiscrepancyRecord> out;
  // Off-diagonal zeros are judged against the size of the diagonal.
  const double scale = oracle.M.diagonal().cwiseAbs().maxCoeff();
  auto check = [&](const std::string& name, double a, double b) {
    if (std::abs(b - a) > rel_tol * std::max({std::abs(a), std::abs(b), scale})) {
      out.push_back({mp.n, name, a, b, a != 0.0 ? b / a : std::numeric_limits<double>::infinity()});
    }
  };
  const auto size = static_cast<int>(fixed.M.rows());
  for (int i = 0; i < size; ++i) {
    for (int j = 0; j < size; ++j) {
      check("M" + std::to_string(i + 1) + std::to_string(j + 1), fixed.M(i, j), oracle.M(i, j));
    }
    check("V" + std::to_string(i + 1), fixed.V[i], oracle.V[i]);
  }
  return out;
}

inline void write_discrepancies(const std::vector<DiscrepancyRecord>& recs, std::ostream& err) {
  for (const auto& r : recs) {
    err << "discrepancy: n=" << r.n << " entry=" << r.entry << " fixed=" << fmt_num(r.fixed)
        << " quadrature=" << fmt_num(r.computed) << " ratio=" << fmt_num(r.ratio) << '\n';
  }
}

// ---------------------------------------------------------------------------
// ng-solve

inline int cmd_ng_solve(const ExperimentConfig& c, std::ostream& out, std::ostream& err) {
  const int n = c.n.value_or(c.d ? *c.d - 1 : 0);
  const MarketParams mp = market_params(c, n, detail::grid_k(c, n));
  IntegrateOptions opt;
  opt.assembler = c.assembler;
  opt.method = c.method;
  opt.mode = c.mode;
  opt.quadrature_order = c.order;
  const TrialState s0 = initial_params(mp);
  const Trajectory traj = integrate(mp, s0, mp.T, c.ng_dt, opt);
  const RateConstants rc = rate_constants(mp, c.mode);

  out << "t,log_alpha,log_beta,log_zeta,alpha,beta,zeta\n";
  double worst = 0.0;
  for (std::size_t i = 0; i < traj.times.size(); ++i) {
    const TrialState& s = traj.states[i];
    const TrialState exact = evolve(s0, rc, traj.times[i]);
    worst = std::max(worst, (s.as_vector() - exact.as_vector()).cwiseAbs().maxCoeff());
    out << fmt_num(traj.times[i]) << ',' << fmt_num(s.log_alpha) << ',' << fmt_num(s.log_beta)
        << ',' << (s.has_zeta() ? fmt_num(*s.log_zeta) : "") << ',' << fmt_num(s.alpha()) << ','
        << fmt_num(s.beta()) << ',' << (s.has_zeta() ? fmt_num(s.zeta()) : "") << '\n';
  }
  err << "max |theta - closed form| over the trajectory: " << worst << '\n';
  if (family_dim(mp) > 0) write_discrepancies(mass_discrepancies(mp, s0, 1e-10), err);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// fd-solve

inline int cmd_fd_solve(const ExperimentConfig& c, std::ostream& out, std::ostream& err) {
  const int n = detail::grid_n(c, 0);
  const MarketParams mp = detail::grid_market(c, n, detail::grid_k(c, n));
  const Grid grid(n + 1, c.N, c.L);
  FdDiagnostics diag;
  const Field field = solve(grid, mp, c.T, c.dt, &diag);
  const auto trial = detail::trial_solution(mp, c.mode, c.T);

  out << "x";
  for (int i = 0; i < n; ++i) out << ",y" << (i + 1);
  out << ",fd,trial\n";
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const SpacePoint p = grid.point(grid.unflatten(i));
    out << fmt_num(p.x);
    for (int k = 0; k < n; ++k) out << ',' << fmt_num(p.y[k]);
    out << ',' << fmt_num(field.values[i]) << ',' << fmt_num(trial(p)) << '\n';
  }
  err << "fd-solve: d=" << grid.d << " N=" << grid.N << " dt=" << diag.dt
      << " steps=" << diag.steps << " clamped_nodes=" << diag.clamped_nodes << '\n';
  return diag.clamped_nodes == 0 ? kExitOk : kExitCheckFailed;
}

// ---------------------------------------------------------------------------
// compare

struct CompareRow {
  int d = 0;
  int N = 0;
  std::string metric;
  std::optional<double> x;
  double value = 0.0;
};

/// FD runs over N in [N_min, N_max] against the trial solution (exact for
/// d = 1), plus the self-error |u_N - u_{N-1}| at the box center.
inline std::vector<CompareRow> run_compare(const ExperimentConfig& c, std::ostream& err) {
  const int n = detail::grid_n(c, 0);
  const MarketParams mp = detail::grid_market(c, n, detail::grid_k(c, n));
  if (c.N_min < 3 || c.N_max < c.N_min) throw ConfigError("need 3 <= N-min <= N-max");
  const auto trial = detail::trial_solution(mp, c.mode, c.T);
  auto wanted = [&](MetricKind m) { return !c.metric || *c.metric == m; };

  std::vector<CompareRow> rows;
  std::optional<Field> coarser;
  for (int N = c.N_min - 1; N <= c.N_max; ++N) {
    const Grid grid(n + 1, N, c.L);
    FdDiagnostics diag;
    Field field = solve(grid, mp, c.T, c.dt, &diag);
    if (diag.clamped_nodes > 0) {
      err << "warning: N=" << N << " clamped u_xx at " << diag.clamped_nodes << " node updates\n";
    }
    if (N >= c.N_min) {
      const int d = grid.d;
      const double mean_abs = error_report(field, trial, grid, Metric::mean_abs()).value;
      if (wanted(MetricKind::mean_abs)) rows.push_back({d, N, "mean_abs", std::nullopt, mean_abs});
      if (wanted(MetricKind::mean_abs_log10) && mean_abs > 0.0) {
        rows.push_back({d, N, "mean_abs_log10", std::nullopt, std::log10(mean_abs)});
      }
      if (wanted(MetricKind::mean_rel_pct)) {
        rows.push_back({d, N, "mean_rel_pct", std::nullopt,
                        error_report(field, trial, grid, Metric::mean_rel_pct()).value});
      }
      if (wanted(MetricKind::pointwise_abs)) {
        const Grid coarse(n + 1, N - 1, c.L);
        rows.push_back({d, N, "self_error", std::nullopt,
                        error_report(field, *coarser, coarse,
                                     Metric::pointwise_abs(detail::box_center(grid)))
                            .value});
      }
      if (d == 3 && wanted(MetricKind::slice_mean)) {
        for (int i = 0; i < grid.points(); ++i) {
          const double x = i * grid.h();
          rows.push_back(
              {d, N, "slice_mean", x, error_report(field, trial, grid, Metric::slice_mean(x)).value});
        }
      }
    }
    coarser = std::move(field);
  }
  return rows;
}

inline int cmd_compare(const ExperimentConfig& c, std::ostream& out, std::ostream& err) {
  const auto rows = run_compare(c, err);
  out << "d,N,metric,x,value\n";
  for (const auto& r : rows) {
    out << r.d << ',' << r.N << ',' << r.metric << ',' << (r.x ? fmt_num(*r.x) : "") << ','
        << fmt_num(r.value) << '\n';
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// sweep

struct SweepRange {
  double lo, hi;
};

inline SweepRange sweep_range(const std::string& param, bool r_literal) {
  if (param == "a0") return {0.25, 0.4};
  if (param == "b0") return {0.1, 0.4};
  if (param == "rho") return {-0.5, 0.4};
  if (param == "lambda") return {0.05, 0.2};
  if (param == "r") return r_literal ? SweepRange{0.25, 0.1} : SweepRange{0.025, 0.1};
  throw ConfigError("cannot sweep parameter '" + param + "'");
}

/// Piecewise-linear map of a relative position in [0.5, 2] onto [lo, hi]
/// with 1 landing on the default value.
inline double sweep_value(double rel, double lo, double def, double hi) {
  if (rel < 0.5 || rel > 2.0) throw ConfigError("relative sweep positions must lie in [0.5, 2]");
  if (rel <= 1.0) return lo + (rel - 0.5) / 0.5 * (def - lo);
  return def + (rel - 1.0) * (hi - def);
}

struct SweepRow {
  std::string param;
  double rel = 0.0;
  double value = 0.0;
  double mean_rel_pct = 0.0;
  double mean_abs = 0.0;
};

inline double* sweep_slot(ExperimentConfig& c, const std::string& param) {
  if (param == "a0") return &c.a0;
  if (param == "b0") return &c.b0;
  if (param == "rho") return &c.rho;
  if (param == "lambda") return &c.lambda;
  if (param == "r") return &c.r;
  throw ConfigError("cannot sweep parameter '" + param + "'");
}

/// FD (N fixed) versus trial errors while one parameter moves across its range.
inline std::vector<SweepRow> run_sweep(const ExperimentConfig& c) {
  const int n = detail::grid_n(c, 2);
  std::vector<SweepRow> rows;
  for (const auto& param : c.params) {
    const SweepRange range = sweep_range(param, c.r_range_literal);
    ExperimentConfig local = c;
    double* slot = sweep_slot(local, param);
    const double def = *slot;
    for (double rel : c.rel) {
      *slot = sweep_value(rel, range.lo, def, range.hi);
      const MarketParams mp = detail::grid_market(local, n, detail::grid_k(local, n));
      const Grid grid(n + 1, c.N, c.L);
      const Field field = solve(grid, mp, c.T, c.dt);
      const auto trial = detail::trial_solution(mp, c.mode, c.T);
      rows.push_back({param, rel, *slot,
                      error_report(field, trial, grid, Metric::mean_rel_pct()).value,
                      error_report(field, trial, grid, Metric::mean_abs()).value});
    }
  }
  return rows;
}

inline int cmd_sweep(const ExperimentConfig& c, std::ostream& out, std::ostream& /*err*/) {
  const auto rows = run_sweep(c);
  out << "param,rel,value,mean_rel_pct,mean_abs\n";
  for (const auto& r : rows) {
    out << r.param << ',' << fmt_num(r.rel) << ',' << fmt_num(r.value) << ','
        << fmt_num(r.mean_rel_pct) << ',' << fmt_num(r.mean_abs) << '\n';
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// price

struct PriceRow {
  double k = 0.0;
  double p_closed = 0.0;
  double p_bisect = 0.0;
  double residual = 0.0;
};

inline std::vector<PriceRow> run_price(const ExperimentConfig& c, std::ostream& err) {
  const int n = c.n.value_or(1);
  std::vector<PriceRow> rows;
  for (double k : c.k_list) {
    PriceQuery q{market_params(c, n, k), c.x0, YVector::Constant(n, c.y0)};
    const double closed = indifference_price_closed(q, c.mode);
    const double bisect = indifference_price_bisect(
        trial_value_evaluator(q.mp, c.mode), trial_value_evaluator(without_position(q.mp), c.mode),
        q, {c.bracket_lo, c.bracket_hi}, c.price_tol);
    rows.push_back({k, closed, bisect, price_residual(q, closed, c.mode)});
  }
  if (n > 0) {
    PriceQuery q{market_params(c, n, 0.0), c.x0, YVector::Constant(n, c.y0)};
    err << "diagnostic: closed-form price as k -> 0+ is "
        << price_limit_at_zero_position(q, c.mode) << " (trial projection gap)\n";
  }
  return rows;
}

inline int cmd_price(const ExperimentConfig& c, std::ostream& out, std::ostream& err) {
  const auto rows = run_price(c, err);
  out << "k,p_closed,p_bisect,residual\n";
  int status = kExitOk;
  for (const auto& r : rows) {
    out << fmt_num(r.k) << ',' << fmt_num(r.p_closed) << ',' << fmt_num(r.p_bisect) << ','
        << fmt_num(r.residual) << '\n';
    if (!(r.residual <= 1e-9)) {
      err << "FAIL k=" << r.k << ": residual " << r.residual << " > 1e-9\n";
      status = kExitCheckFailed;
    }
  }
  return status;
}

// ---------------------------------------------------------------------------
// mc-check

struct McReport {
  McResult result;
  double value = 0.0;
  double z = 0.0;
};

/// z-score of the Monte Carlo mean against the value function.  With zero
/// spread the estimate is deterministic and z is 0 or infinite.
inline double z_score(double mean, double std_error, double value) {
  if (std_error > 0.0) return (mean - value) / std_error;
  if (std::abs(mean - value) <= 1e-12 * std::abs(value)) return 0.0;
  return mean > value ? std::numeric_limits<double>::infinity()
                      : -std::numeric_limits<double>::infinity();
}

inline McReport run_mc(const ExperimentConfig& c) {
  const int n = c.n.value_or(0);
  const MarketParams mp = market_params(c, n, c.k.value_or(0.0));
  const YVector y0 = YVector::Constant(n, c.y0);
  McReport rep;
  rep.result = simulate_expected_utility(mp, TrialPolicy(mp, c.mode, c.exposure_scale), c.x0, y0,
                                         c.mc);
  rep.value = value_function(mp, c.mode, 0.0, SpacePoint{c.x0, y0});
  rep.z = z_score(rep.result.mean, rep.result.std_error, rep.value);
  return rep;
}

inline int cmd_mc(const ExperimentConfig& c, std::ostream& out, std::ostream& err) {
  const McReport rep = run_mc(c);
  out << "paths,steps,seed,sigma_mc,mean,stderr,value,z,negative_fraction\n";
  out << c.mc.paths << ',' << c.mc.steps << ',' << c.mc.seed << ',' << fmt_num(c.mc.sigma_mc)
      << ',' << fmt_num(rep.result.mean) << ',' << fmt_num(rep.result.std_error) << ','
      << fmt_num(rep.value) << ',' << fmt_num(rep.z) << ','
      << fmt_num(rep.result.negative_wealth_fraction) << '\n';
  const bool ok = std::abs(rep.z) <= 3.0;
  err << "mc-check: z = " << rep.z << (ok ? " (within 3 standard errors)\n" : " (FAIL)\n");
  return ok ? kExitOk : kExitCheckFailed;
}

}  // namespace hjbng
