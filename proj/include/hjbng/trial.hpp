#pragma once

/// Exponential trial family
///
///   u_theta(x, y) = alpha sqrt(beta zeta^n) exp(-(beta x + zeta sum y) / 2),
///   theta = (log alpha, log beta, log zeta),
///
/// whose squared normalized part is the product exponential density with rate
/// beta in x and rate zeta in each y_i.  Under the Galerkin projection of the
/// HJB right-hand side every log-parameter moves at a constant rate, so the
/// whole trajectory is log-linear in time.

#include <cmath>
#include <optional>

#include <Eigen/Dense>

#include "hjbng/errors.hpp"
#include "hjbng/model.hpp"

namespace hjbng {

/// Which M33 normalization drives the log-zeta rate.
///  - oracle: M33 = n alpha^2 / 4, the value the inner-product definition gives.
///  - paper:  M33 = alpha^2 / 4, independent of n.
/// The two agree for n <= 1.
enum class Mode { paper, oracle };

inline const char* to_string(Mode m) { return m == Mode::paper ? "paper" : "oracle"; }

struct TrialState {
  double log_alpha = 0.0;
  double log_beta = 0.0;
  std::optional<double> log_zeta;  ///< absent for the wealth-only family

  double alpha() const { return std::exp(log_alpha); }
  double beta() const { return std::exp(log_beta); }
  double zeta() const { return log_zeta ? std::exp(*log_zeta) : 0.0; }
  bool has_zeta() const { return log_zeta.has_value(); }
  int size() const { return has_zeta() ? 3 : 2; }

  Eigen::VectorXd as_vector() const {
    Eigen::VectorXd v(size());
    v[0] = log_alpha;
    v[1] = log_beta;
    if (has_zeta()) v[2] = *log_zeta;
    return v;
  }

  static TrialState from_vector(const Eigen::VectorXd& v) {
    TrialState s{v[0], v[1], std::nullopt};
    if (v.size() > 2) s.log_zeta = v[2];
    return s;
  }
};

struct RateConstants {
  double c_alpha = 0.0;
  double c_beta = 0.0;
  double c_zeta = 0.0;  ///< unused for the wealth-only family
};

/// Parameters whose trial function equals the time-reversed terminal payoff.
inline TrialState initial_params(const MarketParams& mp) {
  validate(mp);
  if (mp.k > 0.0 && mp.n == 0) {
    throw InvalidBranch("a derivative position needs at least one non-tradable asset");
  }
  const int n = family_dim(mp);
  TrialState s;
  s.log_beta = std::log(2.0 * mp.gamma);
  if (n > 0) {
    s.log_zeta = std::log(2.0 * mp.gamma * mp.k);
    s.log_alpha = -std::log(mp.gamma) - 0.5 * (s.log_beta + n * *s.log_zeta);
  } else {
    s.log_alpha = -std::log(mp.gamma) - 0.5 * s.log_beta;
  }
  return s;
}

/// Constant log-parameter velocities of the projected dynamics.
inline RateConstants rate_constants(const MarketParams& mp, Mode mode = Mode::oracle) {
  const int n = family_dim(mp);
  const double a0 = mp.a0, b0 = mp.b0, rho = mp.rho, lam = mp.lambda, r = mp.r;
  RateConstants rc;
  rc.c_alpha = 0.25 * (a0 * (n * a0 + 2.0 * n * lam * rho - 0.5 * n * (n + 1) * a0 * rho * rho) -
                       2.0 * (n * b0 + r + lam * lam));
  rc.c_beta = r;
  if (n > 0) {
    const double per_coordinate = b0 - a0 * rho * lam + a0 * a0 * (0.5 * (n + 1) * rho * rho - 1.0);
    rc.c_zeta = mode == Mode::paper ? n * per_coordinate : per_coordinate;
  }
  return rc;
}

inline TrialState evolve(const TrialState& s0, const RateConstants& rc, double t) {
  TrialState s = s0;
  s.log_alpha += rc.c_alpha * t;
  s.log_beta += rc.c_beta * t;
  if (s.log_zeta) *s.log_zeta += rc.c_zeta * t;
  return s;
}

namespace detail {

inline double log_trial(const TrialState& s, const SpacePoint& p) {
  double out = s.log_alpha + 0.5 * s.log_beta - 0.5 * s.beta() * p.x;
  if (s.has_zeta()) {
    const auto n = static_cast<double>(p.y.size());
    out += 0.5 * n * *s.log_zeta - 0.5 * s.zeta() * p.y.sum();
  }
  return out;
}

}  // namespace detail

inline double trial_value(const TrialState& s, const SpacePoint& p) {
  return std::exp(detail::log_trial(s, p));
}

/// Value and spatial derivatives of the trial at `p`.  `n` sets the jet's
/// y-dimension; the wealth-only family has a jet that is flat in y.
inline UJet trial_jet(const TrialState& s, int n, const SpacePoint& p) {
  UJet jet(n);
  const double u = trial_value(s, p);
  const double b = s.beta();
  jet.u = u;
  jet.u_x = -0.5 * b * u;
  jet.u_xx = 0.25 * b * b * u;
  if (s.has_zeta() && n > 0) {
    const double z = s.zeta();
    jet.grad_y.setConstant(-0.5 * z * u);
    jet.mixed_xy.setConstant(0.25 * b * z * u);
    jet.hess_y.setConstant(0.25 * z * z * u);
  }
  return jet;
}

/// (d u / d theta_i) / u for theta = (log alpha, log beta, log zeta).
inline Eigen::VectorXd log_parameter_gradient(const TrialState& s, const SpacePoint& p) {
  Eigen::VectorXd g(s.size());
  g[0] = 1.0;
  g[1] = 0.5 * (1.0 - s.beta() * p.x);
  if (s.has_zeta()) {
    g[2] = 0.5 * (static_cast<double>(p.y.size()) - s.zeta() * p.y.sum());
  }
  return g;
}

/// d u / d tau along the log-linear flow with rates `rc`.
inline double trial_time_derivative(const TrialState& s, const RateConstants& rc,
                                    const SpacePoint& p) {
  double rate = rc.c_alpha + 0.5 * rc.c_beta - 0.5 * s.beta() * rc.c_beta * p.x;
  if (s.has_zeta()) {
    const auto n = static_cast<double>(p.y.size());
    rate += 0.5 * n * rc.c_zeta - 0.5 * s.zeta() * rc.c_zeta * p.y.sum();
  }
  return rate * trial_value(s, p);
}

/// Trial parameters at reversed time tau = T - t.
inline TrialState trial_state_at(const MarketParams& mp, Mode mode, double t) {
  return evolve(initial_params(mp), rate_constants(mp, mode), mp.T - t);
}

/// Approximate value function V^(k)(t, p) = -u_{theta(T - t)}(p).
inline double value_function(const MarketParams& mp, Mode mode, double t, const SpacePoint& p) {
  if (t < 0.0 || t > mp.T) throw InvalidParameters("t must lie in [0, T]");
  return -trial_value(trial_state_at(mp, mode, t), p);
}

}  // namespace hjbng
