#pragma once

/// Non-tradable-stocks market with exponential utility.
///
/// The value function V^(k)(t, x, y) of an investor with wealth x holding k
/// units of the forward sum(y_i) solves a fully nonlinear HJB equation.  After
/// reversing time, u(tau, x, y) = -V^(k)(T - tau, x, y) satisfies
///
///   u_tau = F[u] = 1/2 tr(a^T D2y u a) + r x u_x + b . Dy u
///                  - (rho a^T D2xy u + lambda u_x)^2 / (2 u_xx),
///
/// with a(y) = a0 diag(y), b(y) = b0 y and u(0, x, y) = gamma^-1 exp(-gamma (x + k sum y)).

#include <cmath>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "hjbng/errors.hpp"

namespace hjbng {

inline constexpr int kMaxNonTradables = 8;

using YVector = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxNonTradables, 1>;
using YMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxNonTradables,
                              kMaxNonTradables>;

struct MarketParams {
  double r = 0.05;       ///< risk-free rate
  double lambda = 0.1;   ///< Sharpe ratio of the tradable asset
  double gamma = 0.5;    ///< absolute risk aversion
  double a0 = 0.3;       ///< non-tradable volatility coefficient
  double b0 = 0.2;       ///< non-tradable drift coefficient
  double rho = 0.1;      ///< correlation of the tradable with each non-tradable
  int n = 0;             ///< number of non-tradable assets
  double k = 0.0;        ///< units of the forward held
  double T = 1.0;        ///< horizon
};

inline void validate(const MarketParams& mp) {
  auto fail = [](const std::string& what) { throw InvalidParameters(what); };
  if (!(mp.gamma > 0.0)) fail("gamma must be positive");
  if (!(mp.T > 0.0)) fail("T must be positive");
  if (mp.n < 0) fail("n must be non-negative");
  if (mp.n > kMaxNonTradables) fail("n exceeds the supported maximum of 8");
  if (!(std::abs(mp.rho) <= 1.0)) fail("|rho| must not exceed 1");
  if (!(mp.a0 >= 0.0)) fail("a0 must be non-negative");
  if (mp.n >= 1 && !(mp.a0 > 0.0)) fail("a0 must be positive when n >= 1");
  if (!(mp.k >= 0.0)) fail("k must be non-negative");
  if (!std::isfinite(mp.r) || !std::isfinite(mp.lambda) || !std::isfinite(mp.b0) ||
      !std::isfinite(mp.k)) {
    fail("market constants must be finite");
  }
}

/// Number of non-tradable coordinates the value function actually depends on.
/// Without a derivative position the y-dependence drops out entirely.
inline int family_dim(const MarketParams& mp) { return mp.k > 0.0 ? mp.n : 0; }

/// The zero-position market sharing every other constant with `mp`.
inline MarketParams without_position(MarketParams mp) {
  mp.k = 0.0;
  return mp;
}

struct SpacePoint {
  double x = 0.0;
  YVector y;

  SpacePoint() : y(0) {}
  SpacePoint(double x_, YVector y_) : x(x_), y(std::move(y_)) {}
  static SpacePoint uniform(double x, int n, double y_value) {
    return {x, YVector::Constant(n, y_value)};
  }
};

/// Value and spatial derivatives of a function of (x, y) at one point.
struct UJet {
  double u = 0.0;
  double u_x = 0.0;
  double u_xx = 0.0;
  YVector grad_y;
  YVector mixed_xy;
  YMatrix hess_y;

  explicit UJet(int n = 0)
      : grad_y(YVector::Zero(n)), mixed_xy(YVector::Zero(n)), hess_y(YMatrix::Zero(n, n)) {}

  int dim() const { return static_cast<int>(grad_y.size()); }

  UJet scaled(double c) const {
    UJet out = *this;
    out.u *= c;
    out.u_x *= c;
    out.u_xx *= c;
    out.grad_y *= c;
    out.mixed_xy *= c;
    out.hess_y *= c;
    return out;
  }
};

/// U(w) = -exp(-gamma w) / gamma
inline double utility(const MarketParams& mp, double wealth) {
  return -std::exp(-mp.gamma * wealth) / mp.gamma;
}

/// Time-reversed terminal condition f = -U(x + k sum(y)).
inline double terminal_payoff(const MarketParams& mp, const SpacePoint& p) {
  const double claim = p.y.size() > 0 ? p.y.sum() : 0.0;
  return std::exp(-mp.gamma * (p.x + mp.k * claim)) / mp.gamma;
}

inline double singular_threshold(double u) { return 1e-12 * std::max(std::abs(u), 1.0); }

namespace detail {

inline double rhs_with_curvature(const MarketParams& mp, const SpacePoint& p, const UJet& jet,
                                 double u_xx) {
  double diffusion = 0.0;
  double drift = 0.0;
  double cross = 0.0;
  for (Eigen::Index i = 0; i < jet.grad_y.size(); ++i) {
    const double yi = p.y[i];
    diffusion += yi * yi * jet.hess_y(i, i);
    drift += yi * jet.grad_y[i];
    cross += yi * jet.mixed_xy[i];
  }
  const double q = mp.rho * mp.a0 * cross + mp.lambda * jet.u_x;
  return 0.5 * mp.a0 * mp.a0 * diffusion + mp.r * p.x * jet.u_x + mp.b0 * drift -
         q * q / (2.0 * u_xx);
}

}  // namespace detail

/// Right-hand side F of the time-reversed HJB equation.
///
/// Throws SingularHessian when |u_xx| is within 1e-12 max(|u|, 1) of zero.
inline double rhs_F(const MarketParams& mp, const SpacePoint& p, const UJet& jet) {
  if (std::abs(jet.u_xx) <= singular_threshold(jet.u)) {
    throw SingularHessian("u_xx vanishes at x = " + std::to_string(p.x));
  }
  return detail::rhs_with_curvature(mp, p, jet, jet.u_xx);
}

/// rhs_F with u_xx floored at the singular threshold instead of throwing.
/// `clamped` is set when the floor was applied.
inline double rhs_F_guarded(const MarketParams& mp, const SpacePoint& p, const UJet& jet,
                            bool& clamped) {
  const double eps = singular_threshold(jet.u);
  clamped = jet.u_xx <= eps;
  return detail::rhs_with_curvature(mp, p, jet, clamped ? eps : jet.u_xx);
}

}  // namespace hjbng
