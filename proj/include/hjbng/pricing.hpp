#pragma once

/// Utility indifference price of k units of the forward sum(Y_T):
/// the p(k) with V^(k)(0, x0 - p, y0) = V^(0)(0, x0, y0).

#include <cmath>
#include <functional>
#include <string>
#include <utility>

#include "hjbng/errors.hpp"
#include "hjbng/model.hpp"
#include "hjbng/trial.hpp"

namespace hjbng {

struct PriceQuery {
  MarketParams mp;  ///< carries the position size k
  double x0 = 1.0;
  YVector y0;
};

/// (t, x, y) -> value
using ValueEvaluator = std::function<double(double, double, const YVector&)>;

inline ValueEvaluator trial_value_evaluator(const MarketParams& mp, Mode mode = Mode::oracle) {
  return [mp, mode](double t, double x, const YVector& y) {
    return value_function(mp, mode, t, SpacePoint{x, y});
  };
}

namespace detail {

inline void check_query(const PriceQuery& q) {
  validate(q.mp);
  if (q.mp.k > 0.0 && q.mp.n == 0) {
    throw InvalidBranch("pricing k > 0 units needs at least one non-tradable asset");
  }
  if (q.y0.size() != q.mp.n) throw InvalidParameters("y0 must have n entries");
  if ((q.y0.array() < 0.0).any()) throw InvalidParameters("y0 must be non-negative");
}

}  // namespace detail

/// Closed-form price from the two trial branches.  Both branches share
/// beta(T), so x0 drops out of the defining equation.
inline double indifference_price_closed(const PriceQuery& q, Mode mode = Mode::oracle) {
  detail::check_query(q);
  if (q.mp.k == 0.0) return 0.0;
  const TrialState held = trial_state_at(q.mp, mode, 0.0);
  const TrialState flat = trial_state_at(without_position(q.mp), mode, 0.0);
  const double n = q.mp.n;
  return (2.0 / held.beta()) * (flat.log_alpha - held.log_alpha - 0.5 * n * *held.log_zeta +
                                0.5 * held.zeta() * q.y0.sum());
}

/// Limit of the closed-form price as k -> 0+.  The exact price is continuous
/// at zero, so a nonzero value measures the projection error of the trial.
inline double price_limit_at_zero_position(const PriceQuery& q, Mode mode = Mode::oracle) {
  detail::check_query(q);
  if (q.mp.n == 0) return 0.0;
  MarketParams held = q.mp;
  held.k = 1.0;  // the rates do not depend on k > 0
  const RateConstants with = rate_constants(held, mode);
  const RateConstants without = rate_constants(without_position(q.mp), mode);
  const double beta_T = 2.0 * q.mp.gamma * std::exp(q.mp.r * q.mp.T);
  return (2.0 / beta_T) * (without.c_alpha - with.c_alpha - 0.5 * q.mp.n * with.c_zeta) * q.mp.T;
}

/// Bisection on g(p) = left(0, x0 - p, y0) - right(0, x0, y0).  `left` must be
/// increasing in wealth, which makes the root unique.
inline double indifference_price_bisect(const ValueEvaluator& left, const ValueEvaluator& right,
                                        const PriceQuery& q, std::pair<double, double> bracket,
                                        double tol) {
  if (!(tol > 0.0)) throw InvalidParameters("tolerance must be positive");
  const double target = right(0.0, q.x0, q.y0);
  auto g = [&](double p) { return left(0.0, q.x0 - p, q.y0) - target; };

  double lo = std::min(bracket.first, bracket.second);
  double hi = std::max(bracket.first, bracket.second);
  double g_lo = g(lo);
  const double g_hi = g(hi);
  if (g_lo == 0.0) return lo;
  if (g_hi == 0.0) return hi;
  if ((g_lo > 0.0) == (g_hi > 0.0)) {
    throw NoSignChange("price bracket [" + std::to_string(lo) + ", " + std::to_string(hi) +
                       "] does not straddle the root");
  }
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;  // bracket at floating-point resolution
    const double g_mid = g(mid);
    if (g_mid == 0.0) return mid;
    if ((g_mid > 0.0) == (g_lo > 0.0)) {
      lo = mid;
      g_lo = g_mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

/// |V^(k)(0, x0 - p, y0) - V^(0)(0, x0, y0)| / |V^(0)(0, x0, y0)|
inline double price_residual(const PriceQuery& q, double p, Mode mode = Mode::oracle) {
  const double held = value_function(q.mp, mode, 0.0, SpacePoint{q.x0 - p, q.y0});
  const double flat = value_function(without_position(q.mp), mode, 0.0, SpacePoint{q.x0, q.y0});
  return std::abs(held - flat) / std::abs(flat);
}

}  // namespace hjbng
