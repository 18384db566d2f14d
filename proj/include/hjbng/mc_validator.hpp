#pragma once

/// Monte Carlo check of a candidate value function: simulate the wealth of an
/// investor following the feedback control implied by the value function and
/// compare the expected terminal utility with the value function itself.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "hjbng/errors.hpp"
#include "hjbng/model.hpp"
#include "hjbng/trial.hpp"

namespace hjbng {

struct McConfig {
  long paths = 100000;
  long steps = 2000;
  std::uint64_t seed = 42;
  double sigma_mc = 0.2;  ///< tradable volatility; only the simulation sees it
};

struct McResult {
  double mean = 0.0;
  double std_error = 0.0;
  double negative_wealth_fraction = 0.0;  ///< paths whose wealth ever dipped below 0
};

/// Dollar volatility exposure theta* sigma s of the maximizer of the
/// Hamiltonian, -(rho a^T D2xy phi + lambda phi_x) / phi_xx, from a jet of
/// the value function phi itself (phi_xx < 0).
inline double optimal_control_exposure(const MarketParams& mp, const SpacePoint& p,
                                       const UJet& phi) {
  // The exposure is scale-free in the jet; judge the curvature relative to |phi|.
  const double scale = std::abs(phi.u) > 0.0 ? std::abs(phi.u) : 1.0;
  if (-phi.u_xx / scale <= singular_threshold(phi.u / scale)) {
    throw SingularHessian("value function is not strictly concave in wealth");
  }
  double cross = 0.0;
  for (Eigen::Index i = 0; i < phi.mixed_xy.size(); ++i) cross += p.y[i] * phi.mixed_xy[i];
  return -(mp.rho * mp.a0 * cross + mp.lambda * phi.u_x) / phi.u_xx;
}

/// (t, x, y) -> exposure
using ExposurePolicy = std::function<double(double, double, const YVector&)>;

/// Feedback control of the trial value function.  The jet is built at unit
/// value since the exposure does not depend on the level of phi.
class TrialPolicy {
 public:
  TrialPolicy(const MarketParams& mp, Mode mode = Mode::oracle, double scale = 1.0)
      : mp_(mp),
        s0_(initial_params(mp)),
        rates_(rate_constants(mp, mode)),
        n_(family_dim(mp)),
        scale_(scale) {}

  double operator()(double t, double /*x*/, const YVector& y) const {
    if (t != cached_t_) {
      const TrialState s = evolve(s0_, rates_, mp_.T - t);
      beta_ = s.beta();
      zeta_ = s.zeta();
      cached_t_ = t;
      if (n_ == 0) {
        UJet phi(mp_.n);
        phi.u = -1.0;
        phi.u_x = 0.5 * beta_;
        phi.u_xx = -0.25 * beta_ * beta_;
        exposure_wealth_only_ = optimal_control_exposure(mp_, SpacePoint{0.0, y}, phi);
      }
    }
    if (n_ == 0) return scale_ * exposure_wealth_only_;
    UJet phi(mp_.n);
    phi.u = -1.0;
    phi.u_x = 0.5 * beta_;
    phi.u_xx = -0.25 * beta_ * beta_;
    phi.grad_y.setConstant(0.5 * zeta_);
    phi.mixed_xy.setConstant(-0.25 * beta_ * zeta_);
    phi.hess_y.setConstant(-0.25 * zeta_ * zeta_);
    return scale_ * optimal_control_exposure(mp_, SpacePoint{0.0, y}, phi);
  }

 private:
  MarketParams mp_;
  TrialState s0_;
  RateConstants rates_;
  int n_;
  double scale_;
  mutable double cached_t_ = std::numeric_limits<double>::quiet_NaN();
  mutable double beta_ = 0.0;
  mutable double zeta_ = 0.0;
  mutable double exposure_wealth_only_ = 0.0;
};

/// Counter-based generator: output i of stream `key` is splitmix64(key + i * golden).
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit CounterRng(std::uint64_t key) : key_(key) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return mix(key_ + (++counter_) * 0x9E3779B97F4A7C15ULL); }

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  static CounterRng substream(std::uint64_t seed, std::uint64_t index) {
    return CounterRng(mix(seed ^ mix(index + 0x632BE59BD9B4E019ULL)));
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

namespace detail {

inline double pairwise_sum(const double* v, std::size_t n) {
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += v[i];
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum(v, half) + pairwise_sum(v + half, n - half);
}

}  // namespace detail

/// Euler-Maruyama simulation of the controlled wealth with k units of the
/// forward, returning the sample mean and standard error of U(X_T + k sum Y_T).
///
/// The holding theta = e / (sigma S) is rebalanced at every step; the bond
/// part grows by exp(r dt) and S follows exact geometric steps, so sigma only
/// enters through the discretization.  Paths are advanced together one time
/// step at a time.  B = rho sum W_i + sqrt(1 - n rho^2) Z.
///
/// `policy` is any callable (t, x, y) -> exposure, e.g. TrialPolicy or an
/// ExposurePolicy.
template <class Policy>
McResult simulate_expected_utility(const MarketParams& mp, const Policy& policy, double x0,
                                   const YVector& y0, const McConfig& cfg) {
  validate(mp);
  if (cfg.paths < 1 || cfg.steps < 1 || !(cfg.sigma_mc > 0.0)) {
    throw InvalidParameters("Monte Carlo needs paths >= 1, steps >= 1, sigma_mc > 0");
  }
  const int n = mp.n;
  if (y0.size() != n) throw InvalidParameters("y0 must have n entries");
  const double rho_sq_total = n * mp.rho * mp.rho;
  if (rho_sq_total > 1.0) {
    throw InvalidParameters("equal correlations rho with n assets need n rho^2 <= 1");
  }
  const double idio = std::sqrt(1.0 - rho_sq_total);
  const double dt = mp.T / static_cast<double>(cfg.steps);
  const double sqrt_dt = std::sqrt(dt);
  const double sigma = cfg.sigma_mc;
  const double bond_growth = std::exp(mp.r * dt);
  const double s_drift = (mp.r + mp.lambda * sigma - 0.5 * sigma * sigma) * dt;

  // Time-major sweep: every path advances one step before the next step
  // starts, so time-only work in the policy is shared across paths.  Each
  // path still draws from its own substream, in the same order as a
  // path-by-path loop would.
  const auto count_paths = static_cast<std::size_t>(cfg.paths);
  struct PathState {
    CounterRng rng;
    std::normal_distribution<double> normal;
    double x;
    bool went_negative;
  };
  std::vector<PathState> paths;
  paths.reserve(count_paths);
  for (std::size_t i = 0; i < count_paths; ++i) {
    paths.push_back({CounterRng::substream(cfg.seed, i), {}, x0, x0 < 0.0});
  }
  std::vector<YVector> ys(n > 0 ? count_paths : 0, y0);
  YVector w(n);

  for (long j = 0; j < cfg.steps; ++j) {
    const double t = j * dt;
    for (std::size_t i = 0; i < count_paths; ++i) {
      PathState& ps = paths[i];
      const YVector& y = n > 0 ? ys[i] : y0;
      const double exposure = policy(t, ps.x, y);
      const double z = ps.normal(ps.rng);
      for (int k = 0; k < n; ++k) w[k] = ps.normal(ps.rng);
      const double db = sqrt_dt * (mp.rho * w.sum() + idio * z);

      // theta = e / (sigma S) shares; only the price ratio S_{j+1} / S_j matters.
      const double held = exposure / sigma;
      const double growth = std::exp(s_drift + sigma * db);
      ps.x = held * growth + (ps.x - held) * bond_growth;
      ps.went_negative = ps.went_negative || ps.x < 0.0;
      if (n > 0) {
        YVector& yi = ys[i];
        for (int k = 0; k < n; ++k) yi[k] += mp.b0 * yi[k] * dt + mp.a0 * yi[k] * sqrt_dt * w[k];
      }
    }
  }

  std::vector<double> payoff(count_paths);
  long negative = 0;
  for (std::size_t i = 0; i < count_paths; ++i) {
    negative += paths[i].went_negative ? 1 : 0;
    const double claim = n > 0 ? ys[i].sum() : 0.0;
    payoff[i] = utility(mp, paths[i].x + mp.k * claim);
  }

  // Center on the first sample so identical payoffs give an exact zero spread.
  const double ref = payoff.front();
  std::vector<double> centered(payoff.size());
  for (std::size_t i = 0; i < payoff.size(); ++i) centered[i] = payoff[i] - ref;
  const auto count = static_cast<double>(payoff.size());
  const double shift = detail::pairwise_sum(centered.data(), centered.size()) / count;
  for (double& c : centered) c = (c - shift) * (c - shift);
  const double ss = detail::pairwise_sum(centered.data(), centered.size());

  McResult res;
  res.mean = ref + shift;
  res.std_error = cfg.paths > 1 ? std::sqrt(ss / (count - 1.0) / count) : 0.0;
  res.negative_wealth_fraction = static_cast<double>(negative) / count;
  return res;
}

}  // namespace hjbng
