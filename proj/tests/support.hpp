#pragma once

// Seeded generators for property tests.

#include <cstdint>
#include <random>

#include "hjbng/model.hpp"
#include "hjbng/trial.hpp"

namespace hjbng::proptest {

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }

  /// Market constants drawn from the sweep ranges.
  MarketParams market(int n, double k) {
    MarketParams mp;
    mp.a0 = uniform(0.25, 0.4);
    mp.b0 = uniform(0.1, 0.4);
    mp.rho = uniform(-0.5, 0.4);
    mp.lambda = uniform(0.05, 0.2);
    mp.r = uniform(0.025, 0.1);
    mp.gamma = uniform(0.2, 1.5);
    mp.n = n;
    mp.k = k;
    return mp;
  }

  SpacePoint point(int n, double hi = 4.0) {
    SpacePoint p;
    p.x = uniform(0.0, hi);
    p.y = YVector(n);
    for (int i = 0; i < n; ++i) p.y[i] = uniform(0.0, hi);
    return p;
  }

  TrialState state(bool with_zeta) {
    TrialState s{uniform(-1.0, 1.0), uniform(-1.0, 1.0), std::nullopt};
    if (with_zeta) s.log_zeta = uniform(-1.0, 1.0);
    return s;
  }

 private:
  std::mt19937_64 rng_;
};

inline double rel_diff(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

}  // namespace hjbng::proptest
