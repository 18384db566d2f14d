#include <cmath>

#include <gtest/gtest.h>

#include "hjbng/galerkin.hpp"
#include "hjbng/quadrature.hpp"
#include "support.hpp"

using namespace hjbng;

namespace {

TrialState rates(double b, int n) {
  TrialState s{0.0, std::log(b), std::nullopt};
  if (n > 0) s.log_zeta = std::log(b);
  return s;
}

double integrate_power(const QuadratureRule& rule, int k) {
  double total = 0.0;
  for (int i = 0; i < rule.order; ++i) total += rule.weights[i] * std::pow(rule.nodes[i], k);
  return total;
}

}  // namespace

TEST(LaguerreRule, OnePoint) {
  const QuadratureRule r = laguerre_rule(1);
  ASSERT_EQ(r.nodes.size(), 1u);
  EXPECT_NEAR(r.nodes[0], 1.0, 1e-14);
  EXPECT_NEAR(r.weights[0], 1.0, 1e-14);
}

TEST(LaguerreRule, TwoPoint) {
  const QuadratureRule r = laguerre_rule(2);
  EXPECT_NEAR(r.nodes[0], 2.0 - std::sqrt(2.0), 1e-14);
  EXPECT_NEAR(r.nodes[1], 2.0 + std::sqrt(2.0), 1e-14);
  EXPECT_NEAR(integrate_power(r, 3), 6.0, 1e-13);
}

TEST(LaguerreRule, ExactThroughDegreeTwoQMinusOne) {
  for (int q : {1, 2, 3, 4, 8, 12, 16}) {
    const QuadratureRule r = laguerre_rule(q);
    double factorial = 1.0;
    for (int k = 0; k <= 2 * q - 1; ++k) {
      if (k > 0) factorial *= k;
      EXPECT_LE(std::abs(integrate_power(r, k) - factorial) / factorial, 1e-11)
          << "order " << q << " degree " << k;
    }
  }
}

TEST(LaguerreRule, InexactBeyondDegree) {
  const QuadratureRule r = laguerre_rule(1);
  EXPECT_GT(std::abs(integrate_power(r, 2) - 2.0), 0.5);
}

TEST(LaguerreRule, WeightsPositiveAndNodesIncreasing) {
  for (int q = 1; q <= 64; ++q) {
    const QuadratureRule r = laguerre_rule(q);
    double sum = 0.0;
    for (int i = 0; i < q; ++i) {
      EXPECT_GE(r.weights[i], 0.0);
      if (i > 0) {
        EXPECT_GT(r.nodes[i], r.nodes[i - 1]);
      }
      sum += r.weights[i];
    }
    EXPECT_NEAR(sum, 1.0, 1e-12) << "order " << q;
  }
}

TEST(LaguerreRule, RejectsOrderOutOfRange) {
  EXPECT_THROW(laguerre_rule(0), InvalidParameters);
  EXPECT_THROW(laguerre_rule(65), InvalidParameters);
}

TEST(ExpectPsi2, WealthMoment) {
  EXPECT_NEAR(expect_psi2(rates(2.0, 0), 0, [](double x, const YVector&) { return x; }), 0.5, 1e-14);
}

TEST(ExpectPsi2, PairMoments) {
  const TrialState s = rates(1.0, 2);
  EXPECT_NEAR(expect_psi2(s, 2, [](double, const YVector& y) { return y[0] * y[1]; }), 1.0, 1e-13);
  EXPECT_NEAR(expect_psi2(s, 2, [](double, const YVector& y) { return y[0] * y[0]; }), 2.0, 1e-13);
}

TEST(ExpectPsi2, TripleSum) {
  const double v = expect_psi2(rates(1.0, 2), 2, [](double, const YVector& y) {
    const double s = y.sum();
    return s * s * s;
  });
  EXPECT_NEAR(v, 24.0, 1e-12);
}

TEST(ExpectPsi2, FiveIdentities) {
  for (int n = 1; n <= 3; ++n) {
    for (double b : {0.5, 1.0, 2.0}) {
      const TrialState s = rates(b, n);
      auto E = [&](auto g) { return expect_psi2(s, n, g); };
      auto rel = [](double a, double e) { return std::abs(a - e) / std::abs(e); };
      EXPECT_LE(rel(E([](double x, const YVector&) { return x; }), 1.0 / b), 1e-10);
      for (int i = 0; i < n; ++i) {
        EXPECT_LE(rel(E([i](double, const YVector& y) { return y[i]; }), 1.0 / b), 1e-10);
        for (int j = 0; j < n; ++j) {
          EXPECT_LE(rel(E([i, j](double, const YVector& y) { return y[i] * y[j]; }),
                        ((i == j) + 1.0) / (b * b)),
                    1e-10);
        }
      }
      EXPECT_LE(rel(E([](double, const YVector& y) { return y.squaredNorm() * y.sum(); }),
                    2.0 * n * (n + 2) / (b * b * b)),
                1e-10);
      EXPECT_LE(rel(E([](double, const YVector& y) { return std::pow(y.sum(), 3); }),
                    double((n + 2) * (n + 1) * n) / (b * b * b)),
                1e-10);
    }
  }
}

TEST(ExpectPsi2, Normalized) {
  proptest::Gen gen(19);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = gen.integer(0, 3);
    const TrialState s = gen.state(n > 0);
    EXPECT_NEAR(expect_psi2(s, n, [](double, const YVector&) { return 1.0; }), 1.0, 1e-12);
  }
}

TEST(ExpectPsi2, NeedsZetaForNonTradables) {
  EXPECT_THROW(expect_psi2(rates(1.0, 0), 2, [](double, const YVector&) { return 1.0; }),
               InvalidParameters);
}

TEST(AssembleQuadrature, WealthOnlyMassAndVelocity) {
  MarketParams mp;
  TrialState s{std::log(2.0), 0.0, std::nullopt};
  const GalerkinSystem sys = assemble_MV_quadrature(mp, s);
  EXPECT_NEAR(sys.M(0, 0), 4.0, 1e-12);
  EXPECT_NEAR(sys.M(1, 1), 1.0, 1e-12);
  EXPECT_NEAR(sys.V[0], -0.12, 1e-12);
  EXPECT_NEAR(sys.V[1], 0.05, 1e-12);
}

TEST(AssembleQuadrature, MassOfZetaScalesWithN) {
  MarketParams mp;
  mp.n = 2;
  mp.k = 1.0;
  TrialState s{std::log(2.0), 0.0, 0.0};
  EXPECT_NEAR(assemble_MV_quadrature(mp, s).M(2, 2), 2.0, 1e-12);
}

TEST(AssembleQuadrature, SymmetricPositiveDiagonal) {
  proptest::Gen gen(23);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = gen.integer(0, 3);
    const MarketParams mp = gen.market(n, n > 0 ? 1.0 : 0.0);
    const GalerkinSystem sys = assemble_MV_quadrature(mp, gen.state(n > 0));
    EXPECT_TRUE(sys.M.isApprox(sys.M.transpose(), 1e-14));
    const double trace = sys.M.trace();
    for (int i = 0; i < sys.M.rows(); ++i) {
      EXPECT_GT(sys.M(i, i), 0.0);
      for (int j = 0; j < sys.M.cols(); ++j) {
        if (i != j) {
          EXPECT_LE(std::abs(sys.M(i, j)), 1e-12 * trace);
        }
      }
    }
    EXPECT_TRUE(sys.V.allFinite());
  }
}

TEST(AssembleQuadrature, MatchesClosedFormsForRandomMarkets) {
  proptest::Gen gen(29);
  for (int n : {0, 1}) {
    for (int trial = 0; trial < 10; ++trial) {
      const MarketParams mp = gen.market(n, n > 0 ? 1.0 : 0.0);
      const TrialState s = gen.state(n > 0);
      const GalerkinSystem q = assemble_MV_quadrature(mp, s);
      for (Mode mode : {Mode::paper, Mode::oracle}) {
        const GalerkinSystem c = assemble_closed(mp, s, mode);
        for (int i = 0; i < q.M.rows(); ++i) {
          EXPECT_LE(proptest::rel_diff(q.M(i, i), c.M(i, i)), 1e-10);
          EXPECT_LE(proptest::rel_diff(q.V[i], c.V[i]), 1e-10);
        }
      }
    }
  }
}

TEST(AssembleQuadrature, GeneralNZetaProjection) {
  proptest::Gen gen(31);
  for (int n = 1; n <= 3; ++n) {
    const MarketParams mp = gen.market(n, 1.0);
    const TrialState s = gen.state(true);
    const double a0 = mp.a0, rho = mp.rho;
    const double expected = 0.25 * n * s.alpha() * s.alpha() *
                            (mp.b0 - a0 * rho * mp.lambda + a0 * a0 * (0.5 * (n + 1) * rho * rho - 1.0));
    EXPECT_LE(proptest::rel_diff(assemble_MV_quadrature(mp, s).V[2], expected), 1e-10);
  }
}

TEST(AssembleQuadrature, RejectsMismatchedFamily) {
  MarketParams mp;
  mp.n = 1;
  mp.k = 1.0;
  EXPECT_THROW(assemble_MV_quadrature(mp, TrialState{0.0, 0.0, std::nullopt}), InvalidParameters);
}
