#include <cmath>

#include <gtest/gtest.h>

#include "hjbng/galerkin.hpp"
#include "support.hpp"

using namespace hjbng;

namespace {

MarketParams market(int n, double k) {
  MarketParams mp;
  mp.n = n;
  mp.k = k;
  return mp;
}

double max_abs_diff(const TrialState& a, const TrialState& b) {
  return (a.as_vector() - b.as_vector()).cwiseAbs().maxCoeff();
}

}  // namespace

TEST(AssembleClosed, WealthOnly) {
  TrialState s{std::log(2.0), 0.0, std::nullopt};
  const GalerkinSystem sys = assemble_closed(market(0, 0.0), s);
  EXPECT_EQ(sys.p(), 1);
  EXPECT_NEAR(sys.M(0, 0), 4.0, 1e-14);
  EXPECT_NEAR(sys.M(1, 1), 1.0, 1e-14);
  EXPECT_NEAR(sys.V[0], -0.12, 1e-14);
  EXPECT_NEAR(sys.V[1], 0.05, 1e-14);
}

TEST(AssembleClosed, ZetaRateForOneNonTradable) {
  const MarketParams mp = market(1, 1.0);
  const GalerkinSystem sys = assemble_closed(mp, initial_params(mp));
  EXPECT_EQ(sys.p(), 2);
  EXPECT_NEAR(sys.V[2] / sys.M(2, 2), 0.1079, 1e-14);
}

TEST(AssembleClosed, NoPremiumNoRate) {
  MarketParams mp = market(0, 0.0);
  mp.lambda = 0.0;
  mp.r = 0.0;
  const GalerkinSystem sys = assemble_closed(mp, initial_params(mp));
  EXPECT_EQ(sys.V[0], 0.0);
  EXPECT_EQ(sys.V[1], 0.0);
}

TEST(AssembleClosed, OracleModeMatchesQuadrature) {
  proptest::Gen gen(41);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = gen.integer(0, 3);
    const MarketParams mp = gen.market(n, n > 0 ? 1.0 : 0.0);
    const TrialState s = gen.state(n > 0);
    const GalerkinSystem c = assemble_closed(mp, s, Mode::oracle);
    const GalerkinSystem q = assemble_MV_quadrature(mp, s);
    for (int i = 0; i < c.M.rows(); ++i) {
      EXPECT_LE(proptest::rel_diff(c.M(i, i), q.M(i, i)), 1e-10);
      EXPECT_LE(proptest::rel_diff(c.V[i], q.V[i]), 1e-10);
    }
  }
}

TEST(AssembleClosed, FixedZetaNormalizationDiffersFromTwoNonTradables) {
  const MarketParams mp = market(2, 1.0);
  const TrialState s = initial_params(mp);
  EXPECT_NEAR(assemble_closed(mp, s, Mode::paper).M(2, 2), 1.0, 1e-14);
  EXPECT_NEAR(assemble_closed(mp, s, Mode::oracle).M(2, 2), 2.0, 1e-14);
}

TEST(AssembleClosed, DirectionsReproduceRateConstants) {
  proptest::Gen gen(43);
  for (Mode mode : {Mode::paper, Mode::oracle}) {
    for (int trial = 0; trial < 20; ++trial) {
      const int n = gen.integer(0, 4);
      const MarketParams mp = gen.market(n, n > 0 ? 1.0 : 0.0);
      const Eigen::VectorXd v = solve_step_direction(assemble_closed(mp, gen.state(n > 0), mode));
      const RateConstants rc = rate_constants(mp, mode);
      EXPECT_NEAR(v[0], rc.c_alpha, 1e-14);
      EXPECT_NEAR(v[1], rc.c_beta, 1e-14);
      if (n > 0) {
        EXPECT_NEAR(v[2], rc.c_zeta, 1e-14);
      }
    }
  }
}

TEST(AssembleClosed, RejectsMismatchedFamily) {
  EXPECT_THROW(assemble_closed(market(2, 1.0), TrialState{0.0, 0.0, std::nullopt}), InvalidParameters);
}

TEST(SolveStepDirection, Division) {
  GalerkinSystem sys{Eigen::Vector2d(4.0, 1.0).asDiagonal(), Eigen::Vector2d(-0.12, 0.05)};
  const Eigen::VectorXd v = solve_step_direction(sys);
  EXPECT_NEAR(v[0], -0.03, 1e-16);
  EXPECT_NEAR(v[1], 0.05, 1e-16);
}

TEST(SolveStepDirection, IdentityMass) {
  const Eigen::VectorXd rhs = Eigen::Vector3d(1.5, -2.0, 0.25);
  GalerkinSystem sys{Eigen::MatrixXd::Identity(3, 3), rhs};
  EXPECT_EQ(solve_step_direction(sys), rhs);
}

TEST(SolveStepDirection, SmallRegularizationIsHarmless) {
  const MarketParams mp = market(0, 0.0);
  const GalerkinSystem sys = assemble_closed(mp, initial_params(mp));
  const Eigen::VectorXd exact = solve_step_direction(sys);
  const Eigen::VectorXd reg = solve_step_direction(sys, 1e-8);
  for (int i = 0; i < exact.size(); ++i) {
    EXPECT_LT(std::abs(reg[i] - exact[i]) / std::abs(exact[i]), 1e-8);
  }
}

TEST(SolveStepDirection, RejectsIndefiniteMass) {
  GalerkinSystem sys{Eigen::Vector2d(1.0, -1.0).asDiagonal(), Eigen::Vector2d(1.0, 1.0)};
  EXPECT_THROW(solve_step_direction(sys), NotPositiveDefinite);
  GalerkinSystem zero{Eigen::MatrixXd::Zero(2, 2), Eigen::Vector2d(1.0, 1.0)};
  EXPECT_THROW(solve_step_direction(zero), NotPositiveDefinite);
}

TEST(Integrate, FinalWealthRate) {
  const MarketParams mp = market(0, 0.0);
  const Trajectory traj = integrate(mp, initial_params(mp), 1.0, 1e-3);
  EXPECT_EQ(traj.times.size(), 1001u);
  EXPECT_DOUBLE_EQ(traj.times.back(), 1.0);
  EXPECT_NEAR(traj.states.back().beta(), std::exp(0.05), 1e-10);
}

TEST(Integrate, ZeroHorizon) {
  const MarketParams mp = market(1, 1.0);
  const Trajectory traj = integrate(mp, initial_params(mp), 0.0, 1e-3);
  ASSERT_EQ(traj.states.size(), 1u);
  EXPECT_EQ(traj.times[0], 0.0);
  EXPECT_EQ(traj.states[0].as_vector(), initial_params(mp).as_vector());
}

TEST(Integrate, TruncatesTheLastStep) {
  const MarketParams mp = market(0, 0.0);
  const Trajectory traj = integrate(mp, initial_params(mp), 1.0, 0.3);
  ASSERT_EQ(traj.times.size(), 5u);
  EXPECT_DOUBLE_EQ(traj.times.back(), 1.0);
  EXPECT_NEAR(traj.states.back().beta(), std::exp(0.05), 1e-13);
}

TEST(Integrate, AllSchemesMatchClosedForm) {
  for (int n : {0, 1, 2}) {
    const MarketParams mp = market(n, n > 0 ? 1.0 : 0.0);
    const TrialState s0 = initial_params(mp);
    const TrialState exact = evolve(s0, rate_constants(mp), 1.0);
    for (Assembler a : {Assembler::closed, Assembler::quadrature}) {
      for (Method m : {Method::euler, Method::rk4}) {
        IntegrateOptions opt;
        opt.assembler = a;
        opt.method = m;
        const Trajectory traj = integrate(mp, s0, 1.0, 1e-3, opt);
        EXPECT_LE(max_abs_diff(traj.states.back(), exact), 1e-9) << "n=" << n;
      }
    }
  }
}

TEST(Integrate, AssemblersAgreeAlongTrajectory) {
  const MarketParams mp = market(1, 1.0);
  IntegrateOptions q;
  q.assembler = Assembler::quadrature;
  const Trajectory a = integrate(mp, initial_params(mp), 1.0, 1e-2);
  const Trajectory b = integrate(mp, initial_params(mp), 1.0, 1e-2, q);
  for (std::size_t i = 0; i < a.states.size(); ++i) {
    EXPECT_LE(max_abs_diff(a.states[i], b.states[i]), 1e-9);
  }
}

TEST(Integrate, TrajectoryIsAffineInTime) {
  proptest::Gen gen(47);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = gen.integer(0, 3);
    const MarketParams mp = gen.market(n, n > 0 ? 1.0 : 0.0);
    IntegrateOptions opt;
    opt.method = trial % 2 ? Method::euler : Method::rk4;
    const double dt = gen.uniform(1e-3, 1e-2);
    const Trajectory traj = integrate(mp, initial_params(mp), 1.0, dt, opt);
    const Eigen::VectorXd first = traj.states.front().as_vector();
    const Eigen::VectorXd last = traj.states.back().as_vector();
    for (std::size_t i = 0; i < traj.states.size(); ++i) {
      const Eigen::VectorXd line = first + traj.times[i] * (last - first);
      EXPECT_LE((traj.states[i].as_vector() - line).cwiseAbs().maxCoeff(), 1e-9);
    }
  }
}

TEST(Integrate, RejectsBadSteps) {
  const MarketParams mp = market(0, 0.0);
  EXPECT_THROW(integrate(mp, initial_params(mp), 1.0, 0.0), InvalidParameters);
  EXPECT_THROW(integrate(mp, initial_params(mp), -1.0, 0.1), InvalidParameters);
}
