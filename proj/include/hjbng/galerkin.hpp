#pragma once

/// Assembly and time integration of the projected parameter dynamics
/// M(theta) theta' = V(theta).

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "hjbng/errors.hpp"
#include "hjbng/galerkin_system.hpp"
#include "hjbng/model.hpp"
#include "hjbng/quadrature.hpp"
#include "hjbng/trial.hpp"

namespace hjbng {

enum class Assembler { closed, quadrature };
enum class Method { euler, rk4 };

struct Trajectory {
  std::vector<double> times;
  std::vector<TrialState> states;
};

/// Closed-form M and V of the exponential family.  `mode` selects the M33
/// normalization (see Mode); V does not depend on it.
inline GalerkinSystem assemble_closed(const MarketParams& mp, const TrialState& s,
                                      Mode mode = Mode::oracle) {
  const int n = family_dim(mp);
  if (s.has_zeta() != (n > 0)) {
    throw InvalidParameters("trial state does not match the market's parameter family");
  }
  const double a0 = mp.a0, b0 = mp.b0, rho = mp.rho, lam = mp.lambda, r = mp.r;
  const double alpha2 = std::exp(2.0 * s.log_alpha);
  const int size = s.size();

  GalerkinSystem sys{Eigen::MatrixXd::Zero(size, size), Eigen::VectorXd::Zero(size)};
  sys.M(0, 0) = alpha2;
  sys.M(1, 1) = 0.25 * alpha2;
  sys.V[0] = 0.25 * alpha2 *
             (a0 * (n * a0 + 2.0 * n * lam * rho - 0.5 * n * (n + 1) * a0 * rho * rho) -
              2.0 * (n * b0 + r + lam * lam));
  sys.V[1] = 0.25 * alpha2 * r;
  if (n > 0) {
    sys.M(2, 2) = (mode == Mode::oracle ? 0.25 * n : 0.25) * alpha2;
    sys.V[2] = 0.25 * n * alpha2 *
               (b0 - a0 * rho * lam + a0 * a0 * (0.5 * (n + 1) * rho * rho - 1.0));
  }
  return sys;
}

/// theta' = (M + eps_reg I)^-1 V through a Cholesky factorization.
inline Eigen::VectorXd solve_step_direction(const GalerkinSystem& sys, double eps_reg = 0.0) {
  Eigen::MatrixXd shifted = sys.M;
  shifted.diagonal().array() += eps_reg;
  Eigen::LLT<Eigen::MatrixXd> llt(shifted);
  if (llt.info() != Eigen::Success) {
    throw NotPositiveDefinite("Galerkin mass matrix is not positive definite");
  }
  return llt.solve(sys.V);
}

struct IntegrateOptions {
  Assembler assembler = Assembler::closed;
  Method method = Method::rk4;
  Mode mode = Mode::oracle;  ///< M33 convention for the closed assembler
  double eps_reg = 0.0;
  int quadrature_order = kDefaultQuadratureOrder;
};

/// Integrates theta' = M^-1 V from s0 over [0, T] with fixed steps dt; the
/// final step is shortened when dt does not divide T.
inline Trajectory integrate(const MarketParams& mp, const TrialState& s0, double T, double dt,
                            const IntegrateOptions& opt = {}) {
  if (!(dt > 0.0)) throw InvalidParameters("dt must be positive");
  if (!(T >= 0.0)) throw InvalidParameters("T must be non-negative");

  const QuadratureRule rule = opt.assembler == Assembler::quadrature
                                  ? laguerre_rule(opt.quadrature_order)
                                  : QuadratureRule{};
  auto velocity = [&](const Eigen::VectorXd& theta) {
    const TrialState s = TrialState::from_vector(theta);
    const GalerkinSystem sys = opt.assembler == Assembler::closed
                                   ? assemble_closed(mp, s, opt.mode)
                                   : assemble_MV_quadrature(mp, s, rule);
    return solve_step_direction(sys, opt.eps_reg);
  };

  Trajectory traj;
  traj.times.push_back(0.0);
  traj.states.push_back(s0);
  Eigen::VectorXd theta = s0.as_vector();
  const auto steps = static_cast<long>(std::ceil(T / dt - 1e-9));
  for (long i = 0; i < steps; ++i) {
    const double t = i * dt;
    const double h = std::min(dt, T - t);
    if (opt.method == Method::euler) {
      theta += h * velocity(theta);
    } else {
      const Eigen::VectorXd k1 = velocity(theta);
      const Eigen::VectorXd k2 = velocity(theta + 0.5 * h * k1);
      const Eigen::VectorXd k3 = velocity(theta + 0.5 * h * k2);
      const Eigen::VectorXd k4 = velocity(theta + h * k3);
      theta += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    traj.times.push_back(i + 1 == steps ? T : (i + 1) * dt);
    traj.states.push_back(TrialState::from_vector(theta));
  }
  return traj;
}

}  // namespace hjbng
