#pragma once

/// Gauss-Laguerre evaluation of inner products over [0, inf)^(n+1).
///
/// |psi_theta|^2 is the product exponential density with rate beta in x and
/// rate zeta in each y_i, so every <psi| g |psi> is an expectation.  After the
/// substitution s = beta x, v_i = zeta y_i the weight becomes exp(-s - sum v)
/// and a q-point rule per axis is exact for per-variable degree <= 2q - 1,
/// independently of beta and zeta.

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "hjbng/errors.hpp"
#include "hjbng/galerkin_system.hpp"
#include "hjbng/model.hpp"
#include "hjbng/trial.hpp"

namespace hjbng {

inline constexpr int kDefaultQuadratureOrder = 8;

struct QuadratureRule {
  int order = 0;
  std::vector<double> nodes;    ///< abscissae on [0, inf), increasing
  std::vector<double> weights;  ///< weights against exp(-s)
};

/// Gauss-Laguerre rule of the given order; Newton on the three-term
/// recurrence from the usual asymptotic starting guesses.
inline QuadratureRule laguerre_rule(int order) {
  if (order < 1 || order > 64) {
    throw InvalidParameters("Gauss-Laguerre order must lie in [1, 64], got " +
                            std::to_string(order));
  }
  constexpr int kMaxIterations = 100;
  constexpr double kTolerance = 1e-14;

  QuadratureRule rule;
  rule.order = order;
  rule.nodes.resize(order);
  rule.weights.resize(order);
  const int n = order;
  double z = 0.0;
  for (int i = 0; i < n; ++i) {
    if (i == 0) {
      z = 3.0 / (1.0 + 2.4 * n);
    } else if (i == 1) {
      z += 15.0 / (1.0 + 2.5 * n);
    } else {
      const double ai = i - 1;
      z += (1.0 + 2.55 * ai) / (1.9 * ai) * (z - rule.nodes[i - 2]);
    }
    double p1 = 0.0, p2 = 0.0, pp = 0.0;
    bool converged = false;
    for (int it = 0; it < kMaxIterations; ++it) {
      p1 = 1.0;
      p2 = 0.0;
      for (int j = 1; j <= n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = ((2.0 * j - 1.0 - z) * p2 - (j - 1.0) * p3) / j;
      }
      pp = (n * p1 - n * p2) / z;
      const double z_prev = z;
      z = z_prev - p1 / pp;
      if (std::abs(z - z_prev) <= kTolerance * std::max(1.0, std::abs(z))) {
        converged = true;
        break;
      }
    }
    if (!converged || !std::isfinite(z) || z <= 0.0 || (i > 0 && z <= rule.nodes[i - 1])) {
      throw ConvergenceFailure("Laguerre node " + std::to_string(i) + " of order " +
                               std::to_string(n) + " did not converge");
    }
    // Re-evaluate at the converged root so the weight uses consistent values.
    p1 = 1.0;
    p2 = 0.0;
    for (int j = 1; j <= n; ++j) {
      const double p3 = p2;
      p2 = p1;
      p1 = ((2.0 * j - 1.0 - z) * p2 - (j - 1.0) * p3) / j;
    }
    pp = (n * p1 - n * p2) / z;
    rule.nodes[i] = z;
    rule.weights[i] = -1.0 / (pp * n * p2);
    if (!(rule.weights[i] > 0.0)) {
      throw ConvergenceFailure("non-positive Laguerre weight at node " + std::to_string(i));
    }
  }
  return rule;
}

/// Calls visit(weight, x, y) for every tensor-product node of the density
/// |psi_theta|^2 with n non-tradable coordinates.  The wealth-only family is
/// only normalizable with n = 0.
template <class Visitor>
void for_each_node(const TrialState& s, int n, const QuadratureRule& rule, Visitor&& visit) {
  if (n > 0 && !s.has_zeta()) {
    throw InvalidParameters("a trial without zeta is not normalizable in y");
  }
  const int q = rule.order;
  const double inv_beta = 1.0 / s.beta();
  const double inv_zeta = n > 0 ? 1.0 / s.zeta() : 0.0;
  const int dims = n + 1;

  std::vector<int> idx(dims, 0);
  YVector y(n);
  while (true) {
    double w = rule.weights[idx[0]];
    const double x = rule.nodes[idx[0]] * inv_beta;
    for (int i = 0; i < n; ++i) {
      w *= rule.weights[idx[i + 1]];
      y[i] = rule.nodes[idx[i + 1]] * inv_zeta;
    }
    visit(w, x, static_cast<const YVector&>(y));

    int axis = 0;
    while (axis < dims && ++idx[axis] == q) {
      idx[axis] = 0;
      ++axis;
    }
    if (axis == dims) break;
  }
}

/// Expectation of g(x, y) under |psi_theta|^2, i.e. <psi| g |psi>.
/// `g` is called as g(double x, const YVector& y).
template <class Integrand>
double expect_psi2(const TrialState& s, int n, Integrand&& g, const QuadratureRule& rule) {
  double total = 0.0;
  for_each_node(s, n, rule, [&](double w, double x, const YVector& y) { total += w * g(x, y); });
  return total;
}

template <class Integrand>
double expect_psi2(const TrialState& s, int n, Integrand&& g) {
  return expect_psi2(s, n, std::forward<Integrand>(g), laguerre_rule(kDefaultQuadratureOrder));
}

/// M_ij = <du/dtheta_i | du/dtheta_j>, V_i = <du/dtheta_i | F[u_theta]>, both
/// evaluated by quadrature with F taken from the model's right-hand side.
inline GalerkinSystem assemble_MV_quadrature(const MarketParams& mp, const TrialState& s,
                                             const QuadratureRule& rule) {
  const int n = family_dim(mp);
  if (s.has_zeta() != (n > 0)) {
    throw InvalidParameters("trial state does not match the market's parameter family");
  }
  using Small = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 3, 1>;
  const int size = s.size();
  const double beta = s.beta();
  const double zeta = s.zeta();
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(size, size);
  Eigen::VectorXd proj = Eigen::VectorXd::Zero(size);
  Small g(size);
  // F is degree-1 homogeneous in the jet; normalizing to u = 1 keeps the
  // far-field nodes clear of the absolute u_xx guard.  The exponential's
  // normalized jet is the same at every point.
  const SpacePoint origin = SpacePoint::uniform(0.0, n, 0.0);
  const UJet at_origin = trial_jet(s, n, origin);
  const UJet unit = at_origin.scaled(1.0 / at_origin.u);
  for_each_node(s, n, rule, [&](double w, double x, const YVector& y) {
    const SpacePoint p{x, y};
    const double f_over_u = rhs_F(mp, p, unit);
    g[0] = 1.0;
    g[1] = 0.5 * (1.0 - beta * x);
    if (size > 2) g[2] = 0.5 * (n - zeta * y.sum());
    gram.noalias() += w * g * g.transpose();
    proj.noalias() += (w * f_over_u) * g;
  });
  const double alpha2 = std::exp(2.0 * s.log_alpha);
  return GalerkinSystem{alpha2 * gram, alpha2 * proj};
}

inline GalerkinSystem assemble_MV_quadrature(const MarketParams& mp, const TrialState& s) {
  return assemble_MV_quadrature(mp, s, laguerre_rule(kDefaultQuadratureOrder));
}

}  // namespace hjbng
