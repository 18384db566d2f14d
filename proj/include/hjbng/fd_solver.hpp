#pragma once

/// Explicit finite differences for the time-reversed HJB on the box [0, L]^d,
/// d = n + 1 (wealth first, then the non-tradable coordinates).
///
/// Interior derivatives are second-order central differences; mixed
/// derivatives are the 4-point cross stencil.  On a face, first derivatives
/// use the one-sided 3-point formula and second derivatives a ghost node
/// obtained by cubic extrapolation, which keeps u_xx second-order accurate on
/// the faces.  Time stepping is forward Euler.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "hjbng/errors.hpp"
#include "hjbng/model.hpp"

namespace hjbng {

inline constexpr int kMaxGridDim = 3;

struct Grid {
  int d = 1;
  int N = 4;
  double L = 4.0;

  Grid() = default;
  Grid(int d_, int N_, double L_ = 4.0) : d(d_), N(N_), L(L_) {
    if (d < 1 || d > kMaxGridDim) throw InvalidParameters("grid dimension must be 1, 2 or 3");
    if (N < 2 || N > 12) throw InvalidParameters("grid refinement N must lie in [2, 12]");
    if (!(L > 0.0)) throw InvalidParameters("box edge L must be positive");
  }

  int points() const { return (1 << N) + 1; }
  double h() const { return L / (1 << N); }
  std::size_t size() const {
    std::size_t s = 1;
    for (int a = 0; a < d; ++a) s *= static_cast<std::size_t>(points());
    return s;
  }
  std::size_t stride(int axis) const {
    std::size_t s = 1;
    for (int a = 0; a < axis; ++a) s *= static_cast<std::size_t>(points());
    return s;
  }

  using Index = std::array<int, kMaxGridDim>;

  Index unflatten(std::size_t flat) const {
    Index idx{0, 0, 0};
    const auto P = static_cast<std::size_t>(points());
    for (int a = 0; a < d; ++a) {
      idx[a] = static_cast<int>(flat % P);
      flat /= P;
    }
    return idx;
  }
  std::size_t flatten(const Index& idx) const {
    std::size_t flat = 0;
    for (int a = d - 1; a >= 0; --a) flat = flat * static_cast<std::size_t>(points()) + idx[a];
    return flat;
  }
  SpacePoint point(const Index& idx) const {
    SpacePoint p;
    p.x = idx[0] * h();
    p.y.resize(d - 1);
    for (int a = 1; a < d; ++a) p.y[a - 1] = idx[a] * h();
    return p;
  }
  /// Node index of the coordinate c along an axis, if c is a node.
  std::optional<int> node_of(double c) const {
    const double pos = c / h();
    const double rounded = std::round(pos);
    if (std::abs(pos - rounded) > 1e-9 || rounded < 0 || rounded > points() - 1) {
      return std::nullopt;
    }
    return static_cast<int>(rounded);
  }
};

struct Field {
  Grid grid;
  std::vector<double> values;
  double t = 0.0;

  double at(const Grid::Index& idx) const { return values[grid.flatten(idx)]; }
};

struct FdDiagnostics {
  long steps = 0;
  double dt = 0.0;
  long clamped_nodes = 0;  ///< node updates where u_xx hit the singular floor
};

inline Field init_field(const Grid& grid, const MarketParams& mp) {
  if (grid.d != mp.n + 1) {
    throw InvalidParameters("grid dimension " + std::to_string(grid.d) +
                            " does not match n + 1 = " + std::to_string(mp.n + 1));
  }
  validate(mp);
  Field f{grid, std::vector<double>(grid.size()), 0.0};
  for (std::size_t i = 0; i < f.values.size(); ++i) {
    f.values[i] = terminal_payoff(mp, grid.point(grid.unflatten(i)));
  }
  return f;
}

namespace detail {

/// Stencil of a first derivative along one axis: offsets and weights (times 1/h).
struct FirstStencil {
  std::array<int, 3> offset;
  std::array<double, 3> weight;
};

inline FirstStencil first_stencil(int i, int P) {
  if (i == 0) return {{0, 1, 2}, {-1.5, 2.0, -0.5}};
  if (i == P - 1) return {{0, -1, -2}, {1.5, -2.0, 0.5}};
  return {{-1, 1, 0}, {-0.5, 0.5, 0.0}};
}

class JetEvaluator {
 public:
  explicit JetEvaluator(const Field& f) : f_(f), P_(f.grid.points()), h_(f.grid.h()) {
    for (int a = 0; a < f.grid.d; ++a) stride_[a] = static_cast<long>(f.grid.stride(a));
  }

  double first(std::size_t flat, const Grid::Index& idx, int axis) const {
    const FirstStencil s = first_stencil(idx[axis], P_);
    double acc = 0.0;
    for (int k = 0; k < 3; ++k) acc += s.weight[k] * value(flat, axis, s.offset[k]);
    return acc / h_;
  }

  double second(std::size_t flat, const Grid::Index& idx, int axis) const {
    const int i = idx[axis];
    double lo, mid, hi;
    if (i == 0) {
      // ghost u_{-1} = 4 u_0 - 6 u_1 + 4 u_2 - u_3 (cubic extrapolation)
      mid = value(flat, axis, 0);
      hi = value(flat, axis, 1);
      lo = 4.0 * mid - 6.0 * hi + 4.0 * value(flat, axis, 2) - value(flat, axis, 3);
    } else if (i == P_ - 1) {
      mid = value(flat, axis, 0);
      lo = value(flat, axis, -1);
      hi = 4.0 * mid - 6.0 * lo + 4.0 * value(flat, axis, -2) - value(flat, axis, -3);
    } else {
      lo = value(flat, axis, -1);
      mid = value(flat, axis, 0);
      hi = value(flat, axis, 1);
    }
    return (lo - 2.0 * mid + hi) / (h_ * h_);
  }

  /// d/da d/db u: the first-derivative stencil along a applied to first
  /// derivatives along b.  Reduces to the 4-point cross in the interior.
  double mixed(std::size_t flat, const Grid::Index& idx, int a, int b) const {
    const FirstStencil s = first_stencil(idx[a], P_);
    double acc = 0.0;
    for (int k = 0; k < 3; ++k) {
      if (s.weight[k] == 0.0) continue;
      Grid::Index shifted = idx;
      shifted[a] += s.offset[k];
      const std::size_t shifted_flat = flat + s.offset[k] * stride_[a];
      acc += s.weight[k] * first(shifted_flat, shifted, b);
    }
    return acc / h_;
  }

  UJet jet(std::size_t flat, const Grid::Index& idx) const {
    const int n = f_.grid.d - 1;
    UJet j(n);
    j.u = f_.values[flat];
    j.u_x = first(flat, idx, 0);
    j.u_xx = second(flat, idx, 0);
    for (int i = 0; i < n; ++i) {
      j.grad_y[i] = first(flat, idx, i + 1);
      j.mixed_xy[i] = mixed(flat, idx, 0, i + 1);
      j.hess_y(i, i) = second(flat, idx, i + 1);
      for (int k = 0; k < i; ++k) {
        j.hess_y(i, k) = j.hess_y(k, i) = mixed(flat, idx, i + 1, k + 1);
      }
    }
    return j;
  }

 private:
  double value(std::size_t flat, int axis, int offset) const {
    return f_.values[static_cast<std::size_t>(static_cast<long>(flat) + offset * stride_[axis])];
  }

  const Field& f_;
  int P_;
  double h_;
  std::array<long, kMaxGridDim> stride_{};
};

inline void advance(Field& field, const MarketParams& mp, double dt, FdDiagnostics* diag) {
  const JetEvaluator eval(field);
  std::vector<double> next(field.values.size());
  long clamped = 0;
  for (std::size_t i = 0; i < next.size(); ++i) {
    const Grid::Index idx = field.grid.unflatten(i);
    const UJet jet = eval.jet(i, idx);
    bool hit = false;
    const double F = rhs_F_guarded(mp, field.grid.point(idx), jet, hit);
    if (hit) ++clamped;
    next[i] = field.values[i] + dt * F;
  }
  field.values = std::move(next);
  field.t += dt;
  if (diag) {
    diag->clamped_nodes += clamped;
    ++diag->steps;
  }
}

}  // namespace detail

/// Largest stable forward-Euler step for the current field:
///   dt = 0.9 h^2 / (2 d D_max + h A_max),
/// where D_max bounds the linearized diffusion matrix (Gershgorin row sums,
/// including the effective x-diffusion of the optimal-control quotient) and
/// A_max the total advection speed.
inline double cfl_bound(const Field& field, const MarketParams& mp) {
  const detail::JetEvaluator eval(field);
  const int n = field.grid.d - 1;
  double d_max = 0.0;
  double a_max = 0.0;
  for (std::size_t i = 0; i < field.values.size(); ++i) {
    const Grid::Index idx = field.grid.unflatten(i);
    const SpacePoint p = field.grid.point(idx);
    const UJet jet = eval.jet(i, idx);
    const double u_xx = std::max(jet.u_xx, singular_threshold(jet.u));
    double cross = 0.0;
    for (int k = 0; k < n; ++k) cross += p.y[k] * jet.mixed_xy[k];
    const double q = mp.rho * mp.a0 * cross + mp.lambda * jet.u_x;

    const double d_xx = q * q / (2.0 * u_xx * u_xx);
    double row_x = d_xx;
    double adv = std::abs(mp.r * p.x - mp.lambda * q / u_xx);
    for (int k = 0; k < n; ++k) {
      const double half_mixed = 0.5 * std::abs(q * mp.rho * mp.a0 * p.y[k] / u_xx);
      row_x += half_mixed;
      d_max = std::max(d_max, 0.5 * mp.a0 * mp.a0 * p.y[k] * p.y[k] + half_mixed);
      adv += std::abs(mp.b0 * p.y[k]);
    }
    d_max = std::max(d_max, row_x);
    a_max = std::max(a_max, adv);
  }
  const double h = field.grid.h();
  const double denom = 2.0 * field.grid.d * d_max + h * a_max;
  return denom > 0.0 ? 0.9 * h * h / denom : std::numeric_limits<double>::infinity();
}

/// One forward-Euler step.  Throws CflViolation when dt exceeds cfl_bound.
inline Field step(const Field& field, const MarketParams& mp, double dt,
                  FdDiagnostics* diag = nullptr) {
  if (!(dt > 0.0)) throw InvalidParameters("dt must be positive");
  const double bound = cfl_bound(field, mp);
  if (dt > bound * (1.0 + 1e-12)) {
    throw CflViolation("dt = " + std::to_string(dt) + " exceeds the stability bound " +
                       std::to_string(bound));
  }
  Field next = field;
  detail::advance(next, mp, dt, diag);
  return next;
}

/// Field at reversed time T.  Without an explicit dt the step is the CFL
/// bound of the initial field; the last step is shortened to land on T.
inline Field solve(const Grid& grid, const MarketParams& mp, double T,
                   std::optional<double> dt = std::nullopt, FdDiagnostics* diag = nullptr) {
  Field field = init_field(grid, mp);
  if (T <= 0.0) return field;
  const double bound = cfl_bound(field, mp);
  double h = dt.value_or(bound);
  if (dt) {
    if (!(*dt > 0.0)) throw InvalidParameters("dt must be positive");
    if (*dt > bound * (1.0 + 1e-12)) {
      throw CflViolation("dt = " + std::to_string(*dt) + " exceeds the stability bound " +
                         std::to_string(bound));
    }
  }
  if (diag) diag->dt = h;
  const auto steps = static_cast<long>(std::ceil(T / h - 1e-9));
  for (long s = 0; s < steps; ++s) {
    const double remaining = T - s * h;
    detail::advance(field, mp, std::min(h, remaining), diag);
  }
  field.t = T;
  return field;
}

// ---------------------------------------------------------------------------
// Error metrics

/// Either a finite-difference field or an analytic function of the point.
class SolutionView {
 public:
  SolutionView(const Field& field) : source_(&field) {}  // NOLINT(google-explicit-constructor)
  template <class Fn>
    requires std::is_invocable_r_v<double, const Fn&, const SpacePoint&>
  SolutionView(Fn fn)  // NOLINT(google-explicit-constructor)
      : source_(std::function<double(const SpacePoint&)>(std::move(fn))) {}

  double at(const Grid& grid, const Grid::Index& idx) const {
    if (const auto* field = std::get_if<const Field*>(&source_)) {
      const Grid& own = (*field)->grid;
      if (own.d != grid.d || std::abs(own.L - grid.L) > 1e-12 || own.N < grid.N) {
        throw DomainMismatch("field on (d=" + std::to_string(own.d) +
                             ", N=" + std::to_string(own.N) +
                             ") cannot be evaluated on (d=" + std::to_string(grid.d) +
                             ", N=" + std::to_string(grid.N) + ")");
      }
      const int scale = 1 << (own.N - grid.N);
      Grid::Index fine = idx;
      for (int a = 0; a < grid.d; ++a) fine[a] *= scale;
      return (*field)->at(fine);
    }
    return std::get<std::function<double(const SpacePoint&)>>(source_)(grid.point(idx));
  }

 private:
  std::variant<const Field*, std::function<double(const SpacePoint&)>> source_;
};

enum class MetricKind { mean_abs, mean_abs_log10, mean_rel_pct, pointwise_abs, slice_mean };

inline const char* to_string(MetricKind m) {
  switch (m) {
    case MetricKind::mean_abs: return "mean_abs";
    case MetricKind::mean_abs_log10: return "mean_abs_log10";
    case MetricKind::mean_rel_pct: return "mean_rel_pct";
    case MetricKind::pointwise_abs: return "pointwise_abs";
    case MetricKind::slice_mean: return "slice_mean";
  }
  return "?";
}

inline std::optional<MetricKind> metric_from_string(const std::string& s) {
  for (auto m : {MetricKind::mean_abs, MetricKind::mean_abs_log10, MetricKind::mean_rel_pct,
                 MetricKind::pointwise_abs, MetricKind::slice_mean}) {
    if (s == to_string(m)) return m;
  }
  return std::nullopt;
}

struct Metric {
  MetricKind kind = MetricKind::mean_abs;
  std::optional<SpacePoint> probe;  ///< pointwise_abs
  double slice_x = 0.0;             ///< slice_mean

  static Metric mean_abs() { return {MetricKind::mean_abs, std::nullopt, 0.0}; }
  static Metric mean_abs_log10() { return {MetricKind::mean_abs_log10, std::nullopt, 0.0}; }
  static Metric mean_rel_pct() { return {MetricKind::mean_rel_pct, std::nullopt, 0.0}; }
  static Metric pointwise_abs(SpacePoint p) { return {MetricKind::pointwise_abs, p, 0.0}; }
  static Metric slice_mean(double x) { return {MetricKind::slice_mean, std::nullopt, x}; }
};

struct ErrorReport {
  std::string metric;
  double value = 0.0;
  int d = 0;
  int N = 0;
  std::optional<SpacePoint> probe;
  std::optional<double> slice_x;
};

/// Compares `a` against the reference `b` on the nodes of `grid`.
inline ErrorReport error_report(const SolutionView& a, const SolutionView& b, const Grid& grid,
                                const Metric& metric) {
  ErrorReport rep{to_string(metric.kind), 0.0, grid.d, grid.N, std::nullopt, std::nullopt};

  if (metric.kind == MetricKind::pointwise_abs) {
    if (!metric.probe || metric.probe->y.size() != grid.d - 1) {
      throw DomainMismatch("probe point dimension does not match the grid");
    }
    Grid::Index idx{0, 0, 0};
    for (int ax = 0; ax < grid.d; ++ax) {
      const double c = ax == 0 ? metric.probe->x : metric.probe->y[ax - 1];
      const auto node = grid.node_of(c);
      if (!node) throw DomainMismatch("probe point is not a grid node");
      idx[ax] = *node;
    }
    rep.value = std::abs(a.at(grid, idx) - b.at(grid, idx));
    rep.probe = metric.probe;
    return rep;
  }

  std::optional<int> slice_node;
  if (metric.kind == MetricKind::slice_mean) {
    slice_node = grid.node_of(metric.slice_x);
    if (!slice_node) throw DomainMismatch("slice x is not a grid node");
    rep.slice_x = metric.slice_x;
  }

  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Grid::Index idx = grid.unflatten(i);
    if (slice_node && idx[0] != *slice_node) continue;
    const double va = a.at(grid, idx);
    const double vb = b.at(grid, idx);
    total += metric.kind == MetricKind::mean_rel_pct ? std::abs(va - vb) / std::abs(vb)
                                                     : std::abs(va - vb);
    ++count;
  }
  const double mean = total / static_cast<double>(count);
  switch (metric.kind) {
    case MetricKind::mean_abs_log10: rep.value = std::log10(mean); break;
    case MetricKind::mean_rel_pct: rep.value = 100.0 * mean; break;
    default: rep.value = mean; break;
  }
  return rep;
}

}  // namespace hjbng
