#ifndef MOOGVCF_INTEGRATORS_HPP
#define MOOGVCF_INTEGRATORS_HPP

// Time stepping of the unforced ladder.
//
// step_rk4 is the classical explicit reference. step_discrete_gradient is an
// implicit scheme built on the separable structure of the log-cosh Lyapunov
// function: each V_i(w_i) is replaced by its two-point divided difference
// between w and w', so that V(w') - V(w) = zbar^T (w' - w) telescopes exactly
// and the update (w' - w)/dt = omega0 Q(gbar) zbar inherits dV <= 0 from the
// negative semidefiniteness of Q_s(g) for g >= 1.

#include <array>
#include <cmath>
#include <sstream>
#include <vector>

#include "moogvcf/lyapunov.hpp"
#include "moogvcf/model.hpp"

namespace moogvcf {

enum class Method { ExplicitRK4, DiscreteGradient };

struct StepConfig {
  double dt = 1e-3;
  Method method = Method::DiscreteGradient;
  double newton_tol = 1e-12;
  int newton_max_iter = 50;
};

inline void validate(const StepConfig& cfg) {
  if (!(cfg.dt > 0) || !std::isfinite(cfg.dt)) throw RangeError("dt", "time step must be finite and > 0");
  if (!(cfg.newton_tol > 0)) throw RangeError("newton_tol", "Newton tolerance must be > 0");
  if (cfg.newton_max_iter < 1) throw RangeError("newton_max_iter", "need at least one Newton iteration");
}

template <typename Scalar>
struct Trajectory {
  std::vector<Scalar> times;
  std::vector<State<Scalar>> states;
  std::vector<Scalar> V;
  std::vector<Scalar> Vdot;

  std::size_t size() const { return times.size(); }
};

template <typename Scalar>
State<Scalar> step_rk4(const State<Scalar>& s, const FilterParams<Scalar>& p, Scalar dt) {
  if (!(dt > 0)) throw RangeError("dt", "time step must be > 0");
  const Vector4<Scalar> k1 = rhs_nonlinear(s, p);
  const Vector4<Scalar> k2 = rhs_nonlinear(State<Scalar>{s.x + Scalar(0.5) * dt * k1}, p);
  const Vector4<Scalar> k3 = rhs_nonlinear(State<Scalar>{s.x + Scalar(0.5) * dt * k2}, p);
  const Vector4<Scalar> k4 = rhs_nonlinear(State<Scalar>{s.x + dt * k3}, p);
  return {s.x + dt / Scalar(6) * (k1 + Scalar(2) * k2 + Scalar(2) * k3 + k4)};
}

// ---------------------------------------------------------------------------
// Discrete gradients of c ln cosh(k s)
// ---------------------------------------------------------------------------

/// One separable term c ln cosh(k s) of a Lyapunov-type function.
template <typename Scalar>
struct LogCoshTerm {
  Scalar c{1};
  Scalar k{1};

  Scalar value(Scalar s) const { return c * log_cosh(k * s); }
  Scalar derivative(Scalar s) const {
    using std::tanh;
    return c * k * tanh(k * s);
  }
  Scalar second_derivative(Scalar s) const {
    using std::cosh;
    const Scalar ch = cosh(k * s);
    return c * k * k / (ch * ch);
  }
  Scalar third_derivative(Scalar s) const {
    using std::cosh;
    using std::tanh;
    const Scalar ch = cosh(k * s);
    return Scalar(-2) * c * k * k * k * tanh(k * s) / (ch * ch);
  }
};

namespace detail {

/// Arguments closer than this (relative) count as coincident.
template <typename Scalar>
bool coincident(Scalar a, Scalar b) {
  using std::abs;
  return abs(b - a) < Scalar(1e-12) * std::max(Scalar(1), abs(a));
}

/// ln cosh(u + h) - ln cosh(u) for u >= 0 without cancellation when h is
/// small: cosh(u + h)/cosh(u) = 1 + 2 sinh^2(h/2) + tanh(u) sinh(h).
template <typename Scalar>
Scalar log_cosh_increment(Scalar u, Scalar h) {
  using std::abs;
  using std::log1p;
  using std::sinh;
  using std::tanh;
  if (abs(h) > Scalar(1)) return log_cosh(u + h) - log_cosh(u);
  const Scalar sh = sinh(Scalar(0.5) * h);
  return log1p(Scalar(2) * sh * sh + tanh(u) * sinh(h));
}

/// ln cosh(k b) - ln cosh(k a). ln cosh is even, so work with |k a| and
/// |k b|; for equal signs the increment is taken as k (b - a) to avoid the
/// rounding of k a and k b separately.
template <typename Scalar>
Scalar log_cosh_difference(Scalar k, Scalar a, Scalar b) {
  using std::abs;
  const Scalar u = abs(k * a);
  Scalar h;
  if (a >= Scalar(0) && b >= Scalar(0)) {
    h = k * (b - a);
  } else if (a <= Scalar(0) && b <= Scalar(0)) {
    h = k * (a - b);
  } else {
    h = abs(k * b) - u;
  }
  return log_cosh_increment(u, h);
}

}  // namespace detail

/// (F(b) - F(a)) / (b - a) for F = term, with F'((a+b)/2) at coincidence.
template <typename Scalar>
Scalar divided_difference(const LogCoshTerm<Scalar>& t, Scalar a, Scalar b) {
  if (detail::coincident(a, b)) return t.derivative(Scalar(0.5) * (a + b));
  return t.c * detail::log_cosh_difference(t.k, a, b) / (b - a);
}

/// d/db of divided_difference(t, a, b).
template <typename Scalar>
Scalar divided_difference_slope(const LogCoshTerm<Scalar>& t, Scalar a, Scalar b) {
  using std::abs;
  const Scalar h = b - a;
  if (abs(t.k * h) < Scalar(1e-4)) {
    const Scalar m = Scalar(0.5) * (a + b);
    return Scalar(0.5) * t.second_derivative(m) + t.third_derivative(m) * h / Scalar(12);
  }
  return (t.derivative(b) - divided_difference(t, a, b)) / h;
}

/// Separable pieces of the Lyapunov function in scaled coordinates plus the
/// stage-4 damping potential U4 whose derivative is d^3 tanh(w4/d^3) = g z4.
/// For r = 0 this is the zero-feedback cascade with d = 1 and U4 = V4.
template <typename Scalar>
struct DissipativeSplit {
  std::array<LogCoshTerm<Scalar>, 4> v{};
  LogCoshTerm<Scalar> u4{};
  Scalar d{1};
  Scalar feedback{0};

  explicit DissipativeSplit(const FilterParams<Scalar>& p) {
    d = p.d;
    const Scalar d2 = d * d, d3 = d2 * d;
    v[0] = {Scalar(1), Scalar(1)};
    v[1] = {d2, Scalar(1) / d};
    v[2] = {d2 * d2, Scalar(1) / d2};
    if (p.r > 0) {
      feedback = d;
      v[3] = {d2 / p.alpha4, p.alpha4 / d3};
      u4 = {d3 * d3, Scalar(1) / d3};
    } else {
      feedback = Scalar(0);
      v[3] = {Scalar(1), Scalar(1)};
      u4 = v[3];
    }
  }

  Scalar energy(const Vector4<Scalar>& w) const {
    Scalar e{0};
    for (int i = 0; i < 4; ++i) e += v[i].value(w(i));
    return e;
  }
};

/// Coordinate-wise discrete gradient zbar of the log-cosh Lyapunov function
/// between scaled states a and b; V(b) - V(a) = zbar^T (b - a).
template <typename Scalar>
Vector4<Scalar> discrete_gradient(const ScaledState<Scalar>& a, const ScaledState<Scalar>& b,
                                  const FilterParams<Scalar>& p) {
  const DissipativeSplit<Scalar> split(p);
  Vector4<Scalar> zb;
  for (int i = 0; i < 4; ++i) zb(i) = divided_difference(split.v[i], a.w(i), b.w(i));
  return zb;
}

/// Discrete counterpart of g between w4 and w4': the divided difference of
/// U4 over that of V4. When the V4 quotient vanishes (coincident arguments or
/// w4' = -w4) the limit is g at the common magnitude, g being even.
template <typename Scalar>
Scalar discrete_g(Scalar w4, Scalar w4_next, const FilterParams<Scalar>& p) {
  using std::abs;
  const DissipativeSplit<Scalar> split(p);
  const Scalar zb = divided_difference(split.v[3], w4, w4_next);
  if (zb == Scalar(0) || detail::coincident(w4, w4_next)) {
    return g_of_w4(Scalar(0.5) * (abs(w4) + abs(w4_next)), p);
  }
  return divided_difference(split.u4, w4, w4_next) / zb;
}

namespace detail {

template <typename Scalar>
Vector4<Scalar> dg_residual(const DissipativeSplit<Scalar>& sp, const Vector4<Scalar>& w,
                            const Vector4<Scalar>& wn, Scalar h) {
  Vector4<Scalar> zb;
  for (int i = 0; i < 4; ++i) zb(i) = divided_difference(sp.v[i], w(i), wn(i));
  const Scalar ub = divided_difference(sp.u4, w(3), wn(3));
  Vector4<Scalar> f;
  f << -zb(0) - sp.feedback * zb(3), sp.d * zb(0) - zb(1), sp.d * zb(1) - zb(2), sp.d * zb(2) - ub;
  return wn - w - h * f;
}

template <typename Scalar>
Matrix4<Scalar> dg_jacobian(const DissipativeSplit<Scalar>& sp, const Vector4<Scalar>& w,
                            const Vector4<Scalar>& wn, Scalar h) {
  Vector4<Scalar> dz;
  for (int i = 0; i < 4; ++i) dz(i) = divided_difference_slope(sp.v[i], w(i), wn(i));
  const Scalar du = divided_difference_slope(sp.u4, w(3), wn(3));
  Matrix4<Scalar> df;
  // clang-format off
  df << -dz(0),          0,               0,              -sp.feedback * dz(3),
         sp.d * dz(0),  -dz(1),           0,               0,
         0,              sp.d * dz(1),   -dz(2),           0,
         0,              0,               sp.d * dz(2),   -du;
  // clang-format on
  return Matrix4<Scalar>::Identity() - h * df;
}

}  // namespace detail

/// One discrete-gradient step in scaled coordinates (d from p). Throws
/// ConvergenceError if Newton does not reach cfg.newton_tol (max-norm of the
/// residual) within cfg.newton_max_iter iterations.
template <typename Scalar>
ScaledState<Scalar> step_discrete_gradient_scaled(const ScaledState<Scalar>& s,
                                                  const FilterParams<Scalar>& p,
                                                  const StepConfig& cfg, int* iterations = nullptr) {
  validate(cfg);
  const DissipativeSplit<Scalar> split(p);
  const Scalar h = p.omega0 * Scalar(cfg.dt);
  const Scalar tol = Scalar(cfg.newton_tol);
  const Vector4<Scalar>& w = s.w;

  // Explicit Euler predictor.
  Vector4<Scalar> wn = w + Scalar(cfg.dt) * scaled_rhs(s, p);
  Vector4<Scalar> res = detail::dg_residual(split, w, wn, h);
  Scalar norm = res.template lpNorm<Eigen::Infinity>();
  int it = 0;
  while (!(norm <= tol)) {
    if (it == cfg.newton_max_iter || !std::isfinite(norm)) {
      std::ostringstream msg;
      msg << "Newton iteration did not converge in " << it << " iterations (residual " << norm
          << ")";
      throw ConvergenceError(msg.str(), static_cast<double>(norm));
    }
    ++it;
    const Matrix4<Scalar> jac = detail::dg_jacobian(split, w, wn, h);
    const Vector4<Scalar> delta = jac.partialPivLu().solve(-res);
    Scalar lambda{1};
    Vector4<Scalar> trial = wn + delta;
    Vector4<Scalar> trial_res = detail::dg_residual(split, w, trial, h);
    Scalar trial_norm = trial_res.template lpNorm<Eigen::Infinity>();
    for (int halving = 0; halving < 8 && !(trial_norm < norm); ++halving) {
      lambda *= Scalar(0.5);
      trial = wn + lambda * delta;
      trial_res = detail::dg_residual(split, w, trial, h);
      trial_norm = trial_res.template lpNorm<Eigen::Infinity>();
    }
    wn = trial;
    res = trial_res;
    norm = trial_norm;
  }
  if (iterations != nullptr) *iterations = it;
  return {wn};
}

template <typename Scalar>
State<Scalar> step_discrete_gradient(const State<Scalar>& s, const FilterParams<Scalar>& p,
                                     const StepConfig& cfg) {
  return from_scaled(step_discrete_gradient_scaled(to_scaled(s, p.d), p, cfg), p.d);
}

namespace detail {

/// Advances w by one recorded step of cfg.dt, splitting it into 2^k equal
/// substeps (k <= 10) when Newton fails.
template <typename Scalar>
Vector4<Scalar> dg_advance_with_retry(const Vector4<Scalar>& w, const FilterParams<Scalar>& p,
                                      const StepConfig& cfg, long step_index) {
  double last_residual = 0;
  for (int level = 0; level <= 10; ++level) {
    StepConfig sub = cfg;
    sub.dt = cfg.dt / static_cast<double>(1L << level);
    try {
      ScaledState<Scalar> cur{w};
      for (long k = 0; k < (1L << level); ++k) cur = step_discrete_gradient_scaled(cur, p, sub);
      return cur.w;
    } catch (const ConvergenceError& e) {
      last_residual = e.residual();
    }
  }
  std::ostringstream msg;
  msg << "discrete-gradient step " << step_index << " failed after 10 step halvings (residual "
      << last_residual << ")";
  throw IntegrationError(msg.str(), step_index, last_residual);
}

}  // namespace detail

/// n_steps + 1 samples starting at x0; V and Vdot use the log-cosh function
/// with d = max(1, alpha) (the zero-feedback cascade function when r = 0).
template <typename Scalar>
Trajectory<Scalar> simulate(const State<Scalar>& x0, const FilterParams<Scalar>& p,
                            const StepConfig& cfg, long n_steps) {
  if (n_steps < 1) throw RangeError("n_steps", "need at least one step");
  validate(cfg);
  if (!x0.x.allFinite()) throw RangeError("x0", "initial state must be finite");
  Trajectory<Scalar> tr;
  const auto n = static_cast<std::size_t>(n_steps) + 1;
  tr.times.reserve(n);
  tr.states.reserve(n);
  tr.V.reserve(n);
  tr.Vdot.reserve(n);
  auto record = [&](long idx, const State<Scalar>& x) {
    tr.times.push_back(Scalar(idx) * Scalar(cfg.dt));
    tr.states.push_back(x);
    tr.V.push_back(lyapunov_value(LyapunovKind::LogCosh, x, p));
    tr.Vdot.push_back(lyapunov_rate(LyapunovKind::LogCosh, x, p));
  };
  record(0, x0);
  if (cfg.method == Method::ExplicitRK4) {
    State<Scalar> x = x0;
    for (long k = 1; k <= n_steps; ++k) {
      x = step_rk4(x, p, Scalar(cfg.dt));
      record(k, x);
    }
  } else {
    Vector4<Scalar> w = to_scaled(x0, p.d).w;
    for (long k = 1; k <= n_steps; ++k) {
      w = detail::dg_advance_with_retry(w, p, cfg, k);
      record(k, from_scaled(ScaledState<Scalar>{w}, p.d));
    }
  }
  return tr;
}

}  // namespace moogvcf

#endif  // MOOGVCF_INTEGRATORS_HPP
