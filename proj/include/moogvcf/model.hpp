#ifndef MOOGVCF_MODEL_HPP
#define MOOGVCF_MODEL_HPP

// Autonomous nonlinear Moog ladder model, its linearization, the diagonal
// scaling w = D x and the (z, Q, g, G) factorization of the scaled field.

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <utility>

#include "moogvcf/types.hpp"

namespace moogvcf {

/// Cutoff omega0 (rad/s) and resonance r in [0, 1], with the derived
/// feedback base alpha = sqrt(2) r^(1/4) and scaling base d = max(1, alpha).
///
/// alpha^4 is stored as 4 r rather than pow(alpha, 4) so that every formula
/// using the feedback gain sees the exact value. d^4 is stored for the same
/// reason (it equals alpha^4 whenever d = alpha).
template <typename Scalar>
struct FilterParams {
  Scalar omega0{1};
  Scalar r{0};
  Scalar alpha{0};
  Scalar alpha4{0};
  Scalar d{1};
  Scalar d4{1};
};

using FilterParamsd = FilterParams<double>;

template <typename Scalar>
FilterParams<Scalar> make_params(Scalar omega0, Scalar r) {
  if (!(omega0 > 0) || !std::isfinite(omega0)) {
    std::ostringstream msg;
    msg << "omega0 must be finite and > 0, got " << omega0;
    throw RangeError("omega0", msg.str());
  }
  if (!(r >= 0 && r <= 1)) {
    std::ostringstream msg;
    msg << "r must lie in [0, 1], got " << r;
    throw RangeError("r", msg.str());
  }
  using std::pow;
  using std::sqrt;
  FilterParams<Scalar> p;
  p.omega0 = omega0;
  p.r = r;
  p.alpha = sqrt(Scalar(2)) * pow(r, Scalar(0.25));
  p.alpha4 = Scalar(4) * r;
  // Decided on the exact r rather than the rounded alpha, so r = 1/4 stays
  // in the d = 1 case.
  if (r > Scalar(0.25)) {
    p.d = p.alpha;
    p.d4 = p.alpha4;
  } else {
    p.d = Scalar(1);
    p.d4 = Scalar(1);
  }
  return p;
}

/// dx/dt of the unforced ladder.
template <typename Scalar>
Vector4<Scalar> rhs_nonlinear(const State<Scalar>& s, const FilterParams<Scalar>& p) {
  using std::tanh;
  const auto& x = s.x;
  const Scalar t1 = tanh(x(0)), t2 = tanh(x(1)), t3 = tanh(x(2)), t4 = tanh(x(3));
  Vector4<Scalar> f;
  f << -t1 - tanh(p.alpha4 * x(3)), -t2 + t1, -t3 + t2, -t4 + t3;
  return p.omega0 * f;
}

/// Jacobian of rhs_nonlinear at the origin.
template <typename Scalar>
Matrix4<Scalar> matrix_A(const FilterParams<Scalar>& p) {
  Matrix4<Scalar> a;
  // clang-format off
  a << -1,  0,  0, -p.alpha4,
        1, -1,  0,  0,
        0,  1, -1,  0,
        0,  0,  1, -1;
  // clang-format on
  return p.omega0 * a;
}

/// Linear system matrix in the coordinates w = diag(1, a, a^2, a^3) x.
/// Defined for every alpha; at alpha = 0 it reduces to -omega0 I.
template <typename Scalar>
Matrix4<Scalar> matrix_B(const FilterParams<Scalar>& p) {
  const Scalar a = p.alpha;
  Matrix4<Scalar> b;
  // clang-format off
  b << -1,  0,  0, -a,
        a, -1,  0,  0,
        0,  a, -1,  0,
        0,  0,  a, -1;
  // clang-format on
  return p.omega0 * b;
}

namespace detail {
template <typename Scalar>
void require_positive_scale(Scalar d) {
  if (!(d > 0) || !std::isfinite(d)) {
    std::ostringstream msg;
    msg << "scaling base must be finite and > 0, got " << d;
    throw RangeError("d", msg.str());
  }
}

template <typename Scalar>
Vector4<Scalar> scale_powers(Scalar d) {
  return Vector4<Scalar>(Scalar(1), d, d * d, d * d * d);
}
}  // namespace detail

/// D = diag(1, d, d^2, d^3).
template <typename Scalar>
Matrix4<Scalar> matrix_D(Scalar d) {
  detail::require_positive_scale(d);
  return detail::scale_powers(d).asDiagonal();
}

template <typename Scalar>
ScaledState<Scalar> to_scaled(const State<Scalar>& s, Scalar d) {
  detail::require_positive_scale(d);
  return {s.x.cwiseProduct(detail::scale_powers(d))};
}

template <typename Scalar>
State<Scalar> from_scaled(const ScaledState<Scalar>& s, Scalar d) {
  detail::require_positive_scale(d);
  return {s.w.cwiseQuotient(detail::scale_powers(d))};
}

/// dw/dt written directly in scaled coordinates, using d from p.
template <typename Scalar>
Vector4<Scalar> scaled_rhs(const ScaledState<Scalar>& s, const FilterParams<Scalar>& p) {
  using std::tanh;
  const auto& w = s.w;
  const Scalar d = p.d, d2 = d * d, d3 = d2 * d;
  const Scalar t1 = tanh(w(0));
  const Scalar t2 = tanh(w(1) / d);
  const Scalar t3 = tanh(w(2) / d2);
  Vector4<Scalar> f;
  f << -t1 - tanh(p.alpha4 * w(3) / d3), d * (t1 - t2), d2 * (t2 - t3), d3 * (t3 - tanh(w(3) / d3));
  return p.omega0 * f;
}

/// z = grad V for the log-cosh Lyapunov function. For alpha = 0 the
/// feedback component is identically zero.
template <typename Scalar>
Vector4<Scalar> z_vector(const ScaledState<Scalar>& s, const FilterParams<Scalar>& p) {
  using std::tanh;
  const auto& w = s.w;
  const Scalar d = p.d, d2 = d * d, d3 = d2 * d;
  return Vector4<Scalar>(tanh(w(0)), d * tanh(w(1) / d), d2 * tanh(w(2) / d2),
                         tanh(p.alpha4 * w(3) / d3) / d);
}

/// Closed bounds of g over all w4: [min(d^4, d^4/alpha^4), max(...)].
template <typename Scalar>
std::pair<Scalar, Scalar> g_bounds(const FilterParams<Scalar>& p) {
  if (!(p.alpha > 0)) throw DomainError("g is undefined for alpha = 0");
  const Scalar at_zero = p.d4 / p.alpha4;
  return {std::min(p.d4, at_zero), std::max(p.d4, at_zero)};
}

/// g(w4) = d^4 tanh(w4/d^3) / tanh(alpha^4 w4/d^3).
///
/// Both tanh arguments below 1e-8 in magnitude means the ratio equals the
/// ratio of arguments to within an ulp, so the removable singularity at 0 is
/// evaluated as d^4/alpha^4 there. The result is clamped to g_bounds, which
/// only ever moves it by rounding error.
template <typename Scalar>
Scalar g_of_w4(Scalar w4, const FilterParams<Scalar>& p) {
  using std::abs;
  using std::tanh;
  const auto [lo, hi] = g_bounds(p);
  const Scalar d3 = p.d * p.d * p.d;
  const Scalar u = w4 / d3;
  const Scalar v = p.alpha4 * u;
  if (std::max(abs(u), abs(v)) < Scalar(1e-8)) return p.d4 / p.alpha4;
  const Scalar g = p.d4 * tanh(u) / tanh(v);
  return std::clamp(g, lo, hi);
}

template <typename Scalar>
Matrix4<Scalar> matrix_Q(const FilterParams<Scalar>& p, Scalar g) {
  const Scalar d = p.d;
  Matrix4<Scalar> q;
  // clang-format off
  q << -1,  0,  0, -d,
        d, -1,  0,  0,
        0,  d, -1,  0,
        0,  0,  d, -g;
  // clang-format on
  return q;
}

/// f = (2/d)(1 - g), the only g-dependent entry of G.
template <typename Scalar>
Scalar f_scalar(Scalar g, Scalar d) {
  detail::require_positive_scale(d);
  return Scalar(2) / d * (Scalar(1) - g);
}

template <typename Scalar>
Matrix4<Scalar> matrix_G(Scalar f) {
  Matrix4<Scalar> m;
  // clang-format off
  m <<  0, 1, 0, -1,
        1, 0, 1,  0,
        0, 1, 0,  1,
       -1, 0, 1,  f;
  // clang-format on
  return m;
}

}  // namespace moogvcf

#endif  // MOOGVCF_MODEL_HPP
