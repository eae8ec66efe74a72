#ifndef MOOGVCF_LYAPUNOV_HPP
#define MOOGVCF_LYAPUNOV_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string_view>

#include "moogvcf/model.hpp"

namespace moogvcf {

// ---------------------------------------------------------------------------
// Candidate functions
// ---------------------------------------------------------------------------

enum class LyapunovKind { QuadraticX, QuadraticW, LogCosh };

/// ln(cosh(s)) without overflow for large |s|.
template <typename Scalar>
Scalar log_cosh(Scalar s) {
  using std::abs;
  using std::exp;
  using std::log;
  using std::log1p;
  const Scalar a = abs(s);
  return a + log1p(exp(Scalar(-2) * a)) - log(Scalar(2));
}

template <typename Scalar>
Scalar V_quadratic_x(const State<Scalar>& s) {
  return Scalar(0.5) * s.x.squaredNorm();
}

template <typename Scalar>
Scalar V_quadratic_w(const ScaledState<Scalar>& s) {
  return Scalar(0.5) * s.w.squaredNorm();
}

namespace detail {
template <typename Scalar>
void require_feedback(const FilterParams<Scalar>& p) {
  if (!(p.r > 0)) {
    throw DomainError("log-cosh Lyapunov function needs r > 0; use the zero-feedback branch");
  }
}
}  // namespace detail

/// V(w) = ln cosh w1 + d^2 ln cosh(w2/d) + d^4 ln cosh(w3/d^2)
///        + (d^2/alpha^4) ln cosh(alpha^4 w4/d^3).
template <typename Scalar>
Scalar V_nonlinear(const ScaledState<Scalar>& s, const FilterParams<Scalar>& p) {
  detail::require_feedback(p);
  const auto& w = s.w;
  const Scalar d = p.d, d2 = d * d, d3 = d2 * d;
  return log_cosh(w(0)) + d2 * log_cosh(w(1) / d) + d2 * d2 * log_cosh(w(2) / d2) +
         d2 / p.alpha4 * log_cosh(p.alpha4 * w(3) / d3);
}

/// Lyapunov function of the alpha = 0 cascade: sum of ln cosh(x_i).
template <typename Scalar>
Scalar V_zero_feedback(const State<Scalar>& s) {
  Scalar v{0};
  for (int i = 0; i < 4; ++i) v += log_cosh(s.x(i));
  return v;
}

template <typename Scalar>
Vector4<Scalar> grad_V(const ScaledState<Scalar>& s, const FilterParams<Scalar>& p) {
  detail::require_feedback(p);
  return z_vector(s, p);
}

template <typename Scalar>
Matrix4<Scalar> symmetrize(const Matrix4<Scalar>& m) {
  return Scalar(0.5) * (m + m.transpose());
}

/// omega0 z^T Q_s(g(w4)) z.
template <typename Scalar>
Scalar Vdot_nonlinear(const ScaledState<Scalar>& s, const FilterParams<Scalar>& p) {
  detail::require_feedback(p);
  const Vector4<Scalar> z = z_vector(s, p);
  const Matrix4<Scalar> qs = symmetrize(matrix_Q(p, g_of_w4(s.w(3), p)));
  return p.omega0 * z.dot(qs * z);
}

/// Coupling matrix of the alpha = 0 cascade in terms of z = tanh(x).
template <typename Scalar>
Matrix4<Scalar> matrix_Q_zero_feedback() {
  Matrix4<Scalar> q;
  // clang-format off
  q << -1,  0,  0,  0,
        1, -1,  0,  0,
        0,  1, -1,  0,
        0,  0,  1, -1;
  // clang-format on
  return q;
}

template <typename Scalar>
Scalar Vdot_zero_feedback(const State<Scalar>& s, const FilterParams<Scalar>& p) {
  const Vector4<Scalar> z = s.x.array().tanh().matrix();
  return p.omega0 * z.dot(symmetrize(matrix_Q_zero_feedback<Scalar>()) * z);
}

/// Value of the chosen candidate at a physical state. LogCosh falls back to
/// the zero-feedback function when r = 0; QuadraticW uses d = alpha.
template <typename Scalar>
Scalar lyapunov_value(LyapunovKind kind, const State<Scalar>& s, const FilterParams<Scalar>& p) {
  switch (kind) {
    case LyapunovKind::QuadraticX:
      return V_quadratic_x(s);
    case LyapunovKind::QuadraticW:
      detail::require_feedback(p);
      return V_quadratic_w(to_scaled(s, p.alpha));
    case LyapunovKind::LogCosh:
      if (p.r > 0) return V_nonlinear(to_scaled(s, p.d), p);
      return V_zero_feedback(s);
  }
  throw DomainError("unknown Lyapunov kind");
}

/// Time derivative of the chosen candidate along the nonlinear flow.
template <typename Scalar>
Scalar lyapunov_rate(LyapunovKind kind, const State<Scalar>& s, const FilterParams<Scalar>& p) {
  switch (kind) {
    case LyapunovKind::QuadraticX:
      return s.x.dot(rhs_nonlinear(s, p));
    case LyapunovKind::QuadraticW: {
      detail::require_feedback(p);
      const Matrix4<Scalar> dm = matrix_D(p.alpha);
      return (dm * s.x).dot(dm * rhs_nonlinear(s, p));
    }
    case LyapunovKind::LogCosh:
      if (p.r > 0) return Vdot_nonlinear(to_scaled(s, p.d), p);
      return Vdot_zero_feedback(s, p);
  }
  throw DomainError("unknown Lyapunov kind");
}

// ---------------------------------------------------------------------------
// Symmetric eigenvalues
// ---------------------------------------------------------------------------

/// Eigenvalues of a symmetric 4x4 matrix in ascending order, by cyclic Jacobi
/// rotations until the off-diagonal Frobenius norm is below 1e-14 ||M||_F.
template <typename Scalar>
Vector4<Scalar> sym_eigvals(const Matrix4<Scalar>& m, Scalar tol) {
  using std::abs;
  using std::sqrt;
  const Scalar asym = (m - m.transpose()).cwiseAbs().rowwise().sum().maxCoeff();
  if (!(asym < tol)) {
    std::ostringstream msg;
    msg << "matrix is not symmetric: ||M - M^T||_inf = " << asym;
    throw DomainError(msg.str());
  }
  Matrix4<Scalar> a = symmetrize(m);
  const Scalar conv =
      std::max(Scalar(1e-14), Scalar(8) * std::numeric_limits<Scalar>::epsilon()) *
      std::max(a.norm(), std::numeric_limits<Scalar>::min());
  constexpr int kMaxSweeps = 64;
  Scalar off{0};
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    Scalar off2{0};
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) {
        if (i != j) off2 += a(i, j) * a(i, j);
      }
    }
    off = sqrt(off2);
    if (off <= conv) {
      Vector4<Scalar> ev = a.diagonal();
      std::sort(ev.data(), ev.data() + 4);
      return ev;
    }
    for (int p = 0; p < 3; ++p) {
      for (int q = p + 1; q < 4; ++q) {
        const Scalar apq = a(p, q);
        if (apq == Scalar(0)) continue;
        const Scalar theta = (a(q, q) - a(p, p)) / (Scalar(2) * apq);
        const Scalar t = (theta >= 0 ? Scalar(1) : Scalar(-1)) /
                         (abs(theta) + sqrt(theta * theta + Scalar(1)));
        const Scalar c = Scalar(1) / sqrt(t * t + Scalar(1));
        const Scalar s = t * c;
        for (int k = 0; k < 4; ++k) {
          const Scalar akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < 4; ++k) {
          const Scalar apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
      }
    }
  }
  throw ConvergenceError("Jacobi iteration did not converge", static_cast<double>(off));
}

/// Largest eigenvalue of G(f): max(sqrt 2, (f + sqrt(f^2 + 8)) / 2).
template <typename Scalar>
Scalar lambda_G_max(Scalar f) {
  using std::sqrt;
  return std::max(sqrt(Scalar(2)), Scalar(0.5) * (f + sqrt(f * f + Scalar(8))));
}

// ---------------------------------------------------------------------------
// Definiteness certificates
// ---------------------------------------------------------------------------

enum class MatrixFamily { As, Bs, QsWorstCase };
enum class Verdict { NegativeDefinite, NegativeSemidefinite, Indefinite };

constexpr std::string_view to_string(MatrixFamily f) {
  switch (f) {
    case MatrixFamily::As: return "As";
    case MatrixFamily::Bs: return "Bs";
    case MatrixFamily::QsWorstCase: return "QsWorstCase";
  }
  return "?";
}

constexpr std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::NegativeDefinite: return "NegativeDefinite";
    case Verdict::NegativeSemidefinite: return "NegativeSemidefinite";
    case Verdict::Indefinite: return "Indefinite";
  }
  return "?";
}

inline constexpr double kDefaultEigTol = 1e-10;

/// Eigenvalues are those of the symmetrized member divided by omega0.
template <typename Scalar>
struct CertificateReport {
  Scalar omega0{1};
  Scalar r{0};
  MatrixFamily family{MatrixFamily::As};
  Scalar min_eig{0};
  Scalar max_eig{0};
  Verdict verdict{Verdict::Indefinite};
  Scalar tol{kDefaultEigTol};
};

template <typename Scalar>
Verdict classify(Scalar max_eig, Scalar tol) {
  using std::abs;
  if (max_eig < -tol) return Verdict::NegativeDefinite;
  if (abs(max_eig) <= tol) return Verdict::NegativeSemidefinite;
  return Verdict::Indefinite;
}

/// Symmetrized family member with omega0 factored out, as a function of
/// alpha alone. Accepts alpha beyond sqrt(2) so threshold searches can
/// bracket the r = 1 boundary from above.
template <typename Scalar>
Matrix4<Scalar> normalized_family_matrix(MatrixFamily family, Scalar alpha) {
  FilterParams<Scalar> p;
  p.omega0 = Scalar(1);
  p.alpha = alpha;
  p.alpha4 = alpha * alpha * alpha * alpha;
  p.r = p.alpha4 / Scalar(4);
  p.d = alpha > Scalar(1) ? alpha : Scalar(1);
  p.d4 = alpha > Scalar(1) ? p.alpha4 : Scalar(1);
  switch (family) {
    case MatrixFamily::As:
      return symmetrize(matrix_A(p));
    case MatrixFamily::Bs:
      return symmetrize(matrix_B(p));
    case MatrixFamily::QsWorstCase: {
      if (!(alpha > 0)) throw DomainError("QsWorstCase certification needs r > 0");
      // g enters Q only as -g in the (4,4) slot, so the smallest attainable
      // g gives the largest quadratic form.
      return symmetrize(matrix_Q(p, g_bounds(p).first));
    }
  }
  throw DomainError("unknown matrix family");
}

template <typename Scalar>
CertificateReport<Scalar> certify(MatrixFamily family, const FilterParams<Scalar>& p,
                                  Scalar tol = Scalar(kDefaultEigTol)) {
  if (family == MatrixFamily::QsWorstCase && !(p.r > 0)) {
    throw DomainError("QsWorstCase certification needs r > 0");
  }
  // Rebuild from (omega0 = 1, r) so As/Bs use exactly 4r for alpha^4.
  Matrix4<Scalar> m;
  const FilterParams<Scalar> unit = make_params(Scalar(1), p.r);
  switch (family) {
    case MatrixFamily::As: m = symmetrize(matrix_A(unit)); break;
    case MatrixFamily::Bs: m = symmetrize(matrix_B(unit)); break;
    case MatrixFamily::QsWorstCase: m = symmetrize(matrix_Q(unit, g_bounds(unit).first)); break;
  }
  const Vector4<Scalar> ev = sym_eigvals(m, tol);
  CertificateReport<Scalar> rep;
  rep.omega0 = p.omega0;
  rep.r = p.r;
  rep.family = family;
  rep.min_eig = ev(0);
  rep.max_eig = ev(3);
  rep.verdict = classify(ev(3), tol);
  rep.tol = tol;
  return rep;
}

namespace detail {
template <typename Scalar>
Scalar alpha_of_r(Scalar r) {
  using std::pow;
  using std::sqrt;
  return sqrt(Scalar(2)) * pow(r, Scalar(0.25));
}

template <typename Scalar>
Verdict family_verdict_at(MatrixFamily family, Scalar r, Scalar eig_tol) {
  if (r >= 0 && r <= 1) {
    return certify(family, make_params(Scalar(1), r), eig_tol).verdict;
  }
  const Matrix4<Scalar> m = normalized_family_matrix(family, alpha_of_r(r));
  return classify(sym_eigvals(m, eig_tol)(3), eig_tol);
}
}  // namespace detail

/// Bisection for the resonance at which the family's verdict changes between
/// r_lo and r_hi. r_hi may exceed 1 to bracket the upper end of the range.
template <typename Scalar>
Scalar definiteness_threshold(MatrixFamily family, Scalar r_lo, Scalar r_hi, Scalar tol,
                              Scalar eig_tol = Scalar(kDefaultEigTol)) {
  if (!(r_lo >= 0) || !(r_hi > r_lo)) {
    std::ostringstream msg;
    msg << "need 0 <= r_lo < r_hi, got [" << r_lo << ", " << r_hi << "]";
    throw RangeError("r", msg.str());
  }
  if (!(tol > 0)) throw RangeError("tol", "bisection tolerance must be > 0");
  const Verdict lo_verdict = detail::family_verdict_at(family, r_lo, eig_tol);
  const Verdict hi_verdict = detail::family_verdict_at(family, r_hi, eig_tol);
  if (lo_verdict == hi_verdict) {
    std::ostringstream msg;
    msg << to_string(family) << " has the same verdict (" << to_string(lo_verdict)
        << ") at r = " << r_lo << " and r = " << r_hi;
    throw DomainError(msg.str());
  }
  Scalar lo = r_lo, hi = r_hi;
  while (hi - lo > tol) {
    const Scalar mid = Scalar(0.5) * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (detail::family_verdict_at(family, mid, eig_tol) == lo_verdict) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return Scalar(0.5) * (lo + hi);
}

}  // namespace moogvcf

#endif  // MOOGVCF_LYAPUNOV_HPP
