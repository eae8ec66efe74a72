#ifndef MOOGVCF_SPECTRAL_HPP
#define MOOGVCF_SPECTRAL_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>
#include <vector>

#include "moogvcf/model.hpp"

namespace moogvcf {

template <typename Scalar>
struct Spectrum {
  std::array<std::complex<Scalar>, 4> eigenvalues{};
  Scalar max_real_part{0};
};

namespace detail {

/// Argument mapped to [0, 2 pi).
template <typename Scalar>
Scalar positive_arg(const std::complex<Scalar>& z) {
  Scalar a = std::arg(z);
  if (a < 0) a += Scalar(2) * std::numbers::pi_v<Scalar>;
  return a;
}

template <typename Scalar>
Spectrum<Scalar> make_spectrum(std::array<std::complex<Scalar>, 4> ev) {
  for (auto& z : ev) {
    // -0.0 would put a real negative root at arg -pi instead of pi.
    if (z.imag() == Scalar(0)) z = {z.real(), Scalar(0)};
  }
  std::sort(ev.begin(), ev.end(), [](const auto& a, const auto& b) {
    const Scalar aa = positive_arg(a), ab = positive_arg(b);
    if (aa != ab) return aa < ab;
    return std::abs(a) < std::abs(b);
  });
  Spectrum<Scalar> s;
  s.eigenvalues = ev;
  s.max_real_part = ev[0].real();
  for (const auto& z : ev) s.max_real_part = std::max(s.max_real_part, z.real());
  return s;
}

/// Monic quartic stored as c[0] + c[1] x + c[2] x^2 + c[3] x^3 + x^4.
template <typename Scalar>
using Quartic = std::array<Scalar, 4>;

/// Characteristic polynomial det(lambda I - M) by Faddeev-LeVerrier.
template <typename Scalar>
Quartic<Scalar> char_poly(const Matrix4<Scalar>& m) {
  const Matrix4<Scalar> id = Matrix4<Scalar>::Identity();
  Quartic<Scalar> c{};
  Matrix4<Scalar> k = id;
  for (int j = 1; j <= 4; ++j) {
    const Matrix4<Scalar> mk = m * k;
    const Scalar cj = -mk.trace() / Scalar(j);
    c[4 - j] = cj;
    k = mk + cj * id;
  }
  return c;
}

/// Value of the m-th derivative of the monic quartic at z.
template <typename Scalar>
std::complex<Scalar> quartic_derivative(const Quartic<Scalar>& c, int order,
                                        const std::complex<Scalar>& z) {
  // Coefficients of 1, x, .., x^4 including the leading 1.
  std::array<Scalar, 5> a{c[0], c[1], c[2], c[3], Scalar(1)};
  for (int o = 0; o < order; ++o) {
    for (int i = 0; i < 4; ++i) a[i] = a[i + 1] * Scalar(i + 1);
    a[4] = 0;
  }
  std::complex<Scalar> v{0};
  for (int i = 4; i >= 0; --i) v = v * z + a[i];
  return v;
}

/// |p(z)| relative to the size of the terms that produced it.
template <typename Scalar>
Scalar relative_residual(const Quartic<Scalar>& c, const std::complex<Scalar>& z) {
  const Scalar az = std::abs(z);
  Scalar scale = az * az * az * az;
  Scalar pw = 1;
  for (int i = 0; i < 4; ++i) {
    scale += std::abs(c[i]) * pw;
    pw *= az;
  }
  const Scalar res = std::abs(quartic_derivative(c, 0, z));
  return scale > 0 ? res / scale : res;
}

}  // namespace detail

/// Closed-form spectrum of A: -omega0 + omega0 alpha e^{j k pi/4}, k odd.
/// alpha e^{j pi/4} = r^(1/4) (1 + j), which keeps the r = 1 real parts exact.
template <typename Scalar>
Spectrum<Scalar> eigvals_A_closed(const FilterParams<Scalar>& p) {
  using std::pow;
  const Scalar q = p.omega0 * pow(p.r, Scalar(0.25));
  const Scalar w = p.omega0;
  return detail::make_spectrum<Scalar>({std::complex<Scalar>(-w + q, q),
                                        std::complex<Scalar>(-w - q, q),
                                        std::complex<Scalar>(-w - q, -q),
                                        std::complex<Scalar>(-w + q, -q)});
}

/// Eigenvalues of a real 4x4 matrix as roots of its characteristic quartic,
/// found by Durand-Kerner simultaneous iteration on the max-entry-normalized
/// matrix. Clusters that form an exact multiple root are collapsed onto the
/// root of the matching derivative, simple roots get Newton polishing, and
/// conjugate pairs are symmetrized.
template <typename Scalar>
Spectrum<Scalar> eigvals_numeric(const Matrix4<Scalar>& m, Scalar tol = Scalar(1e-12),
                                 int max_iter = 200) {
  using C = std::complex<Scalar>;
  if (!m.allFinite()) throw DomainError("matrix has non-finite entries");
  const Scalar scale = m.cwiseAbs().maxCoeff();
  if (scale == Scalar(0)) return detail::make_spectrum<Scalar>({C{}, C{}, C{}, C{}});
  const Matrix4<Scalar> mn = m / scale;
  const detail::Quartic<Scalar> c = detail::char_poly(mn);

  Scalar bound = 0;
  for (Scalar ci : c) bound = std::max(bound, std::abs(ci));
  bound += Scalar(1);
  std::array<C, 4> z;
  const C seed(Scalar(0.4), Scalar(0.9));
  C pw(Scalar(1), Scalar(0));
  for (auto& zi : z) {
    pw *= seed;
    zi = bound * pw / Scalar(2);
  }

  auto max_residual = [&] {
    Scalar worst = 0;
    for (const auto& zi : z) worst = std::max(worst, detail::relative_residual(c, zi));
    return worst;
  };

  const Scalar step_tol = Scalar(4) * std::numeric_limits<Scalar>::epsilon();
  for (int it = 0; it < max_iter; ++it) {
    Scalar largest_step = 0;
    for (int i = 0; i < 4; ++i) {
      C denom(Scalar(1), Scalar(0));
      for (int j = 0; j < 4; ++j) {
        if (j != i) denom *= z[i] - z[j];
      }
      if (denom == C{}) denom = C(step_tol, step_tol);
      const C step = detail::quartic_derivative(c, 0, z[i]) / denom;
      z[i] -= step;
      largest_step = std::max(largest_step, std::abs(step) / (Scalar(1) + std::abs(z[i])));
    }
    if (largest_step <= step_tol) break;
  }
  const Scalar residual = max_residual();
  if (!(residual <= tol)) {
    throw ConvergenceError("Durand-Kerner iteration did not converge", static_cast<double>(residual));
  }

  // Group roots closer than 1e-3 (normalized units) into clusters.
  std::array<int, 4> cluster{0, 1, 2, 3};
  for (int i = 0; i < 4; ++i) {
    for (int j = i + 1; j < 4; ++j) {
      if (std::abs(z[i] - z[j]) < Scalar(1e-3)) {
        const int from = cluster[j], to = cluster[i];
        for (auto& k : cluster) {
          if (k == from) k = to;
        }
      }
    }
  }
  std::array<bool, 4> polished{};
  for (int id = 0; id < 4; ++id) {
    std::vector<int> members;
    for (int i = 0; i < 4; ++i) {
      if (cluster[i] == id) members.push_back(i);
    }
    const int mult = static_cast<int>(members.size());
    if (mult < 2) continue;
    C zeta{};
    Scalar worst = 0;
    for (int i : members) {
      zeta += z[i];
      worst = std::max(worst, detail::relative_residual(c, z[i]));
    }
    zeta /= Scalar(mult);
    for (int k = 0; k < 8; ++k) {
      const C dd = detail::quartic_derivative(c, mult, zeta);
      if (dd == C{}) break;
      zeta -= detail::quartic_derivative(c, mult - 1, zeta) / dd;
    }
    if (detail::relative_residual(c, zeta) <= worst) {
      for (int i : members) {
        z[i] = zeta;
        polished[i] = true;
      }
    }
  }
  for (int i = 0; i < 4; ++i) {
    if (polished[i] || std::count(cluster.begin(), cluster.end(), cluster[i]) > 1) continue;
    for (int k = 0; k < 3; ++k) {
      const C dp = detail::quartic_derivative(c, 1, z[i]);
      if (dp == C{}) break;
      const C cand = z[i] - detail::quartic_derivative(c, 0, z[i]) / dp;
      if (detail::relative_residual(c, cand) > detail::relative_residual(c, z[i])) break;
      z[i] = cand;
    }
  }

  // Real input: snap negligible imaginary parts and pair the rest.
  for (auto& zi : z) {
    if (std::abs(zi.imag()) <= Scalar(1e-13) * (Scalar(1) + std::abs(zi))) zi = {zi.real(), 0};
  }
  auto is_real = [](const C& v) { return v.imag() == Scalar(0); };
  std::array<bool, 4> paired{};
  for (int i = 0; i < 4; ++i) {
    if (paired[i] || is_real(z[i])) continue;
    int best = -1;
    Scalar best_dist = std::numeric_limits<Scalar>::max();
    for (int j = 0; j < 4; ++j) {
      if (j == i || paired[j] || is_real(z[j]) || (z[j].imag() > 0) == (z[i].imag() > 0)) continue;
      const Scalar dist = std::abs(z[j] - std::conj(z[i]));
      if (dist < best_dist) {
        best_dist = dist;
        best = j;
      }
    }
    if (best < 0) continue;
    const Scalar re = Scalar(0.5) * (z[i].real() + z[best].real());
    const Scalar im = Scalar(0.5) * (std::abs(z[i].imag()) + std::abs(z[best].imag()));
    z[i] = {re, z[i].imag() > 0 ? im : -im};
    z[best] = std::conj(z[i]);
    paired[i] = paired[best] = true;
  }

  for (auto& zi : z) zi *= scale;
  return detail::make_spectrum(z);
}

/// -max Re(lambda_A) = omega0 (1 - r^(1/4)).
template <typename Scalar>
Scalar stability_margin(const FilterParams<Scalar>& p) {
  using std::pow;
  return p.omega0 * (Scalar(1) - pow(p.r, Scalar(0.25)));
}

}  // namespace moogvcf

#endif  // MOOGVCF_SPECTRAL_HPP
