#pragma once

#include <cstddef>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>

#include "rdom/core.hpp"
#include "rdom/model.hpp"
#include "rdom/spectra.hpp"

namespace rdom {

/// Probe detunings delta = omega - omega_p, strictly increasing.
template <typename Scalar>
struct ProbeGrid {
  std::vector<Scalar> delta_values;

  static ProbeGrid linspace(Scalar from, Scalar to, std::size_t points) {
    ProbeGrid g{rdom::linspace(from, to, points)};
    g.validate();
    return g;
  }

  std::size_t size() const { return delta_values.size(); }

  void validate() const { detail::require_increasing(delta_values, "probe detuning"); }
};

template <typename Scalar>
struct SMatrix {
  MatrixX<Scalar> s;
  std::vector<std::string> ports;

  /// Transmission from port `from` to port `to`, 1-based like S_{to,from}.
  Complex<Scalar> at(std::size_t to, std::size_t from) const {
    return s(static_cast<Eigen::Index>(to - 1), static_cast<Eigen::Index>(from - 1));
  }

  Scalar max_singular_value() const {
    Eigen::JacobiSVD<MatrixX<Scalar>> svd(s);
    return svd.singularValues()(0);
  }
};

template <typename Scalar>
struct TransmissionCurve {
  ProbeGrid<Scalar> grid;
  std::vector<Complex<Scalar>> values;
  std::string pair;

  std::vector<Scalar> magnitude() const {
    std::vector<Scalar> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = std::abs(values[i]);
    return out;
  }
};

template <typename Scalar>
struct ChiralitySample {
  Scalar delta = 0;
  std::optional<Scalar> alpha;  // empty when |S41| + |S23| == 0
};

/// Intermediates of the closed-form ring S-matrix.
template <typename Scalar>
struct ThreeCavityAux {
  Complex<Scalar> x;           // -(kappa + i delta)
  Complex<Scalar> j1;          // J e^{-i theta} - i G
  Complex<Scalar> j2;          // J e^{i theta} - i G
  Complex<Scalar> lambda_det;  // x^3 + j1^3 + j2^3 - 3 x j1 j2
};

template <typename Scalar>
struct RingScattering {
  SMatrix<Scalar> s;
  ThreeCavityAux<Scalar> aux;
};

// ---------------------------------------------------------------------------
// Two-mode closed forms (ports 1, 2 on mode a; ports 3, 4 on mode b)

namespace detail {
template <typename Scalar>
Complex<Scalar> langevin_j1(Scalar G, Scalar J, Scalar theta) {
  return J * unit_phasor(-theta) - Complex<Scalar>(0, G);
}

template <typename Scalar>
Complex<Scalar> langevin_j2(Scalar G, Scalar J, Scalar theta) {
  return J * unit_phasor(theta) - Complex<Scalar>(0, G);
}

/// (i delta + kappa)^2 - J1 J2.
template <typename Scalar>
Complex<Scalar> two_mode_denominator(const EffectiveParams<Scalar>& p, Scalar delta) {
  const Complex<Scalar> z(p.kappa(), delta);
  return z * z - langevin_j1(p.G, p.J, p.theta) * langevin_j2(p.G, p.J, p.theta);
}
}  // namespace detail

/// Through transmission past mode a: 1 - kappa (i delta + kappa) / D.
template <typename Scalar>
Complex<Scalar> s21_closed(const EffectiveParams<Scalar>& p, Scalar delta) {
  const Complex<Scalar> z(p.kappa(), delta);
  return Scalar(1) - p.kappa() * z / detail::two_mode_denominator(p, delta);
}

/// a -> b: kappa (J e^{i theta} - i G) / D.
template <typename Scalar>
Complex<Scalar> s41_closed(const EffectiveParams<Scalar>& p, Scalar delta) {
  return p.kappa() * detail::langevin_j2(p.G, p.J, p.theta) /
         detail::two_mode_denominator(p, delta);
}

/// b -> a: kappa (J e^{-i theta} - i G) / D.
template <typename Scalar>
Complex<Scalar> s14_closed(const EffectiveParams<Scalar>& p, Scalar delta) {
  return p.kappa() * detail::langevin_j1(p.G, p.J, p.theta) /
         detail::two_mode_denominator(p, delta);
}

/// Port 3 -> 2, the mirror image of 1 -> 4: the S41 numerator at -theta.
template <typename Scalar>
Complex<Scalar> s23_mirror(const EffectiveParams<Scalar>& p, Scalar delta) {
  return p.kappa() * detail::langevin_j2(p.G, p.J, -p.theta) /
         detail::two_mode_denominator(p, delta);
}

// ---------------------------------------------------------------------------
// General S-matrix

/// S = I + i B^T (M - omega_p I)^{-1} B with B[mode, port] = sqrt(rate),
/// i.e. the input-output solution of d(mu)/dt = -i M mu + B mu_in,
/// mu_out = mu_in - B^T mu. The result is indexed by port.
template <typename Scalar>
SMatrix<Scalar> s_general(const CoefficientMatrix<Scalar>& cm, Scalar omega_probe) {
  cm.validate();
  const Eigen::Index n = cm.size();
  const Eigen::Index np = static_cast<Eigen::Index>(cm.ports.size());
  if (np == 0) throw ValidationError("coefficient matrix has no ports");
  MatrixX<Scalar> b = MatrixX<Scalar>::Zero(n, np);
  SMatrix<Scalar> out;
  for (Eigen::Index k = 0; k < np; ++k) {
    const auto& port = cm.ports[static_cast<std::size_t>(k)];
    b(static_cast<Eigen::Index>(port.mode), k) = std::sqrt(port.rate);
    out.ports.push_back(port.mode < cm.labels.size() ? cm.labels[port.mode]
                                                     : std::to_string(port.mode));
  }
  const MatrixX<Scalar> shifted =
      cm.m - Complex<Scalar>(omega_probe) * MatrixX<Scalar>::Identity(n, n);
  Eigen::PartialPivLU<MatrixX<Scalar>> lu(shifted);
  if (!(lu.rcond() > std::numeric_limits<Scalar>::epsilon())) {
    std::ostringstream msg;
    msg << "singular resolvent at probe frequency " << omega_probe;
    throw NumericalError(msg.str());
  }
  const MatrixX<Scalar> response = lu.solve(b);
  out.s = MatrixX<Scalar>::Identity(np, np) + Complex<Scalar>(0, 1) * b.transpose() * response;
  return out;
}

/// Probe frequency for detuning delta = omega - omega_p.
template <typename Scalar>
Scalar probe_frequency(Scalar omega, Scalar delta) {
  return omega - delta;
}

/// Four-port transmissions of a two-cavity system from the mode-indexed
/// S-matrix (ports on a then b). Cross transmissions carry the output
/// reference-plane sign of the closed forms.
template <typename Scalar>
struct FourPort {
  Complex<Scalar> s21;
  Complex<Scalar> s43;
  Complex<Scalar> s41;
  Complex<Scalar> s14;
};

template <typename Scalar>
FourPort<Scalar> four_port(const SMatrix<Scalar>& modes) {
  if (modes.s.rows() != 2) throw ValidationError("four-port mapping needs two cavity ports");
  return {modes.s(0, 0), modes.s(1, 1), -modes.s(1, 0), -modes.s(0, 1)};
}

/// min eigenvalue of -(M - M^dagger)/(2i) - B B^T / 2; >= 0 means passive.
template <typename Scalar>
Scalar passivity_margin(const CoefficientMatrix<Scalar>& cm) {
  const Complex<Scalar> two_i(0, 2);
  MatrixX<Scalar> h = -(cm.m - cm.m.adjoint()) / two_i;
  for (const auto& port : cm.ports) {
    const auto k = static_cast<Eigen::Index>(port.mode);
    h(k, k) -= port.rate / Scalar(2);
  }
  h = (h + h.adjoint()).eval() / Scalar(2);
  Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> es(h, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

// ---------------------------------------------------------------------------
// Ring closed form

/// The published 3x3 ring S-matrix, kappa/Lambda times the adjugate pattern,
/// with the diagonal printed as X^2 - J1 J2 + 1. Off-diagonals agree with
/// s_general(build_ring_matrix); the diagonal does not (the exact diagonal is
/// 1 + kappa (X^2 - J1 J2) / Lambda).
template <typename Scalar>
RingScattering<Scalar> ring_s_closed(const RingParams<Scalar>& p, Scalar delta) {
  p.validate();
  ThreeCavityAux<Scalar> aux;
  aux.x = -Complex<Scalar>(p.kappa, delta);
  aux.j1 = detail::langevin_j1(p.G, p.J, p.theta);
  aux.j2 = detail::langevin_j2(p.G, p.J, p.theta);
  const auto& x = aux.x;
  const auto& j1 = aux.j1;
  const auto& j2 = aux.j2;
  aux.lambda_det = x * x * x + j1 * j1 * j1 + j2 * j2 * j2 - Scalar(3) * x * j1 * j2;
  const Scalar scale = std::max({std::abs(x), std::abs(j1), std::abs(j2)});
  if (!(std::abs(aux.lambda_det) > Scalar(1e-12) * scale * scale * scale)) {
    std::ostringstream msg;
    msg << "ring S-matrix pole at delta = " << delta;
    throw NumericalError(msg.str());
  }
  const Complex<Scalar> diag = x * x - j1 * j2 + Scalar(1);
  const Complex<Scalar> up = j2 * j2 - j1 * x;    // S12, S23, S31
  const Complex<Scalar> down = j1 * j1 - j2 * x;  // S21, S32, S13
  RingScattering<Scalar> out;
  out.aux = aux;
  out.s.s.resize(3, 3);
  out.s.s << diag, up, down,
             down, diag, up,
             up, down, diag;
  out.s.s *= p.kappa / aux.lambda_det;
  out.s.ports = {"1", "2", "3"};
  return out;
}

// ---------------------------------------------------------------------------
// Derived metrics

/// alpha = (|S41| - |S23|) / (|S41| + |S23|).
template <typename Scalar>
ChiralitySample<Scalar> chirality(const EffectiveParams<Scalar>& p, Scalar delta) {
  const Scalar forward = std::abs(s41_closed(p, delta));
  const Scalar mirror = std::abs(s23_mirror(p, delta));
  ChiralitySample<Scalar> out{delta, std::nullopt};
  if (forward + mirror > 0) out.alpha = (forward - mirror) / (forward + mirror);
  return out;
}

namespace detail {
template <typename Scalar>
void warn_unless_first_ep(Scalar theta) {
  if (std::abs(wrap_angle(theta) - half_pi<Scalar>) > Scalar(phase_tolerance))
    warn("nonreciprocity curve evaluated away from theta = pi/2");
}
}  // namespace detail

/// D(delta) = |S14| - |S41| from the two-mode closed forms.
template <typename Scalar>
TransmissionCurve<Scalar> nonreciprocity_curve(const EffectiveParams<Scalar>& p,
                                               const ProbeGrid<Scalar>& grid) {
  p.validate();
  grid.validate();
  detail::warn_unless_first_ep(p.theta);
  TransmissionCurve<Scalar> out{grid, {}, "D"};
  out.values.reserve(grid.size());
  for (Scalar delta : grid.delta_values)
    out.values.emplace_back(std::abs(s14_closed(p, delta)) - std::abs(s41_closed(p, delta)));
  return out;
}

/// D(delta) = |S14| - |S41| from the full three-mode matrix, cavity ports at
/// port_rate.
template <typename Scalar>
TransmissionCurve<Scalar> nonreciprocity_curve(const FullParams<Scalar>& p,
                                               const ProbeGrid<Scalar>& grid,
                                               Scalar port_rate) {
  grid.validate();
  detail::warn_unless_first_ep(std::arg(-std::conj(p.G_a) * p.G_b));
  const auto cm = build_full_matrix(p, port_rate);
  TransmissionCurve<Scalar> out{grid, {}, "D"};
  out.values.reserve(grid.size());
  for (Scalar delta : grid.delta_values) {
    const auto ports = four_port(s_general(cm, probe_frequency(p.delta_a, delta)));
    out.values.emplace_back(std::abs(ports.s14) - std::abs(ports.s41));
  }
  return out;
}

/// Full width at half maximum of |curve|, linearly interpolated.
template <typename Scalar>
Scalar fwhm(const TransmissionCurve<Scalar>& curve) {
  const auto mag = curve.magnitude();
  const auto& x = curve.grid.delta_values;
  if (mag.size() != x.size() || mag.empty()) throw ValidationError("curve and grid lengths differ");
  const std::size_t peak =
      static_cast<std::size_t>(std::max_element(mag.begin(), mag.end()) - mag.begin());
  if (!(mag[peak] > 0)) throw NumericalError("FWHM undefined: peak is not positive");
  const Scalar half = mag[peak] / Scalar(2);

  std::size_t l = peak;
  while (l > 0 && mag[l] >= half) --l;
  std::size_t r = peak;
  while (r + 1 < mag.size() && mag[r] >= half) ++r;
  if (mag[l] >= half || mag[r] >= half)
    throw NumericalError("FWHM undefined: half maximum not crossed inside the grid");
  const auto cross = [&](std::size_t below, std::size_t above) {
    return x[below] + (half - mag[below]) * (x[above] - x[below]) / (mag[above] - mag[below]);
  };
  return cross(r, r - 1) - cross(l, l + 1);
}

/// Trapezoidal integral of the (real part of the) curve over delta.
template <typename Scalar>
Scalar nonreciprocal_area(const TransmissionCurve<Scalar>& curve) {
  const auto& x = curve.grid.delta_values;
  Scalar area = 0;
  for (std::size_t i = 1; i < x.size(); ++i)
    area += (x[i] - x[i - 1]) * (curve.values[i].real() + curve.values[i - 1].real()) / Scalar(2);
  return area;
}

}  // namespace rdom
