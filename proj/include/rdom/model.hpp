#pragma once

#include <cstddef>
#include <iostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "rdom/core.hpp"

namespace rdom {

// All rates are in units of the intrinsic cavity loss kappa_i, and loss rates
// enter the dynamical matrices as -i*kappa on the diagonal (half-width
// convention).

/// Two cavity modes with coherent coupling G and mechanically mediated
/// dissipative coupling J e^{-/+ i theta}.
template <typename Scalar>
struct EffectiveParams {
  Scalar omega = 0;
  Scalar kappa_i = 1;
  Scalar kappa_e = 1;
  Scalar G = 0;
  Scalar J = 0;
  Scalar theta = 0;

  /// Total loss per mode; the eliminated mechanical mode adds J.
  Scalar kappa() const { return kappa_i + kappa_e + J; }

  bool critically_coupled() const { return kappa_e == kappa_i + J; }

  /// kappa_e = kappa_i + J, so that kappa = 2 (J + kappa_i).
  static EffectiveParams critical(Scalar G, Scalar J, Scalar theta,
                                  Scalar kappa_i = 1, Scalar omega = 0) {
    EffectiveParams p{omega, kappa_i, kappa_i + J, G, J, theta};
    p.validate();
    return p;
  }

  /// Explicit total loss; kappa_e absorbs whatever kappa_i and J leave over.
  static EffectiveParams with_total_loss(Scalar G, Scalar J, Scalar theta,
                                         Scalar kappa, Scalar kappa_i = 1,
                                         Scalar omega = 0) {
    EffectiveParams p{omega, kappa_i, kappa - kappa_i - J, G, J, theta};
    p.validate();
    return p;
  }

  /// Same cavity, new coupling point. Critical coupling is preserved.
  EffectiveParams retuned(Scalar new_J, Scalar new_theta) const {
    EffectiveParams p = *this;
    if (critically_coupled()) p.kappa_e = kappa_i + new_J;
    p.J = new_J;
    p.theta = new_theta;
    return p;
  }

  void validate() const {
    if (!(kappa_i > 0)) throw ValidationError("kappa_i must be > 0");
    if (!(kappa_e >= 0)) throw ValidationError("kappa_e must be >= 0");
    if (!(G >= 0)) throw ValidationError("G must be >= 0");
    if (!(J >= 0)) throw ValidationError("J must be >= 0");
    if (!std::isfinite(omega) || !std::isfinite(theta))
      throw ValidationError("omega and theta must be finite");
  }
};

/// Linearized three-mode (a, b, m) optomechanical system.
template <typename Scalar>
struct FullParams {
  Scalar delta_a = 0;
  Scalar delta_b = 0;
  Scalar omega_m = 0;
  Scalar kappa_1 = 1;
  Scalar kappa_2 = 1;
  Scalar gamma = 1;
  Scalar G = 0;
  Complex<Scalar> G_a{};
  Complex<Scalar> G_b{};

  static constexpr double reversed_dissipation_factor = 10.0;

  /// gamma >> (|G_a|, |G_b|, kappa_1, kappa_2), with >> read as a factor 10.
  bool reversed_dissipation() const {
    const Scalar largest =
        std::max({std::abs(G_a), std::abs(G_b), kappa_1, kappa_2});
    return gamma > Scalar(reversed_dissipation_factor) * largest;
  }

  /// arg(G_a^* G_b), the pump phase difference.
  Scalar parametric_phase() const { return std::arg(std::conj(G_a) * G_b); }

  void validate() const {
    if (!(gamma > 0)) throw ValidationError("gamma must be > 0");
    if (!(kappa_1 >= 0) || !(kappa_2 >= 0))
      throw ValidationError("cavity losses must be >= 0");
    if (!(G >= 0)) throw ValidationError("G must be >= 0");
  }
};

/// Three cavities on a ring, every pair coupled identically.
template <typename Scalar>
struct RingParams {
  Scalar omega = 0;
  Scalar kappa = 1;
  Scalar G = 0;
  Scalar J = 0;
  Scalar theta = 0;

  void validate() const {
    if (!(kappa > 0)) throw ValidationError("kappa must be > 0");
    if (!(G >= 0)) throw ValidationError("G must be >= 0");
    if (!(J >= 0)) throw ValidationError("J must be >= 0");
  }
};

template <typename Scalar>
struct Port {
  std::size_t mode = 0;
  Scalar rate = 0;
};

/// Dynamical matrix M of d(mu)/dt = -i M mu + Gamma mu_in, with the modes
/// that are coupled to external ports.
template <typename Scalar>
struct CoefficientMatrix {
  MatrixX<Scalar> m;
  std::vector<Port<Scalar>> ports;
  std::vector<std::string> labels;

  Eigen::Index size() const { return m.rows(); }

  void validate() const {
    if (m.rows() != m.cols()) throw ValidationError("coefficient matrix must be square");
    if (m.rows() < 1 || m.rows() > 3)
      throw ValidationError("coefficient matrix dimension must be 1, 2 or 3");
    for (const auto& port : ports) {
      if (static_cast<Eigen::Index>(port.mode) >= m.rows())
        throw ValidationError("port attached to a nonexistent mode");
      if (!(port.rate >= 0)) throw ValidationError("port rate must be >= 0");
    }
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      if (m(i, i).imag() > 0)
        throw ValidationError("diagonal loss must be non-negative (passive mode)");
    }
  }
};

enum class PortConvention {
  total_loss,  // every cavity port at rate kappa, reproduces the closed forms
  external,    // every cavity port at rate kappa_e
};

/// Coefficient of a^dagger b: i J e^{-i theta} + G.
template <typename Scalar>
Complex<Scalar> coupling_ab(Scalar G, Scalar J, Scalar theta) {
  const Complex<Scalar> i(0, 1);
  return i * J * unit_phasor(-theta) + G;
}

/// Coefficient of b^dagger a: i J e^{i theta} + G.
template <typename Scalar>
Complex<Scalar> coupling_ba(Scalar G, Scalar J, Scalar theta) {
  const Complex<Scalar> i(0, 1);
  return i * J * unit_phasor(theta) + G;
}

template <typename Scalar>
CoefficientMatrix<Scalar> build_effective_matrix(
    const EffectiveParams<Scalar>& p,
    PortConvention convention = PortConvention::total_loss) {
  p.validate();
  const Complex<Scalar> diag(p.omega, -p.kappa());
  CoefficientMatrix<Scalar> out;
  out.m.resize(2, 2);
  out.m << diag, coupling_ab(p.G, p.J, p.theta),
           coupling_ba(p.G, p.J, p.theta), diag;
  const Scalar rate =
      convention == PortConvention::total_loss ? p.kappa() : p.kappa_e;
  out.ports = {{0, rate}, {1, rate}};
  out.labels = {"a", "b"};
  return out;
}

template <typename Scalar>
CoefficientMatrix<Scalar> build_full_matrix(const FullParams<Scalar>& p,
                                            Scalar port_rate) {
  p.validate();
  if (!(port_rate >= 0)) throw ValidationError("port rate must be >= 0");
  CoefficientMatrix<Scalar> out;
  out.m.resize(3, 3);
  out.m << Complex<Scalar>(p.delta_a, -p.kappa_1), p.G, p.G_a,
           p.G, Complex<Scalar>(p.delta_b, -p.kappa_2), p.G_b,
           std::conj(p.G_a), std::conj(p.G_b), Complex<Scalar>(p.omega_m, -p.gamma);
  out.ports = {{0, port_rate}, {1, port_rate}};
  out.labels = {"a", "b", "m"};
  return out;
}

/// Circulant ring matrix: c1 on the a->b->c->a cycle above the diagonal
/// pattern, c2 on the opposite cycle.
template <typename Scalar>
CoefficientMatrix<Scalar> build_ring_matrix(const RingParams<Scalar>& p) {
  p.validate();
  const Complex<Scalar> d(p.omega, -p.kappa);
  const Complex<Scalar> c1 = coupling_ab(p.G, p.J, p.theta);
  const Complex<Scalar> c2 = coupling_ba(p.G, p.J, p.theta);
  CoefficientMatrix<Scalar> out;
  out.m.resize(3, 3);
  out.m << d, c1, c2,
           c2, d, c1,
           c1, c2, d;
  out.ports = {{0, p.kappa}, {1, p.kappa}, {2, p.kappa}};
  out.labels = {"a", "b", "c"};
  return out;
}

/// Embeds an effective two-mode system into the three-mode model at the given
/// mechanical damping: |G_a| = |G_b| = sqrt(J gamma), all modes degenerate at
/// omega, and the cavities keep kappa_i + kappa_e (the elimination adds J).
///
/// Eliminating m produces the cross term -i G_a G_b^* / gamma, so the
/// effective phase theta is carried as G_b = -sqrt(J gamma) e^{i theta}.
template <typename Scalar>
FullParams<Scalar> lift(const EffectiveParams<Scalar>& e, Scalar gamma) {
  e.validate();
  if (!(gamma > 0)) throw ValidationError("gamma must be > 0");
  const Scalar g = std::sqrt(e.J * gamma);
  FullParams<Scalar> f;
  f.delta_a = e.omega;
  f.delta_b = e.omega;
  f.omega_m = e.omega;
  f.kappa_1 = e.kappa_i + e.kappa_e;
  f.kappa_2 = e.kappa_i + e.kappa_e;
  f.gamma = gamma;
  f.G = e.G;
  f.G_a = {g, Scalar(0)};
  f.G_b = -g * unit_phasor(e.theta);
  return f;
}

/// Port rate that makes the full model converge to the effective closed forms.
template <typename Scalar>
Scalar full_port_rate(const EffectiveParams<Scalar>& e) {
  return e.kappa();
}

namespace detail {
inline void warn(const std::string& message) {
  std::clog << "rdom: warning: " << message << '\n';
}
}  // namespace detail

/// J = |G_a|^2 / gamma, theta = arg(-G_a^* G_b) in [0, 2pi).
///
/// kappa_i cannot be recovered from the three-mode description and is passed
/// in; kappa_e takes the remainder of kappa_1. Warns (does not reject) outside
/// the reversed-dissipation regime or for asymmetric cavities.
template <typename Scalar>
EffectiveParams<Scalar> reduce_full_to_effective(const FullParams<Scalar>& f,
                                                 Scalar kappa_i = 1) {
  f.validate();
  if (!f.reversed_dissipation())
    detail::warn("adiabatic elimination outside the reversed-dissipation regime");
  if (f.kappa_1 != f.kappa_2 || f.delta_a != f.delta_b)
    detail::warn("asymmetric cavities reduced using mode a");
  EffectiveParams<Scalar> e;
  e.omega = f.delta_a;
  e.kappa_i = kappa_i;
  e.kappa_e = f.kappa_1 - kappa_i;
  e.G = f.G;
  e.J = std::norm(f.G_a) / f.gamma;
  e.theta = wrap_angle(std::arg(-std::conj(f.G_a) * f.G_b));
  e.validate();
  return e;
}

}  // namespace rdom
