#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace rdom {

template <typename Scalar>
using Complex = std::complex<Scalar>;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Complex<Scalar>, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using VectorX = Eigen::Matrix<Complex<Scalar>, Eigen::Dynamic, 1>;

using Matrixcd = MatrixX<double>;
using Vectorcd = VectorX<double>;

/// Parameter sets that violate a model invariant.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Singular solves, poles, and metrics that cannot be evaluated.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename Scalar>
inline constexpr Scalar half_pi = std::numbers::pi_v<Scalar> / Scalar(2);

template <typename Scalar>
inline constexpr Scalar two_pi = std::numbers::pi_v<Scalar> * Scalar(2);

/// e^{i theta}, exact at integer multiples of pi/2.
///
/// theta = k*pi/2 is snapped when it sits within a few ulps of the multiple,
/// so that e.g. theta = pi/2 gives exactly i instead of (6e-17, 1). Phase
/// matching cancellations in the coupling terms then come out as exact zeros.
template <typename Scalar>
Complex<Scalar> unit_phasor(Scalar theta) {
  const Scalar quarters = theta / half_pi<Scalar>;
  const Scalar k = std::nearbyint(quarters);
  const Scalar slack = Scalar(8) * std::numeric_limits<Scalar>::epsilon() *
                       std::max(Scalar(1), std::abs(quarters));
  if (std::abs(quarters - k) <= slack) {
    long long m = static_cast<long long>(k) % 4;
    if (m < 0) m += 4;
    switch (m) {
      case 0: return {Scalar(1), Scalar(0)};
      case 1: return {Scalar(0), Scalar(1)};
      case 2: return {Scalar(-1), Scalar(0)};
      default: return {Scalar(0), Scalar(-1)};
    }
  }
  return std::polar(Scalar(1), theta);
}

/// Wraps an angle into [0, 2pi).
template <typename Scalar>
Scalar wrap_angle(Scalar theta) {
  Scalar r = std::fmod(theta, two_pi<Scalar>);
  if (r < Scalar(0)) r += two_pi<Scalar>;
  if (r >= two_pi<Scalar>) r -= two_pi<Scalar>;
  return r;
}

inline const char* version() { return "0.1.0"; }

}  // namespace rdom
