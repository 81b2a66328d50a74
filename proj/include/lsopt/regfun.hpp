#pragma once

#include <stdexcept>

#include "lsopt/types.hpp"

namespace lsopt {

/// Parameters of the penalized/regularized formulation.
struct RegParams {
  double eps = 1e-4;    // penalization of the state outside the domain
  double eta = 0.05;    // smoothing width of the Heaviside and of beta
  double eps2 = 0.01;   // slope parameter of the smoothed obstacle graph
  double eps1 = 0.05;   // mollifier radius for the regularized adjoint
  double C = 2.0;       // frozen-ball factor, radius C*h around observation points
  double tol = 1e-6;    // descent stopping tolerance

  void validate() const {
    if (eps <= 0 || eta <= 0 || eps2 <= 0 || eps1 <= 0 || tol <= 0)
      throw std::invalid_argument("RegParams: all parameters must be > 0");
    if (!(eta > eps))
      throw std::invalid_argument("RegParams: requires eta > eps");
    if (!(eps2 > eps))
      throw std::invalid_argument("RegParams: requires eps2 > eps");
    if (C < 2.0)
      throw std::invalid_argument("RegParams: requires C >= 2");
  }
};

/// C^1 regularized Heaviside: 0 for r < 0, cubic ramp on [0, eta], 1 beyond.
template <typename Scalar>
Scalar heaviside_reg(Scalar r, Scalar eta) {
  if (r < Scalar(0)) return Scalar(0);
  if (r > eta) return Scalar(1);
  return (Scalar(-2) * r + Scalar(3) * eta) * r * r / (eta * eta * eta);
}

template <typename Scalar>
Scalar heaviside_reg_prime(Scalar r, Scalar eta) {
  if (r < Scalar(0) || r > eta) return Scalar(0);
  return (Scalar(-6) * r * r + Scalar(6) * eta * r) / (eta * eta * eta);
}

/// C^1 regularization of the obstacle graph (0 for r>0, vertical at 0):
/// 0 for r > 0, cubic blend on [-eta, 0], slope 1/eps2 below. Nonpositive
/// and nondecreasing on all of R.
template <typename Scalar>
Scalar beta_reg(Scalar r, Scalar eta, Scalar eps2) {
  if (r > Scalar(0)) return Scalar(0);
  if (r < -eta) return r / eps2;
  return r * r * (-r / (eta * eta * eps2) - Scalar(2) / (eta * eps2));
}

template <typename Scalar>
Scalar beta_reg_prime(Scalar r, Scalar eta, Scalar eps2) {
  if (r > Scalar(0)) return Scalar(0);
  if (r < -eta) return Scalar(1) / eps2;
  return -Scalar(3) * r * r / (eta * eta * eps2) - Scalar(4) * r / (eta * eps2);
}

/// Radial C^inf bump scaled to unit mass over R^2, support |x| < eps1.
/// Approximates the Dirac distribution as eps1 -> 0.
double mollifier(const Vec2& x, double eps1);

/// Normalization constant c of the unit bump c*exp(-1/(1-|x|^2)).
double bump_normalization();

}  // namespace lsopt
