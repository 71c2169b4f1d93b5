#pragma once

#include <vector>

#include "flspec/measure.hpp"

namespace fl {

// Regularised Borel transform of the coupling measure:
//   Sigma(z) = Int ( 1/(lambda - z) - lambda/(1 + lambda^2) ) d kappa(lambda).
// The regularisation makes the transform finite for every measure passing the
// growth gate; for finite-mass measures it differs from the plain Borel
// transform by the constant Int lambda/(1+lambda^2) d kappa, which shifts the
// bare level by the same amount and leaves every observable unchanged.
struct SelfEnergyValue {
  double re = 0;
  double im = 0;
  bool im_divergent = false;    // boundary value taken at a point mass
  bool re_log_singular = false; // boundary value at a density jump edge
  double pv_error_estimate = 0;
};

struct BoundaryValue {
  double lambda = 0;
  SelfEnergyValue sigma_plus;
  double ac_density_at_lambda = 0;  // Im Sigma+ / pi when finite
};

// Im z != 0 required. Absolutely continuous pieces go through adaptive
// quadrature with analytic flat parts and integration-by-parts tails; atoms,
// combs and cascades are exact sums (digamma forms for the lattice parts).
SelfEnergyValue sigma(const CouplingMeasure& kappa, Complex z, double abs_tol = 1e-9);

// Boundary value from the upper half plane. Re is a principal value where
// lambda sits inside a density run; Im = pi * rho(lambda). At a point mass the
// value is flagged im_divergent; at a density jump edge re_log_singular.
BoundaryValue sigma_boundary(const CouplingMeasure& kappa, double lambda,
                             double abs_tol = 1e-9);

// Sigma'(z) = Int d kappa / (lambda - z)^2, Im z != 0.
Complex sigma_derivative(const CouplingMeasure& kappa, Complex z, double abs_tol = 1e-9);

// (1/pi) Int_a^b Im Sigma(x + i delta) dx extrapolated along the delta ladder
// (default 1e-2 .. 1e-5, half-decade steps). Converges to the average of the
// open- and closed-interval masses; throws NonConvergent when the ladder does
// not stabilise within stab_tol.
double stieltjes_invert(const CouplingMeasure& kappa, double a, double b,
                        std::vector<double> deltas = {}, double stab_tol = 1e-5);

// Closed forms for the named families, used as oracles against the generic
// path. tau is ignored by the flat families.
enum class ClosedFormFamily { FlatLine, FlatHalfLine, Sinusoidal, PeriodicComb };
Complex sigma_closed_form(ClosedFormFamily family, double beta, double tau, Complex z);

}  // namespace fl
