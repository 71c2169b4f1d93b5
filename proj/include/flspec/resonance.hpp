#pragma once

#include <vector>

#include "flspec/measure.hpp"
#include "flspec/selfenergy.hpp"

namespace fl {

// Search rectangle in the closed lower half plane (im_hi <= 0). Seeds are
// placed at cell centres, so a rectangle touching the axis still seeds
// strictly below it.
struct SearchRect {
  double re_lo = 0, re_hi = 0;
  double im_lo = -1, im_hi = 0;
  bool contains(Complex z) const {
    return z.real() >= re_lo && z.real() <= re_hi && z.imag() >= im_lo &&
           z.imag() <= im_hi;
  }
};

struct Resonance {
  Complex z0;           // Im z0 < 0
  double residual = 0;  // |eps - z0 - Sigma_II(z0)|, independently re-evaluated
  Complex seed;         // Newton start that produced the root
};

// Meromorphic continuation of the self-energy through the ac cut:
//   Sigma_II(z) = Sigma(z) + 2 pi i rho_c(z),  Im z < 0,
// where rho_c is the analytic continuation of the density of the run lying
// above z. Requires Im z < 0 (DomainViolation) and an analytic density piece
// (Flat or Sinusoidal) whose open support covers Re z; tabulated densities,
// lattice combs and cascades do not continue (NoContinuation).
Complex sigma_second_sheet(const CouplingMeasure& kappa, Complex z,
                           double abs_tol = 1e-9);

// True when sigma_second_sheet would accept z; Newton uses this to fence
// iterates inside the continued region.
bool second_sheet_valid(const CouplingMeasure& kappa, Complex z);

// Damped complex Newton on F(z) = eps - z - Sigma_II(z) from a seeds_n x
// seeds_n grid over the rectangle. Analytic derivative with a centered-
// difference fallback; steps halve (up to 20 times) until |F| decreases and
// the iterate stays in the continued region. Converged roots are clustered at
// 1e-8, deflated from later searches, kept only when the re-evaluated
// residual is below 1e-10 and the root lies in the rectangle. An empty list
// is a legal outcome; seeds that fail to converge are dropped silently.
std::vector<Resonance> find_resonances(const CouplingMeasure& kappa, double epsilon,
                                       SearchRect rect, int seeds_n = 12,
                                       double abs_tol = 1e-9);

// Flat-line deformation cross-check: evaluates the transform along the
// translated contour omega(k) = k - w by direct quadrature and returns the
// absolute difference from the second-sheet value at z (or the plain
// transform when z lies above the axis). Pre: Im w > 0, Im z > -Im w.
double deformed_sigma_invariance(Complex w, double beta, Complex z,
                                 double abs_tol = 1e-9);

}  // namespace fl
