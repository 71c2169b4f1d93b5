#pragma once

#include <string>
#include <vector>

#include "flspec/measure.hpp"
#include "flspec/model.hpp"

namespace fl {

// Survival amplitude of the excited state on a time grid. Each amplitude is
// the Fourier transform of the state's spectral measure (pole weights plus
// the ac density of Pi); quadrature_error[i] is an absolute estimate for
// amplitudes[i] combining panel interpolation defects, tail truncation and
// any spectral mass the representation could not place.
struct SurvivalTrace {
  std::vector<double> times;
  std::vector<Complex> amplitudes;
  std::vector<double> quadrature_error;
  bool sc_flagged = false;  // UnresolvedScPart: trace is approximate
  std::string note;         // what was truncated or flagged, empty when clean
};

// Pi(z) = 1 / (eps - z - Sigma(z)), the resolvent element of the excited
// state; Herglotz in the upper half plane. Im z != 0 required.
Complex pi_function(const CouplingMeasure& kappa, double epsilon, Complex z,
                    double tol = 1e-9);

// x(t) = sum_j w_j e^{-i lambda_j t} + Int e^{-i lambda t} (1/pi) Im Pi+ dlambda.
// The ac density is fitted once into cubic panels and each panel is integrated
// against the oscillation in closed form (Filon moments), so accuracy is
// uniform in t; infinite tails go through integration-by-parts series per
// oscillation channel. Negative times are accepted and evaluated through the
// same spectral form (the trace is Hermitian in t because the density is
// real). Cascade components are replaced by a finite dyadic truncation and the
// trace is flagged approximate instead of failing.
SurvivalTrace survival_amplitude(const CouplingMeasure& kappa, double epsilon,
                                 const std::vector<double>& times,
                                 double tol = 1e-8);

// xi(t,k) = -g(k) * B(t, omega(k)) where
//   B(t,w) = Int (e^{-i lambda t} - e^{-i w t}) / (w - lambda) dnu(lambda)
// over the state's spectral measure nu. This is the partial-fraction split of
// the resolvent transform (pole sum + principal value against the ac density
// + e^{-iwt} boundary coefficient) assembled in the combined difference form,
// which is regular at lambda = w and needs no principal-value prescription.
std::vector<Complex> boson_wavefunction(const DispersionModel& model,
                                        double epsilon, double t,
                                        const std::vector<double>& k_samples,
                                        double tol = 1e-8);

// |x(t)|^2 + ||xi(t,.)||^2 - 1. The field norm integrates |B(t,.)|^2 against
// the coupling measure (the pushforward of |g|^2 dmu), so momentum space never
// appears; for pure point models the answer is exact up to rounding.
double unitarity_check(const DispersionModel& model, double epsilon, double t,
                       double tol = 1e-8);

}  // namespace fl
