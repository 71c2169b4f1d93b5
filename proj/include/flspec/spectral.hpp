#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "flspec/measure.hpp"
#include "flspec/model.hpp"

namespace fl {

// One solution of eps - lambda = Re Sigma+(lambda) on the admissible set.
// g_value is G at the root (kInf when the probe diverges); the point mass is
// weight = 1/(1+G), set only when G is finite.
struct PoleSolution {
  double lambda = 0;
  double residual = 0;
  double g_value = 0;
  std::optional<double> weight;
};

// Divergence evidence collected at a probed root: the G partial sum when the
// probe tripped the threshold (or failed to settle) and the cascade level it
// stopped at.
struct ScFlag {
  double lambda = 0;
  double partial_sum = 0;
  int stop_level = 0;
  std::string evidence;
};

struct SpectralReport {
  double epsilon = 0;
  std::vector<Interval> ac_intervals;
  std::vector<PoleSolution> pp_points;
  std::vector<ScFlag> sc_flags;
  std::string uncoupled_part;
};

// Grid-then-bisect root search for F(lambda) = eps - lambda - Re Sigma+ on the
// subset of the window carrying no density. F is strictly decreasing between
// point masses, so each bracket holds exactly one root; isolated zeros of a
// continuous density are screened as simultaneous-condition candidates.
// Throws WindowInsideAcSupport when the window carries density everywhere.
// `warnings` (optional) collects grid-coarseness notes.
std::vector<PoleSolution> solve_pole_equation(const CouplingMeasure& kappa,
                                              double epsilon, Interval window,
                                              int grid_n = 2048,
                                              std::vector<std::string>* warnings = nullptr);

// Full decomposition over the window: ac intervals from density positivity,
// roots split into pp (finite G) and sc evidence (divergent G probe).
// Pure-measure inputs describe only the coupled cyclic component; the
// uncoupled remainder needs a DispersionModel and is attached by the caller.
SpectralReport classify(const CouplingMeasure& kappa, double epsilon, Interval window,
                        int grid_n = 2048);

// Per-cell eigenvalues of the comb model: the unique root of
// cot(pi lambda / tau) = 2 (lambda - eps) / beta in (j tau, (j+1) tau) for
// each j in [j_lo, j_hi].
std::vector<double> comb_eigenvalues(double beta, double tau, double epsilon,
                                     int j_lo, int j_hi);

// Closed-form half-line eigenvalue E = -beta W0(exp(-eps/beta)/beta); switches
// to a log-domain Newton solve of w + log w = -eps/beta - log beta when the
// Lambert argument would overflow.
double lambert_eigenvalue(double beta, double epsilon);

// Boson component of the eigenvector at an isolated eigenvalue lambda0:
// xi(k) = -x g(k) / (omega(k) - lambda0), the physical coordinate whose
// squared norm is |x|^2 G(lambda0). (The Hilbert-scale coordinate differs by
// x Omega (Omega^2+1)^{-1} g; only the physical one is normalisable against
// the 1/(1+G) weight.) norm_sq comes from direct momentum-space quadrature.
// Throws NotAnEigenvalue when lambda0 carries density or a point mass of the
// pushforward measure, or when G diverges there.
struct EigenvectorSampler {
  std::function<Complex(double)> xi;
  double norm_sq = 0;
  double g_at_lambda0 = 0;
};
EigenvectorSampler eigenvector(const DispersionModel& model, double lambda0,
                               Complex x);

}  // namespace fl
