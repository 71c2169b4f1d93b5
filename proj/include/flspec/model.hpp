#pragma once

#include <string>
#include <vector>

#include "flspec/measure.hpp"

namespace fl {

// Scalar evaluator on the reduced momentum variable. Four shapes cover every
// built-in dispersion and form factor; Tabulated interpolates linearly.
struct ScalarFn {
  enum class Kind { Const, Affine, Power, Tabulated };
  Kind kind = Kind::Const;
  double c0 = 0;  // Const value / affine intercept / power coefficient
  double c1 = 0;  // affine slope / power exponent
  std::vector<double> grid, values;

  double operator()(double k) const;
  // Exact derivative for the analytic kinds; a Tabulated dispersion must come
  // with an explicitly supplied slope function instead.
  ScalarFn derivative() const;

  static ScalarFn constant(double v);
  static ScalarFn affine(double intercept, double slope);
  static ScalarFn power(double coef, double exponent);
  static ScalarFn tabulated(std::vector<double> grid, std::vector<double> values);
};

// One monotone branch of the dispersion: omega restricted to `domain`, with
// its derivative available as an evaluator. The derivative must keep a fixed
// nonzero sign in the interior.
struct DispersionPiece {
  std::string name;
  Interval domain{-kInf, kInf};
  ScalarFn w, wprime;
};

enum class Geometry { Line, Slab, Radial };

// Physical description (reduced variable k, measure mu, dispersion omega, form
// factor g). Slab models have already been reduced to the longitudinal axis;
// Radial models live on r >= 0 and carry the r^(d-1) volume factor, with the
// unit-norm angular profile absorbed (it never appears pointwise). Only |g|^2
// enters any output, so the form factor is stored as a real profile.
struct DispersionModel {
  Geometry geometry = Geometry::Line;
  int dimension = 1;
  std::vector<DispersionPiece> pieces;
  ScalarFn mu_density = ScalarFn::constant(1.0);
  std::vector<Atom> mu_atoms;  // reduced-variable point masses of mu
  ScalarFn form_factor = ScalarFn::constant(1.0);

  const DispersionPiece* piece_at(double k) const;
  double omega(double k) const;     // EvaluationDomain when no piece covers k
  double jacobian(double k) const;  // 1 for Line/Slab, k^(d-1) for Radial
  // |g(k)|^2 * mu_density(k) * jacobian(k): the weight that transports to the
  // energy axis.
  double coupling_density(double k) const;
};

// Transport of |g|^2 dmu to the energy axis: each monotone branch contributes
// density |g|^2 m J / |w'| at its inverse image, mu atoms land at omega(k0).
// Branches with constant transported density become Flat pieces (detected by
// probing); everything else is sampled into a Tabulated piece. Errors:
// NonMonotonePiece when w' changes sign inside a branch, EvaluationDomain for
// tails that neither flatten nor decay.
CouplingMeasure pushforward(const DispersionModel& model, double tol = 1e-9);

}  // namespace fl
