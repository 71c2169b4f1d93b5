#pragma once

#include <functional>

#include "flspec/measure.hpp"
#include "flspec/model.hpp"

namespace fl {

// Inverse design request: a dispersion (piecewise monotone branches with
// nonvanishing interior derivative) and a purely absolutely continuous target
// measure. Slab requests are already reduced to the longitudinal axis; Radial
// ones live on r >= 0 and carry the r^(d-1) volume factor. Any phase and any
// unit-norm transverse/angular profile leave the transported measure
// unchanged, so neither is materialised.
struct DesignSpec {
  Geometry geometry = Geometry::Slab;
  int dimension = 1;
  std::vector<DispersionPiece> dispersion;
  CouplingMeasure target = CouplingMeasure::flat_line(1.0);
};

struct DesignedFormFactor {
  std::function<double(double)> f;  // reduced squared form factor |g(k)|^2
  std::function<double(double)> g;  // nonnegative square root of f
  // Model-ready profile: an exact closed ScalarFn when the design formula
  // collapses to one (all built-in cases), else a dense tabulation.
  ScalarFn profile;
  bool exact = false;
};

// f(k) = sigma(w(k)) |w'(k)| / (J(k) n(w(k))): the change-of-variables
// solution, with J the geometry volume factor and n the number of branches
// whose image covers the level (branches sharing a level split it evenly).
// Throws ZeroDerivative when a branch derivative vanishes at an interior
// probe, Validation when the target carries point, lattice or cascade parts.
DesignedFormFactor design_form_factor(const DesignSpec& spec);

// Installs the designed profile in a model, pushes it forward, and compares
// interval masses against the target on 50 deterministic random intervals
// inside the attainable region (target support meeting the branch images).
// Returns the worst relative deviation.
double verify_design(const DesignSpec& spec, const DesignedFormFactor& designed,
                     double tol = 1e-10);

}  // namespace fl
