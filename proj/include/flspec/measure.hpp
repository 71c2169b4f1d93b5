#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "flspec/numerics.hpp"

namespace fl {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct Interval {
  double lo = -kInf;
  double hi = kInf;
  bool finite() const { return std::isfinite(lo) && std::isfinite(hi); }
  bool contains(double x) const { return x >= lo && x <= hi; }
  bool contains_open(double x) const { return x > lo && x < hi; }
};

struct Atom {
  double location = 0;
  double weight = 0;  // > 0
};

// Absolutely continuous component, one piece per support interval.
//   Flat:        rho = level on [lo, hi]
//   Sinusoidal:  rho = (beta/2pi)(1 - cos(tau lambda)), zeros at 2pi j/tau
//   Tabulated:   piecewise-linear through (grid, values), zero outside
struct DensityPiece {
  enum class Family { Flat, Sinusoidal, Tabulated };
  Family family = Family::Flat;
  Interval support;
  double level = 0;
  double beta = 0, tau = 0;
  std::vector<double> grid, values;

  static DensityPiece flat(double level, double lo, double hi);
  static DensityPiece sinusoidal(double beta, double tau, double lo = -kInf,
                                 double hi = kInf);
  static DensityPiece tabulated(std::vector<double> grid, std::vector<double> values);

  double rho(double lambda) const;
  // integral of rho over [a,b] (clipped to the support), closed form
  double mass(double a, double b) const;
};

// Infinite lattice { j tau : j in Z } of equal point masses. The stored window
// J materializes atoms with |j| <= J for root isolation; transform evaluations
// add the |j| > J remainder in closed form (digamma), so results do not depend
// on J. Per-atom weight is beta tau / 2pi, which is exactly the normalization
// under which sigma(z) = -(beta/2) cot(pi z / tau).
struct PeriodicComb {
  double beta = 0;
  double tau = 1;
  int window = 64;
  double atom_weight() const { return beta * tau / (2 * M_PI); }
};

// Superposition of uniform dyadic layers: layer n carries weight a_n spread
// over the 2^n points { j/2^n : j = 1..2^n }, with a_n = base * ratio^n.
// `depth` truncates materialized evaluations (transform, interval masses,
// dynamics). Divergence probing of the 1/(lambda-mu)^2 functional follows the
// weight rule past `depth`: the truncated object is a proxy for the ideal
// infinite cascade and the probe must judge the ideal series.
struct DyadicCascade {
  double base = 1;
  double ratio = 0.5;
  int depth = 40;
  double layer_weight(int n) const { return base * std::pow(ratio, n); }
};

class CouplingMeasure {
 public:
  CouplingMeasure() = default;  // zero measure (decoupled Hamiltonian)
  CouplingMeasure(std::vector<DensityPiece> pieces, std::vector<Atom> atoms,
                  std::optional<PeriodicComb> comb,
                  std::vector<DyadicCascade> cascades);

  const std::vector<DensityPiece>& pieces() const { return pieces_; }
  const std::vector<Atom>& atoms() const { return atoms_; }
  const std::optional<PeriodicComb>& comb() const { return comb_; }
  const std::vector<DyadicCascade>& cascades() const { return cascades_; }

  bool is_zero() const;
  double density(double lambda) const;  // sum of piece densities

  // kappa([a,b]) with endpoint inclusion control; include_* only matters for
  // the point parts.
  double mass(double a, double b, bool include_a = true, bool include_b = true) const;

  // coupling scaling g -> c g: every mass is multiplied by c^2
  CouplingMeasure scaled(double c) const;

  static CouplingMeasure flat_line(double beta);
  static CouplingMeasure flat_half_line(double beta);
  static CouplingMeasure sinusoidal(double beta, double tau);
  static CouplingMeasure periodic_comb(double beta, double tau, int window = 64);
  static CouplingMeasure dyadic_cascade(double base, double ratio, int depth);
  static CouplingMeasure single_atom(double location, double weight);

 private:
  std::vector<DensityPiece> pieces_;
  std::vector<Atom> atoms_;
  std::optional<PeriodicComb> comb_;
  std::vector<DyadicCascade> cascades_;
};

enum class RegularityClass { H, HMinus1, HMinus2 };

struct GrowthMoments {
  double m0 = 0;  // total mass, may be inf
  double m1 = 0;  // integral of 1/(1+|lambda|), may be inf
  double m2 = 0;  // integral of 1/(1+lambda^2), always finite for valid input
  RegularityClass cls = RegularityClass::H;
};

// Throws DivergentM2 if the growth gate fails (cannot happen for the built-in
// families; the gate guards future piece types and pathological tabulated
// input).
GrowthMoments growth_moments(const CouplingMeasure& kappa, double tol = 1e-9);

// G(lambda) = integral of d kappa / (lambda - mu)^2, the point-mass criterion.
// +inf when lambda carries an atom, sits inside positive density, or a cascade
// series fails to stabilize / crosses `threshold`.
struct GFunctionReport {
  double value = 0;          // +inf when divergent
  bool divergent = false;
  double partial_sum = 0;    // cascade partial sum at the stopping level
  int stop_level = 0;        // cascade level where the verdict fired
  std::string reason;        // empty when finite
  std::vector<double> cascade_partials;  // first levels, for monotonicity checks
};

double g_function(const CouplingMeasure& kappa, double lambda, double threshold = 1e12);
GFunctionReport g_function_report(const CouplingMeasure& kappa, double lambda,
                                  double threshold = 1e12);

// Smallest n >= 0 with x * 2^n integral, for x in (0, 1]; the level at which a
// dyadic cascade first carries a point mass exactly at x.
int dyadic_order(double x);

// Where can point spectrum live: the complement of the positive-density runs,
// plus isolated zeros of a continuous density (the resonant mechanism).
struct SupportTopology {
  std::vector<Interval> density_runs;   // closures of {rho > 0}, merged, clipped
  std::vector<double> isolated_zeros;   // interior zeros of rho inside runs
  std::vector<double> point_masses;     // atoms + materialized comb lattice
  std::vector<Interval> cascade_hulls;  // [0,1] per cascade, clipped
  bool has_comb = false;
};
SupportTopology support_topology(const CouplingMeasure& kappa, Interval window);

}  // namespace fl
