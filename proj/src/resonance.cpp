#include "flspec/resonance.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

namespace fl {
namespace {

void require(bool ok, ErrorCode c, const char* msg) {
  if (!ok) throw Error(c, msg);
}

// The density formula of an analytic piece, read as an entire function of z.
Complex rho_continued(const DensityPiece& p, Complex z) {
  switch (p.family) {
    case DensityPiece::Family::Flat:
      return {p.level, 0};
    case DensityPiece::Family::Sinusoidal:
      return (p.beta / (2 * M_PI)) * (1.0 - std::cos(p.tau * z));
    default:
      return {0, 0};
  }
}

Complex rho_continued_derivative(const DensityPiece& p, Complex z) {
  switch (p.family) {
    case DensityPiece::Family::Flat:
      return {0, 0};
    case DensityPiece::Family::Sinusoidal:
      return (p.beta / (2 * M_PI)) * p.tau * std::sin(p.tau * z);
    default:
      return {0, 0};
  }
}

// Analytic pieces of the run above x. Empty means there is no cut to cross;
// nullptr in .second signals a tabulated (non-analytic) blocker.
struct Covering {
  std::vector<const DensityPiece*> pieces;
  bool tabulated_blocker = false;
};

Covering covering_run(const CouplingMeasure& kappa, double x) {
  Covering c;
  for (const auto& p : kappa.pieces()) {
    if (!p.support.contains_open(x)) continue;
    if (p.family == DensityPiece::Family::Tabulated) {
      c.tabulated_blocker = true;
      continue;
    }
    c.pieces.push_back(&p);
  }
  return c;
}

Complex sheet_two(const CouplingMeasure& kappa, Complex z, double abs_tol) {
  const auto s = sigma(kappa, z, abs_tol);
  Complex rho{0, 0};
  for (const auto* p : covering_run(kappa, z.real()).pieces)
    rho += rho_continued(*p, z);
  return Complex(s.re, s.im) + Complex(0, 2 * M_PI) * rho;
}

Complex sheet_two_derivative(const CouplingMeasure& kappa, Complex z,
                             double abs_tol) {
  Complex d = sigma_derivative(kappa, z, abs_tol);
  for (const auto* p : covering_run(kappa, z.real()).pieces)
    d += Complex(0, 2 * M_PI) * rho_continued_derivative(*p, z);
  return d;
}

}  // namespace

bool second_sheet_valid(const CouplingMeasure& kappa, Complex z) {
  if (!(z.imag() < 0)) return false;
  if (kappa.comb() || !kappa.cascades().empty()) return false;
  const auto c = covering_run(kappa, z.real());
  return !c.tabulated_blocker && !c.pieces.empty();
}

Complex sigma_second_sheet(const CouplingMeasure& kappa, Complex z, double abs_tol) {
  require(z.imag() < 0, ErrorCode::DomainViolation,
          "the second sheet is reached from below the axis (Im z < 0)");
  require(!kappa.comb() && kappa.cascades().empty(), ErrorCode::NoContinuation,
          "lattice and cascade parts admit no analytic continuation");
  const auto c = covering_run(kappa, z.real());
  require(!c.tabulated_blocker, ErrorCode::NoContinuation,
          "tabulated density above z declares no analytic continuation");
  require(!c.pieces.empty(), ErrorCode::NoContinuation,
          "no density run above z: nothing to continue through");
  return sheet_two(kappa, z, abs_tol);
}

std::vector<Resonance> find_resonances(const CouplingMeasure& kappa, double epsilon,
                                       SearchRect rect, int seeds_n,
                                       double abs_tol) {
  require(seeds_n >= 4, ErrorCode::Argument, "need at least a 4x4 seed grid");
  require(rect.re_lo < rect.re_hi && rect.im_lo < rect.im_hi && rect.im_hi <= 0,
          ErrorCode::Argument,
          "search rectangle must be nonempty and lie in the lower half-plane");

  std::vector<Resonance> roots;
  auto F = [&](Complex z) {
    return Complex(epsilon, 0) - z - sheet_two(kappa, z, abs_tol);
  };

  const double dre = (rect.re_hi - rect.re_lo) / seeds_n;
  const double dim = (rect.im_hi - rect.im_lo) / seeds_n;
  for (int i = 0; i < seeds_n; ++i) {
    for (int j = 0; j < seeds_n; ++j) {
      const Complex seed{rect.re_lo + (i + 0.5) * dre,
                         rect.im_lo + (j + 0.5) * dim};
      if (!second_sheet_valid(kappa, seed)) continue;

      Complex z = seed;
      Complex fv = F(z);
      bool stuck = false;
      for (int it = 0; it < 60 && !stuck; ++it) {
        const double scale = std::max({1.0, std::abs(epsilon), std::abs(z)});
        if (std::abs(fv) < 1e-14 * scale) break;
        Complex d = -1.0 - sheet_two_derivative(kappa, z, abs_tol);
        if (!std::isfinite(d.real()) || !std::isfinite(d.imag())) {
          const double h = 1e-6 * std::max(1.0, std::abs(z));
          d = (F(z + h) - F(z - h)) / (2 * h);
        }
        // deflate the roots already banked so every basin is visited once
        Complex defl{0, 0};
        for (const auto& r : roots) defl += 1.0 / (z - r.z0);
        const Complex denom = d - fv * defl;
        if (denom == Complex{0, 0}) break;
        Complex step = -fv / denom;
        bool moved = false;
        for (int halve = 0; halve < 20; ++halve) {
          const Complex zn = z + step;
          if (second_sheet_valid(kappa, zn)) {
            const Complex fn = F(zn);
            if (std::abs(fn) < std::abs(fv)) {
              z = zn;
              fv = fn;
              moved = true;
              break;
            }
          }
          step *= 0.5;
        }
        if (!moved) stuck = true;
      }

      if (!(z.imag() < 0) || !rect.contains(z)) continue;
      if (!second_sheet_valid(kappa, z)) continue;
      // independent residual at a tighter tolerance, undeflated
      const double residual =
          std::abs(Complex(epsilon, 0) - z - sheet_two(kappa, z, abs_tol * 0.1));
      if (!(residual < 1e-10)) continue;

      bool merged = false;
      for (auto& r : roots) {
        if (std::abs(z - r.z0) <= 1e-8 * std::max(1.0, std::abs(z))) {
          if (residual < r.residual) {
            r.z0 = z;
            r.residual = residual;
            r.seed = seed;
          }
          merged = true;
          break;
        }
      }
      if (!merged) roots.push_back({z, residual, seed});
    }
  }

  std::sort(roots.begin(), roots.end(), [](const Resonance& a, const Resonance& b) {
    return a.z0.real() != b.z0.real() ? a.z0.real() < b.z0.real()
                                      : a.z0.imag() < b.z0.imag();
  });
  return roots;
}

double deformed_sigma_invariance(Complex w, double beta, Complex z, double abs_tol) {
  require(w.imag() > 0, ErrorCode::DomainViolation,
          "the translation flow must push the contour downward (Im w > 0)");
  require(z.imag() > -w.imag(), ErrorCode::DomainViolation,
          "z must stay above the translated cut");
  require(beta > 0, ErrorCode::Argument, "beta must be positive");

  // omega(k) = k - w maps the line onto Im = -Im w; the transform becomes
  // (beta/2pi) Int dk / (k - u) with the pole at u = z + w (Im u > 0 by the
  // preconditions). Finite window by quadrature, symmetric wings in closed
  // form: Int_{|k|>R} = log((-R-u)/(R-u)) + i pi.
  const Complex u = z + w;
  const double R = std::max(100.0, 50.0 * (std::abs(u) + 1));
  std::vector<double> brk;
  for (double m : {-30.0, -10.0, -3.0, -1.0, 0.0, 1.0, 3.0, 10.0, 30.0}) {
    const double b = u.real() + m * std::max(1.0, std::abs(u.imag()));
    if (b > -R && b < R) brk.push_back(b);
  }
  std::sort(brk.begin(), brk.end());
  const auto q = num::integrate_split_c(
      [&](double k) { return 1.0 / (k - u); }, -R, R, brk, abs_tol, 2000000);
  require(q.error <= 10 * abs_tol + 1e-12, ErrorCode::QuadratureFailure,
          "contour quadrature error exceeds requested tolerance");
  const Complex wings = std::log((-R - u) / (R - u)) + Complex(0, M_PI);
  const Complex along = (beta / (2 * M_PI)) * (q.value + wings);

  const auto flat = CouplingMeasure::flat_line(beta);
  Complex ref;
  if (z.imag() < 0) {
    ref = sigma_second_sheet(flat, z, abs_tol);
  } else if (z.imag() > 0) {
    const auto s = sigma(flat, z, abs_tol);
    ref = {s.re, s.im};
  } else {
    const auto bv = sigma_boundary(flat, z.real(), abs_tol);
    ref = {bv.sigma_plus.re, M_PI * bv.ac_density_at_lambda};
  }
  return std::abs(along - ref);
}

}  // namespace fl
