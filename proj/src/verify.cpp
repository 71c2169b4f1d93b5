#include "flspec/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "flspec/dynamics.hpp"
#include "flspec/inverse.hpp"
#include "flspec/measure.hpp"
#include "flspec/model.hpp"
#include "flspec/resonance.hpp"
#include "flspec/selfenergy.hpp"
#include "flspec/spectral.hpp"

namespace fl {
namespace {

OracleRow row(std::string name, double measured, double bound, bool exceed = false) {
  OracleRow r;
  r.name = std::move(name);
  r.measured = measured;
  r.bound = bound;
  r.exceed = exceed;
  r.pass = exceed ? measured > bound : measured < bound;
  return r;
}

double wrap_pi(double x) {
  x = std::fmod(x, 2 * M_PI);
  if (x > M_PI) x -= 2 * M_PI;
  if (x < -M_PI) x += 2 * M_PI;
  return x;
}

}  // namespace

std::vector<OracleRow> run_example_oracles() {
  std::vector<OracleRow> rows;

  // flat line: transform is +-i beta/2, exactly
  {
    const auto kap = CouplingMeasure::flat_line(1.0);
    double worst = 0;
    for (int i = 0; i < 10; ++i) {
      const Complex z(-4.0 + i * 0.9, (i % 2 ? 1 : -1) * (0.03 + 0.4 * i));
      const auto s = sigma(kap, z, 1e-9);
      const Complex want(0, z.imag() > 0 ? 0.5 : -0.5);
      worst = std::max(worst, std::abs(Complex(s.re, s.im) - want));
    }
    rows.push_back(row("flat-line transform vs i beta/2", worst, 1e-6));
  }

  // flat line, eps = 2: |x|^2 = e^{-t}, arg x = -2t
  {
    const auto kap = CouplingMeasure::flat_line(1.0);
    const std::vector<double> ts = {0.5, 1.0, 2.0, 5.0, 10.0};
    const auto tr = survival_amplitude(kap, 2.0, ts, 1e-8);
    double wa = 0, wp = 0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
      wa = std::max(wa, std::abs(std::norm(tr.amplitudes[i]) - std::exp(-ts[i])));
      wp = std::max(wp, std::abs(wrap_pi(std::arg(tr.amplitudes[i]) + 2 * ts[i])));
    }
    rows.push_back(row("flat-line decay magnitude", wa, 1e-4));
    rows.push_back(row("flat-line decay phase", wp, 1e-3));
  }

  // half line, eps = 0: the root is -W0(1), with W0(1) from bisection
  {
    const double w0 = num::bisect([](double w) { return w * std::exp(w) - 1.0; },
                                  0.5, 0.6, 1e-14);
    const auto sols = solve_pole_equation(CouplingMeasure::flat_half_line(1.0), 0.0,
                                          {-2.0, -1e-3});
    const double dev =
        sols.size() == 1 ? std::abs(sols[0].lambda + w0) : 1.0;
    rows.push_back(row("half-line level vs Lambert W", dev, 1e-8));
  }

  // half line, eps = 20: shallow level asymptote E ~ -e^{-eps}
  {
    const double e = lambert_eigenvalue(1.0, 20.0);
    const double want = -std::exp(-20.0);
    rows.push_back(row("half-line shallow asymptote", std::abs(e - want) / -want, 1e-6));
  }

  // comb: strict cell interlacing E_j in (j, j+1)
  {
    const auto ev = comb_eigenvalues(1.0, 1.0, 0.3, -5, 5);
    double worst = -kInf;
    for (int j = -5; j <= 5; ++j) {
      const double e = ev[j + 5];
      worst = std::max(worst, std::max(j - e, e - (j + 1)));
    }
    rows.push_back(row("comb cell interlacing", worst, 0.0));
  }

  // comb limits: strong coupling pins to half-integers; weak coupling pins to
  // the lattice right of eps, the next lattice point left of eps, and eps in
  // its own cell
  {
    const auto strong = comb_eigenvalues(1e8, 1.0, 0.3, -5, 5);
    double ws = 0;
    for (int j = -5; j <= 5; ++j)
      ws = std::max(ws, std::abs(strong[j + 5] - (j + 0.5)));
    rows.push_back(row("comb strong-coupling limit", ws, 1e-6));

    const auto weak = comb_eigenvalues(1e-8, 1.0, 0.3, -5, 5);
    double ww = 0;
    for (int j = -5; j <= 5; ++j) {
      const double want = j >= 1 ? j : (j == 0 ? 0.3 : j + 1);
      ww = std::max(ww, std::abs(weak[j + 5] - want));
    }
    rows.push_back(row("comb weak-coupling limit", ww, 1e-6));
  }

  // comb transform vs the cotangent closed form
  {
    const auto kap = CouplingMeasure::periodic_comb(1.0, 1.0);
    const Complex z(0.37, 0.21);
    const auto s = sigma(kap, z, 1e-10);
    const Complex want = sigma_closed_form(ClosedFormFamily::PeriodicComb, 1.0, 1.0, z);
    rows.push_back(row("comb transform vs cotangent", std::abs(Complex(s.re, s.im) - want), 1e-9));
  }

  // sinusoidal: eps = 2 pi is resonant (point mass exactly at 2 pi, where the
  // boundary transform vanishes); eps = 1 leaves no singular spectrum
  {
    const auto kap = CouplingMeasure::sinusoidal(1.0, 1.0);
    const auto rep = classify(kap, 2 * M_PI, {0.0, 10.0});
    double dev = 1.0;
    if (rep.pp_points.size() == 1 && rep.sc_flags.empty()) {
      const auto bv = sigma_boundary(kap, 2 * M_PI, 1e-10);
      dev = std::abs(rep.pp_points[0].lambda - 2 * M_PI) +
            std::abs(Complex(bv.sigma_plus.re, bv.sigma_plus.im));
    }
    rows.push_back(row("sinusoidal resonant point mass", dev, 1e-8));

    const auto off = classify(kap, 1.0, {0.0, 10.0});
    rows.push_back(row("sinusoidal off-resonance purity",
                       double(off.pp_points.size() + off.sc_flags.size()), 0.5));
  }

  // dyadic cascade: no point masses, divergence evidence everywhere probed
  {
    const auto kap = CouplingMeasure::dyadic_cascade(0.1, 0.5, 40);
    const auto rep = classify(kap, 0.5, {0.0, 1.0}, 512);
    double min_partial = 0;
    if (rep.pp_points.empty() && !rep.sc_flags.empty()) {
      min_partial = kInf;
      for (const auto& f : rep.sc_flags)
        min_partial = std::min(min_partial, f.partial_sum);
    }
    rows.push_back(row("dyadic divergence evidence", min_partial, 1e12, true));
  }

  // Stieltjes inversion recovers interval masses of a flat + atoms mixture
  {
    const CouplingMeasure kap({DensityPiece::flat(0.3, -1.0, 2.0)},
                              {{-2.0, 0.7}, {3.0, 0.4}}, {}, {});
    double worst = 0;
    const double m1 = stieltjes_invert(kap, 0.0, 2.5);
    worst = std::max(worst, std::abs(m1 - kap.mass(0.0, 2.5)));
    const double m2 = stieltjes_invert(kap, 2.5, 3.5);
    worst = std::max(worst, std::abs(m2 - kap.mass(2.5, 3.5)));
    rows.push_back(row("Stieltjes interval recovery", worst, 1e-5));
  }

  // flat line, eps = 2: one resonance at 2 - i/2 on the second sheet
  {
    const auto rs = find_resonances(CouplingMeasure::flat_line(1.0), 2.0,
                                    {0.0, 4.0, -2.0, 0.0});
    const double loc =
        rs.size() == 1 ? std::abs(rs[0].z0 - Complex(2.0, -0.5)) : 1.0;
    const double res = rs.size() == 1 ? rs[0].residual : 1.0;
    rows.push_back(row("flat-line resonance location", loc, 1e-8));
    rows.push_back(row("flat-line resonance residual", res, 1e-10));
  }

  // translated-contour evaluation agrees with the continued transform
  {
    double worst = 0;
    for (double wim : {1.0, 2.0})
      worst = std::max(worst, deformed_sigma_invariance(Complex(0, wim), 1.0,
                                                        Complex(2.0, -0.25)));
    rows.push_back(row("contour deformation invariance", worst, 1e-6));
  }

  // inverse design roundtrips
  {
    DesignSpec s;
    s.geometry = Geometry::Slab;
    s.dispersion = {
        {"neg", {-kInf, 0.0}, ScalarFn::power(1, 3), ScalarFn::power(3, 2)},
        {"pos", {0.0, kInf}, ScalarFn::power(1, 3), ScalarFn::power(3, 2)}};
    s.target = CouplingMeasure::flat_line(1.0);
    rows.push_back(row("design roundtrip slab cubic",
                       verify_design(s, design_form_factor(s)), 1e-8));
  }
  {
    DesignSpec s;
    s.geometry = Geometry::Radial;
    s.dimension = 3;
    s.dispersion = {{"r", {0.0, kInf}, ScalarFn::affine(0, 1), ScalarFn::constant(1)}};
    s.target = CouplingMeasure({DensityPiece::flat(1.0 / (2 * M_PI), 0.0, kInf)},
                               {}, {}, {});
    rows.push_back(row("design roundtrip radial linear",
                       verify_design(s, design_form_factor(s)), 1e-8));
  }

  // two-level reduction: one mu atom makes the evolution exactly unitary
  {
    DispersionModel m;
    m.geometry = Geometry::Line;
    m.pieces = {{"carrier", {0.0, 2.0}, ScalarFn::affine(0, 1), ScalarFn::constant(1)}};
    m.mu_density = ScalarFn::constant(0);
    m.mu_atoms = {{1.0, 0.49}};
    m.form_factor = ScalarFn::constant(1);
    rows.push_back(row("two-level unitarity defect",
                       std::abs(unitarity_check(m, 0.3, M_PI, 1e-10)), 1e-10));
  }

  return rows;
}

std::string oracle_table(const std::vector<OracleRow>& rows) {
  std::size_t w = 4;
  for (const auto& r : rows) w = std::max(w, r.name.size());
  std::string out;
  char line[160];
  std::snprintf(line, sizeof line, "%-*s  %13s  %2s %-9s  %s\n", int(w), "oracle",
                "measured", "", "bound", "verdict");
  out += line;
  int passed = 0;
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%-*s  %13.6e  %2s %-9.3g  %s\n", int(w),
                  r.name.c_str(), r.measured, r.exceed ? ">" : "<", r.bound,
                  r.pass ? "pass" : "FAIL");
    out += line;
    passed += r.pass;
  }
  std::snprintf(line, sizeof line, "%d/%zu oracles passed\n", passed, rows.size());
  out += line;
  return out;
}

}  // namespace fl
