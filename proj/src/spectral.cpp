#include "flspec/spectral.hpp"

#include <algorithm>
#include <cmath>

#include "flspec/selfenergy.hpp"
#include "flspec/special.hpp"

namespace fl {
namespace {

double sq(double x) { return x * x; }

void require(bool ok, ErrorCode code, const std::string& what) {
  if (!ok) throw Error(code, what);
}

struct PoleProblem {
  const CouplingMeasure* kappa;
  double eps;
  // eps - lambda - Re Sigma+(lambda); NaN at point-mass collisions
  double F(double l) const {
    const auto bv = sigma_boundary(*kappa, l, 1e-10);
    return eps - l - bv.sigma_plus.re;
  }
};

// Bisection keeping the F(lo) > 0 > F(hi) orientation. Up-jump poles of F
// cannot attract such brackets, so the limit is a genuine continuity zero.
double refine_root(const PoleProblem& P, double lo, double hi) {
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (hi - lo <= 4e-16 * std::max(1.0, std::abs(mid))) break;
    double v = P.F(mid);
    if (std::isnan(v)) {  // landed exactly on a deep point mass: nudge
      const double m2 = mid + (hi - lo) * 1e-3;
      v = P.F(m2);
      if (std::isnan(v)) break;
      if (v > 0) lo = m2; else hi = m2;
      continue;
    }
    if (v > 0) lo = mid; else hi = mid;
  }
  return 0.5 * (lo + hi);
}

// Scan one pole-free-boundary cell with n interior samples. Down-crossings
// bracket exactly one root each (F decreases strictly between poles);
// up-crossings reveal an unsplit point mass inside and trigger one round of
// subdivision plus a coarseness warning.
void scan_cell(const PoleProblem& P, double a, double b, int n,
               std::vector<double>& roots, std::vector<std::string>* warnings,
               int depth = 0) {
  n = std::max(n, 4);
  std::vector<double> ts, vs;
  ts.reserve(n);
  // golden-ratio inset keeps samples off shallow dyadic points, where cascade
  // measures carry exact point masses and F is undefined
  for (int i = 0; i < n; ++i) {
    const double t = a + (i + 0.61803398874989) * (b - a) / (n + 0.236067977);
    const double v = P.F(t);
    if (std::isnan(v)) continue;
    ts.push_back(t);
    vs.push_back(v);
  }
  for (std::size_t i = 0; i + 1 < ts.size(); ++i) {
    if (vs[i] > 0 && vs[i + 1] <= 0) {
      roots.push_back(refine_root(P, ts[i], ts[i + 1]));
    } else if (vs[i] < 0 && vs[i + 1] >= 0) {
      if (depth == 0 && warnings)
        warnings->push_back("grid too coarse: unresolved point mass near lambda=" +
                            std::to_string(0.5 * (ts[i] + ts[i + 1])));
      if (depth < 2) scan_cell(P, ts[i], ts[i + 1], 8, roots, nullptr, depth + 1);
    }
  }
}

PoleSolution make_solution(const CouplingMeasure& kappa, double eps, double lambda) {
  PoleSolution s;
  s.lambda = lambda;
  const auto bv = sigma_boundary(kappa, lambda, 1e-10);
  s.residual = std::abs(eps - lambda - bv.sigma_plus.re);
  const auto rep = g_function_report(kappa, lambda);
  if (rep.divergent) {
    s.g_value = kInf;
  } else {
    s.g_value = rep.value;
    s.weight = 1.0 / (1.0 + rep.value);
  }
  return s;
}

}  // namespace

std::vector<PoleSolution> solve_pole_equation(const CouplingMeasure& kappa,
                                              double epsilon, Interval window,
                                              int grid_n,
                                              std::vector<std::string>* warnings) {
  require(grid_n >= 2, ErrorCode::Argument, "grid_n must be at least 2");
  require(window.finite() && window.lo < window.hi, ErrorCode::Argument,
          "root search needs a finite, nonempty window");

  const auto topo = support_topology(kappa, window);

  std::vector<std::pair<double, double>> gaps;
  double cursor = window.lo;
  for (const auto& run : topo.density_runs) {
    if (run.lo > cursor) gaps.emplace_back(cursor, run.lo);
    cursor = std::max(cursor, run.hi);
  }
  if (cursor < window.hi) gaps.emplace_back(cursor, window.hi);

  if (gaps.empty() && topo.isolated_zeros.empty())
    throw Error(ErrorCode::WindowInsideAcSupport,
                "window is covered by the continuous support; no admissible region");

  // point masses split gaps into cells holding exactly one root each; cascade
  // hulls contribute dyadic probe splits down to a grid-matched level
  std::vector<double> splits(topo.point_masses);
  const double win_w = window.hi - window.lo;
  for (const auto& hull : topo.cascade_hulls) {
    const double hw = hull.hi - hull.lo;
    if (hw <= 0) continue;
    const int L = std::min(
        12.0, std::max(3.0, std::ceil(std::log2(std::max(8.0, grid_n * hw / win_w)))));
    for (int lvl = 1; lvl <= L; ++lvl) {
      const double m = std::ldexp(1.0, lvl);
      for (double j = 1; j < m; j += 2) {
        const double p = j / m;
        if (hull.contains(p)) splits.push_back(p);
      }
    }
    if (hull.contains(1.0)) splits.push_back(1.0);
  }
  std::sort(splits.begin(), splits.end());

  PoleProblem P{&kappa, epsilon};
  std::vector<double> roots;
  for (const auto& [ga, gb] : gaps) {
    std::vector<double> bounds{ga};
    for (double s : splits)
      if (s > ga && s < gb) bounds.push_back(s);
    bounds.push_back(gb);
    for (std::size_t i = 0; i + 1 < bounds.size(); ++i) {
      const int n = static_cast<int>(
          std::lround(grid_n * (bounds[i + 1] - bounds[i]) / win_w));
      scan_cell(P, bounds[i], bounds[i + 1], n, roots, warnings);
    }
  }

  // resonant candidates: isolated zeros of a continuous density are admissible
  // only if the real part vanishes there simultaneously
  for (double z : topo.isolated_zeros) {
    const auto bv = sigma_boundary(kappa, z, 1e-10);
    if (bv.sigma_plus.im_divergent || bv.sigma_plus.re_log_singular) continue;
    const double F = epsilon - z - bv.sigma_plus.re;
    if (std::abs(F) <= std::max(1e-9, 20 * bv.sigma_plus.pv_error_estimate))
      roots.push_back(z);
  }

  std::sort(roots.begin(), roots.end());
  std::vector<PoleSolution> out;
  for (double r : roots) {
    if (!out.empty() && std::abs(r - out.back().lambda) <= 1e-11 * std::max(1.0, std::abs(r)))
      continue;
    out.push_back(make_solution(kappa, epsilon, r));
  }
  return out;
}

SpectralReport classify(const CouplingMeasure& kappa, double epsilon, Interval window,
                        int grid_n) {
  SpectralReport report;
  report.epsilon = epsilon;
  const auto topo = support_topology(kappa, window);
  report.ac_intervals = topo.density_runs;

  std::vector<PoleSolution> sols;
  try {
    sols = solve_pole_equation(kappa, epsilon, window, grid_n);
  } catch (const Error& e) {
    if (e.code != ErrorCode::WindowInsideAcSupport) throw;
  }
  for (auto& s : sols) {
    if (s.weight) {
      report.pp_points.push_back(s);
    } else {
      const auto rep = g_function_report(kappa, s.lambda);
      report.sc_flags.push_back({s.lambda, rep.partial_sum, rep.stop_level,
                                 rep.reason.empty() ? "divergent G probe" : rep.reason});
    }
  }
  report.uncoupled_part =
      "coupled cyclic component only; the remainder needs a dispersion model";
  return report;
}

std::vector<double> comb_eigenvalues(double beta, double tau, double epsilon,
                                     int j_lo, int j_hi) {
  require(beta > 0 && tau > 0, ErrorCode::Argument, "beta and tau must be positive");
  require(j_lo <= j_hi, ErrorCode::Argument, "empty j range");
  auto h = [&](double l) {
    const double u = l / tau;
    return sf::cospi(u) / sf::sinpi(u) - 2 * (l - epsilon) / beta;
  };
  auto dh = [&](double l) {
    return -(M_PI / tau) / sq(sf::sinpi(l / tau)) - 2 / beta;
  };
  std::vector<double> out;
  for (int j = j_lo; j <= j_hi; ++j) {
    const double a = j * tau, b = (j + 1) * tau;
    // the cotangent blows up toward the cell edges, so shrink the insets until
    // the bracket signs lock (tiny beta pushes the root against the edge)
    double da = tau / 4;
    while (h(a + da) <= 0 && da > 1e-290) da /= 16;
    double db = tau / 4;
    while (h(b - db) >= 0 && db > 1e-290) db /= 16;
    out.push_back(num::newton_bisect(h, dh, a + da, b - db,
                                     1e-13 * std::max({1.0, std::abs(a), std::abs(b)})));
  }
  return out;
}

double lambert_eigenvalue(double beta, double epsilon) {
  require(beta > 0, ErrorCode::Argument, "beta must be positive");
  const double Lx = -epsilon / beta - std::log(beta);
  double w;
  if (Lx > 30) {
    // solve w + log w = Lx (log form of w e^w = x, safe from overflow)
    w = Lx - std::log(Lx);
    for (int i = 0; i < 8; ++i) w -= (w + std::log(w) - Lx) / (1 + 1.0 / w);
  } else {
    w = sf::lambert_w0(std::exp(Lx));
  }
  return -beta * w;
}

EigenvectorSampler eigenvector(const DispersionModel& model, double lambda0,
                               Complex x) {
  const CouplingMeasure kappa = pushforward(model);
  require(kappa.density(lambda0) == 0, ErrorCode::NotAnEigenvalue,
          "lambda0 sits inside the continuous support");
  for (const auto& a : kappa.atoms())
    require(!num::nearly_equal(a.location, lambda0), ErrorCode::NotAnEigenvalue,
            "lambda0 coincides with a point mass of the coupling measure");
  const auto rep = g_function_report(kappa, lambda0);
  require(!rep.divergent, ErrorCode::NotAnEigenvalue,
          "G diverges at lambda0; no normalisable eigenvector");

  EigenvectorSampler out;
  out.g_at_lambda0 = rep.value;
  out.xi = [model, lambda0, x](double k) -> Complex {
    return -x * model.form_factor(k) / (model.omega(k) - lambda0);
  };

  double nsq = 0;
  auto integrand = [&](const DispersionPiece& p) {
    return [&model, &p, lambda0](double k) {
      return model.coupling_density(k) / sq(p.w(k) - lambda0);
    };
  };
  for (const auto& p : model.pieces) {
    auto f = integrand(p);
    auto over = [&](double a, double b) {  // [a, b] with b possibly +inf
      if (std::isfinite(b)) return num::integrate(f, a, b, 1e-10).value;
      auto g = [&](double t) { return f(a + t / (1 - t)) / sq(1 - t); };
      return num::integrate(g, 0, 1, 1e-10).value;
    };
    const double lo = p.domain.lo, hi = p.domain.hi;
    if (std::isfinite(lo)) {
      nsq += over(lo, hi);
    } else if (std::isfinite(hi)) {
      auto g = [&](double t) { return f(hi - t / (1 - t)) / sq(1 - t); };
      nsq += num::integrate(g, 0, 1, 1e-10).value;
    } else {
      nsq += over(0, kInf);
      auto g = [&](double t) { return f(-t / (1 - t)) / sq(1 - t); };
      nsq += num::integrate(g, 0, 1, 1e-10).value;
    }
  }
  for (const auto& a : model.mu_atoms)
    nsq += sq(model.form_factor(a.location)) * a.weight /
           sq(model.omega(a.location) - lambda0);
  out.norm_sq = std::norm(x) * nsq;
  return out;
}

}  // namespace fl
