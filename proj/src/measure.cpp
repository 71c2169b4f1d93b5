#include "flspec/measure.hpp"

#include <algorithm>
#include <bit>
#include <cfloat>
#include <cmath>
#include <cstdint>

#include "flspec/special.hpp"

namespace fl {

namespace {

void require(bool ok, ErrorCode code, const std::string& msg) {
  if (!ok) throw Error(code, msg);
}

double sq(double x) { return x * x; }

using num::nearly_equal;

// Int dx / (1 + |x|) has antiderivative sign(x) log(1 + |x|).
double log1p_abs_antideriv(double x) {
  if (std::isinf(x)) return x > 0 ? kInf : -kInf;
  return std::copysign(std::log1p(std::abs(x)), x);
}

// sin(tau u / 2) / u, stable through u = 0
double half_sinc(double tau, double u) {
  const double w = 0.5 * tau * u;
  if (std::abs(w) < 1e-7) return 0.5 * tau * (1.0 - w * w / 6.0);
  return std::sin(w) / u;
}

// Right tail Int_T^inf rho_sin / (lambda - x)^2 dx for rho_sin with parameters
// (beta, tau), lambda < T. Flat part in closed form, cosine part by parts.
double sinusoidal_g_right_tail(double beta, double tau, double lambda, double T) {
  const double flat = (beta / (2 * M_PI)) / (T - lambda);
  Complex d[4];
  d[0] = 1.0 / sq(lambda - T);
  d[1] = 2.0 / std::pow(lambda - T, 3);
  d[2] = 6.0 / std::pow(lambda - T, 4);
  d[3] = 24.0 / std::pow(lambda - T, 5);
  const auto osc = num::oscillatory_tail(tau, T, d, 4);
  return flat - (beta / (2 * M_PI)) * osc.value.real();
}

// Left tail Int_{-inf}^{T} rho_sin / (lambda - x)^2 dx, lambda > T.
double sinusoidal_g_left_tail(double beta, double tau, double lambda, double T) {
  const double flat = (beta / (2 * M_PI)) / (lambda - T);
  // substitute x = -s: Int_{-T}^{inf} e^{-i tau s} (lambda + s)^{-2} ds
  Complex d[4];
  d[0] = 1.0 / sq(lambda - T);
  d[1] = -2.0 / std::pow(lambda - T, 3);
  d[2] = 6.0 / std::pow(lambda - T, 4);
  d[3] = -24.0 / std::pow(lambda - T, 5);
  const auto osc = num::oscillatory_tail(-tau, -T, d, 4);
  return flat - (beta / (2 * M_PI)) * osc.value.real();
}

// G contribution of a sinusoidal piece at a point where its density vanishes
// (outside the support, or exactly at a resonant zero lam0 inside it).
double sinusoidal_g(const DensityPiece& p, double lambda, bool at_zero, double lam0) {
  const double beta = p.beta, tau = p.tau;
  const double R = 500.0 / tau + 10.0;
  const double cl = std::max(p.support.lo, lambda - R);
  const double ch = std::min(p.support.hi, lambda + R);
  double total = 0;
  if (ch > cl) {
    std::function<double(double)> f;
    if (at_zero) {
      f = [=](double x) {
        const double r = half_sinc(tau, x - lam0);
        return (beta / M_PI) * r * r;
      };
    } else {
      f = [=](double x) {
        return (beta / M_PI) * sq(std::sin(0.5 * tau * x)) / sq(lambda - x);
      };
    }
    std::vector<double> breaks;
    if (at_zero && lam0 > cl && lam0 < ch) breaks.push_back(lam0);
    total += num::integrate_split(f, cl, ch, breaks, 1e-11).value;
  }
  if (std::isinf(p.support.hi)) total += sinusoidal_g_right_tail(beta, tau, lambda, ch);
  if (std::isinf(p.support.lo)) total += sinusoidal_g_left_tail(beta, tau, lambda, cl);
  return total;
}

// Int rho_sin / (1 + x^2) over the support: flat part in closed form, cosine
// part by quadrature plus integration-by-parts tails (exact pi e^{-tau} on R).
double sinusoidal_m2(const DensityPiece& p, double tol) {
  const double tau = p.tau;
  const double lo = p.support.lo, hi = p.support.hi;
  const double flat = std::atan(hi) - std::atan(lo);
  double osc = 0;
  if (std::isinf(lo) && std::isinf(hi)) {
    osc = M_PI * std::exp(-tau);
  } else {
    const double R = 500.0 / tau + 10.0;
    const double cl = std::max(lo, -R), ch = std::min(hi, R);
    if (ch > cl)
      osc += num::integrate([&](double x) { return std::cos(tau * x) / (1 + x * x); },
                            cl, ch, tol).value;
    auto derivs = [](double x, Complex d[4]) {
      const double u = 1 + x * x;
      d[0] = 1 / u;
      d[1] = -2 * x / (u * u);
      d[2] = (6 * x * x - 2) / (u * u * u);
      d[3] = 24 * x * (1 - x * x) / (u * u * u * u);
    };
    Complex d[4];
    if (std::isinf(hi)) {
      derivs(ch, d);
      osc += num::oscillatory_tail(tau, ch, d, 4).value.real();
    }
    if (std::isinf(lo)) {
      derivs(-cl, d);  // density and 1/(1+x^2) are even in x
      osc += num::oscillatory_tail(tau, -cl, d, 4).value.real();
    }
  }
  return (p.beta / (2 * M_PI)) * (flat - osc);
}

// Exact Int (c + d x) / (lambda - x)^2 dx over [s1, s2] not containing lambda.
double linear_kernel_segment(double c, double d, double lambda, double s1, double s2) {
  auto F = [&](double x) {
    return (c + d * lambda) / (lambda - x) + d * std::log(std::abs(lambda - x));
  };
  return F(s2) - F(s1);
}

struct TabZeroInfo {
  bool inside = false;      // lambda within [grid.front, grid.back]
  bool positive = false;    // rho(lambda) > 0
  bool log_divergent = false;  // isolated zero with positive slope on a side
};

TabZeroInfo classify_tab_point(const DensityPiece& p, double lambda) {
  TabZeroInfo info;
  const auto& g = p.grid;
  const auto& v = p.values;
  if (lambda < g.front() || lambda > g.back()) return info;
  info.inside = true;
  if (p.rho(lambda) > 0) {
    info.positive = true;
    return info;
  }
  // rho(lambda) == 0: either at a node with a zero value or inside an
  // all-zero segment. Log divergence iff the density rises linearly on a side.
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g[i] == lambda) {
      const bool left_pos = i > 0 && v[i - 1] > 0;
      const bool right_pos = i + 1 < g.size() && v[i + 1] > 0;
      if (left_pos || right_pos) info.log_divergent = true;
      return info;
    }
  }
  return info;  // interior of a zero plateau segment
}

}  // namespace

int dyadic_order(double x) {
  int e = 0;
  const double f = std::frexp(x, &e);  // x = f * 2^e, f in [0.5, 1)
  const auto mant = static_cast<std::uint64_t>(std::ldexp(f, 53));
  const int ord = 53 - std::countr_zero(mant) - e;
  return ord < 0 ? 0 : ord;
}

// ---------------------------------------------------------------------------
// DensityPiece

DensityPiece DensityPiece::flat(double level, double lo, double hi) {
  require(std::isfinite(level) && level > 0, ErrorCode::Validation,
          "flat density level must be positive");
  require(lo < hi && !std::isnan(lo) && !std::isnan(hi), ErrorCode::Validation,
          "flat density support must be a nonempty interval");
  DensityPiece p;
  p.family = Family::Flat;
  p.support = {lo, hi};
  p.level = level;
  return p;
}

DensityPiece DensityPiece::sinusoidal(double beta, double tau, double lo, double hi) {
  require(std::isfinite(beta) && beta > 0, ErrorCode::Validation,
          "sinusoidal density beta must be positive");
  require(std::isfinite(tau) && tau != 0, ErrorCode::Validation,
          "sinusoidal density tau must be finite and nonzero");
  require(lo < hi && !std::isnan(lo) && !std::isnan(hi), ErrorCode::Validation,
          "sinusoidal density support must be a nonempty interval");
  DensityPiece p;
  p.family = Family::Sinusoidal;
  p.support = {lo, hi};
  p.beta = beta;
  p.tau = std::abs(tau);  // density depends on |tau| only
  return p;
}

DensityPiece DensityPiece::tabulated(std::vector<double> grid, std::vector<double> values) {
  require(grid.size() >= 2 && grid.size() == values.size(), ErrorCode::Validation,
          "tabulated density needs matching grid/value arrays of length >= 2");
  bool any_positive = false;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    require(std::isfinite(grid[i]) && std::isfinite(values[i]), ErrorCode::Validation,
            "tabulated density entries must be finite");
    require(values[i] >= 0, ErrorCode::Validation, "tabulated density must be nonnegative");
    if (i) require(grid[i] > grid[i - 1], ErrorCode::Validation,
                   "tabulated grid must be strictly increasing");
    if (values[i] > 0) any_positive = true;
  }
  require(any_positive, ErrorCode::Validation, "tabulated density is identically zero");
  DensityPiece p;
  p.family = Family::Tabulated;
  p.support = {grid.front(), grid.back()};
  p.grid = std::move(grid);
  p.values = std::move(values);
  return p;
}

double DensityPiece::rho(double lambda) const {
  if (!support.contains(lambda)) return 0;
  switch (family) {
    case Family::Flat:
      return level;
    case Family::Sinusoidal:
      return (beta / M_PI) * sq(std::sin(0.5 * tau * lambda));
    case Family::Tabulated: {
      auto it = std::upper_bound(grid.begin(), grid.end(), lambda);
      if (it == grid.begin()) return values.front();
      if (it == grid.end()) return values.back();
      const std::size_t i = static_cast<std::size_t>(it - grid.begin()) - 1;
      const double t = (lambda - grid[i]) / (grid[i + 1] - grid[i]);
      return values[i] + t * (values[i + 1] - values[i]);
    }
  }
  return 0;
}

double DensityPiece::mass(double a, double b) const {
  const double lo = std::max(a, support.lo);
  const double hi = std::min(b, support.hi);
  if (!(hi > lo)) return 0;
  switch (family) {
    case Family::Flat:
      return level * (hi - lo);
    case Family::Sinusoidal: {
      auto F = [&](double x) {
        if (std::isinf(x)) return x;  // linear growth dominates
        return (beta / (2 * M_PI)) * (x - std::sin(tau * x) / tau);
      };
      return F(hi) - F(lo);
    }
    case Family::Tabulated: {
      double total = 0;
      for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
        const double s1 = std::max(lo, grid[i]), s2 = std::min(hi, grid[i + 1]);
        if (s2 <= s1) continue;
        total += 0.5 * (rho(s1) + rho(s2)) * (s2 - s1);
      }
      return total;
    }
  }
  return 0;
}

// ---------------------------------------------------------------------------
// CouplingMeasure

CouplingMeasure::CouplingMeasure(std::vector<DensityPiece> pieces, std::vector<Atom> atoms,
                                 std::optional<PeriodicComb> comb,
                                 std::vector<DyadicCascade> cascades)
    : pieces_(std::move(pieces)), comb_(comb), cascades_(std::move(cascades)) {
  for (const auto& a : atoms) {
    require(std::isfinite(a.location), ErrorCode::Validation, "atom location must be finite");
    require(std::isfinite(a.weight) && a.weight > 0, ErrorCode::Validation,
            "atom weight must be positive");
  }
  std::sort(atoms.begin(), atoms.end(),
            [](const Atom& x, const Atom& y) { return x.location < y.location; });
  for (const auto& a : atoms) {
    if (!atoms_.empty() && atoms_.back().location == a.location)
      atoms_.back().weight += a.weight;  // coincident atoms merge
    else
      atoms_.push_back(a);
  }
  if (comb_) {
    require(std::isfinite(comb_->beta) && comb_->beta > 0, ErrorCode::Validation,
            "comb beta must be positive");
    require(std::isfinite(comb_->tau) && comb_->tau != 0, ErrorCode::Validation,
            "comb tau must be finite and nonzero");
    comb_->tau = std::abs(comb_->tau);
    require(comb_->window >= 1 && comb_->window <= 1000000, ErrorCode::Validation,
            "comb window must be in [1, 1000000]");
  }
  for (const auto& c : cascades_) {
    require(std::isfinite(c.base) && c.base > 0, ErrorCode::Validation,
            "cascade base weight must be positive");
    require(std::isfinite(c.ratio) && c.ratio > 0, ErrorCode::Validation,
            "cascade ratio must be positive");
    require(c.depth >= 1 && c.depth <= 50, ErrorCode::Validation,
            "cascade depth must be in [1, 50]");
  }
}

bool CouplingMeasure::is_zero() const {
  return pieces_.empty() && atoms_.empty() && !comb_ && cascades_.empty();
}

double CouplingMeasure::density(double lambda) const {
  double r = 0;
  for (const auto& p : pieces_) r += p.rho(lambda);
  return r;
}

double CouplingMeasure::mass(double a, double b, bool include_a, bool include_b) const {
  if (!(a <= b)) return 0;
  double total = 0;
  for (const auto& p : pieces_) total += p.mass(a, b);
  for (const auto& at : atoms_) {
    const bool in = (at.location > a && at.location < b) ||
                    (at.location == a && include_a) || (at.location == b && include_b);
    if (in) total += at.weight;
  }
  if (comb_) {
    if (std::isinf(a) || std::isinf(b)) return kInf;
    const double tau = comb_->tau;
    auto jlo = static_cast<long long>(std::ceil(a / tau));
    auto jhi = static_cast<long long>(std::floor(b / tau));
    if (nearly_equal(jlo * tau, a) && !include_a) ++jlo;
    else if (nearly_equal((jlo - 1) * tau, a) && include_a) --jlo;
    if (nearly_equal(jhi * tau, b) && !include_b) --jhi;
    else if (nearly_equal((jhi + 1) * tau, b) && include_b) ++jhi;
    if (jhi >= jlo) total += comb_->atom_weight() * static_cast<double>(jhi - jlo + 1);
  }
  for (const auto& c : cascades_) {
    for (int n = 1; n <= c.depth; ++n) {
      const double m = std::ldexp(1.0, n);
      const double ya = std::ldexp(a, n), yb = std::ldexp(b, n);  // exact scaling
      double jlo = std::max(1.0, std::ceil(ya));
      double jhi = std::min(m, std::floor(yb));
      if (ya == jlo && !include_a) jlo += 1;
      if (yb == jhi && !include_b) jhi -= 1;
      if (jhi >= jlo)
        total += c.layer_weight(n) * std::ldexp(jhi - jlo + 1, -n);
    }
  }
  return total;
}

CouplingMeasure CouplingMeasure::scaled(double c) const {
  require(std::isfinite(c), ErrorCode::Argument, "coupling scale must be finite");
  if (c == 0) return {};
  const double f = c * c;
  CouplingMeasure out = *this;
  for (auto& p : out.pieces_) {
    p.level *= f;
    p.beta *= f;
    for (auto& v : p.values) v *= f;
  }
  for (auto& a : out.atoms_) a.weight *= f;
  if (out.comb_) out.comb_->beta *= f;
  for (auto& cc : out.cascades_) cc.base *= f;
  return out;
}

CouplingMeasure CouplingMeasure::flat_line(double beta) {
  return {{DensityPiece::flat(beta / (2 * M_PI), -kInf, kInf)}, {}, {}, {}};
}

CouplingMeasure CouplingMeasure::flat_half_line(double beta) {
  return {{DensityPiece::flat(beta, 0, kInf)}, {}, {}, {}};
}

CouplingMeasure CouplingMeasure::sinusoidal(double beta, double tau) {
  return {{DensityPiece::sinusoidal(beta, tau)}, {}, {}, {}};
}

CouplingMeasure CouplingMeasure::periodic_comb(double beta, double tau, int window) {
  return {{}, {}, PeriodicComb{beta, tau, window}, {}};
}

CouplingMeasure CouplingMeasure::dyadic_cascade(double base, double ratio, int depth) {
  return {{}, {}, {}, {DyadicCascade{base, ratio, depth}}};
}

CouplingMeasure CouplingMeasure::single_atom(double location, double weight) {
  return {{}, {Atom{location, weight}}, {}, {}};
}

// ---------------------------------------------------------------------------
// Growth moments

GrowthMoments growth_moments(const CouplingMeasure& kappa, double tol) {
  double m0 = 0, m1 = 0, m2 = 0;
  for (const auto& p : kappa.pieces()) {
    const double lo = p.support.lo, hi = p.support.hi;
    switch (p.family) {
      case DensityPiece::Family::Flat:
        m0 += p.level * (hi - lo);
        m1 += p.level * (log1p_abs_antideriv(hi) - log1p_abs_antideriv(lo));
        m2 += p.level * (std::atan(hi) - std::atan(lo));
        break;
      case DensityPiece::Family::Sinusoidal: {
        if (p.support.finite()) {
          m0 += p.mass(lo, hi);
          m1 += num::integrate_split([&](double x) { return p.rho(x) / (1 + std::abs(x)); },
                                     lo, hi, {0.0}, tol).value;
        } else {
          m0 = kInf;
          m1 = kInf;
        }
        m2 += sinusoidal_m2(p, tol);
        break;
      }
      case DensityPiece::Family::Tabulated:
        for (std::size_t i = 0; i + 1 < p.grid.size(); ++i) {
          const double x1 = p.grid[i], x2 = p.grid[i + 1];
          const double d = (p.values[i + 1] - p.values[i]) / (x2 - x1);
          const double c = p.values[i] - d * x1;
          m0 += 0.5 * (p.values[i] + p.values[i + 1]) * (x2 - x1);
          m2 += c * (std::atan(x2) - std::atan(x1)) +
                0.5 * d * (std::log1p(x2 * x2) - std::log1p(x1 * x1));
          // split at zero for the 1/(1+|x|) weight
          auto seg_m1 = [&](double a, double b) {
            if (b <= a) return 0.0;
            if (a >= 0)
              return d * (b - a) + (c - d) * (std::log1p(b) - std::log1p(a));
            return -d * (b - a) - (c + d) * (std::log1p(-b) - std::log1p(-a));
          };
          m1 += seg_m1(std::max(x1, 0.0), std::max(x2, 0.0)) +
                seg_m1(std::min(x1, 0.0), std::min(x2, 0.0));
        }
        break;
    }
  }
  for (const auto& a : kappa.atoms()) {
    m0 += a.weight;
    m1 += a.weight / (1 + std::abs(a.location));
    m2 += a.weight / (1 + sq(a.location));
  }
  if (kappa.comb()) {
    m0 = kInf;
    m1 = kInf;
    const double tau = kappa.comb()->tau;
    m2 += kappa.comb()->atom_weight() * (M_PI / tau) / std::tanh(M_PI / tau);
  }
  for (const auto& c : kappa.cascades()) {
    for (int n = 1; n <= c.depth; ++n) {
      const double w = c.layer_weight(n);
      const double m = std::ldexp(1.0, n);
      m0 += w;
      m1 += w * (sf::digamma(2 * m + 1) - sf::digamma(m + 1));
      m2 += -w * (sf::digamma(Complex(m + 1, m)) - sf::digamma(Complex(1, m))).imag();
    }
  }
  if (!(m2 < kInf))
    throw Error(ErrorCode::DivergentM2, "growth gate failed: 1/(1+lambda^2) moment diverges");
  GrowthMoments out{m0, m1, m2, RegularityClass::H};
  if (!(m0 < kInf)) out.cls = (m1 < kInf) ? RegularityClass::HMinus1 : RegularityClass::HMinus2;
  return out;
}

// ---------------------------------------------------------------------------
// G function

double g_function(const CouplingMeasure& kappa, double lambda, double threshold) {
  return g_function_report(kappa, lambda, threshold).value;
}

GFunctionReport g_function_report(const CouplingMeasure& kappa, double lambda,
                                  double threshold) {
  GFunctionReport rep;
  auto diverge = [&](const std::string& why) {
    rep.value = kInf;
    rep.divergent = true;
    rep.reason = why;
    return rep;
  };

  double value = 0;
  for (const auto& a : kappa.atoms()) {
    if (lambda == a.location) return diverge("point mass at the probe location");
    value += a.weight / sq(lambda - a.location);
  }
  if (kappa.comb()) {
    const double tau = kappa.comb()->tau;
    const double j = std::nearbyint(lambda / tau);
    if (nearly_equal(lambda, j * tau)) return diverge("comb point mass at the probe location");
    const double s = sf::sinpi(lambda / tau);
    value += kappa.comb()->atom_weight() * sq(M_PI / tau) / sq(s);
  }
  for (const auto& p : kappa.pieces()) {
    switch (p.family) {
      case DensityPiece::Family::Flat:
        if (p.support.contains(lambda))
          return diverge("probe inside positive density");
        value += p.level * ((std::isinf(p.support.hi) ? 0 : 1 / (lambda - p.support.hi)) -
                            (std::isinf(p.support.lo) ? 0 : 1 / (lambda - p.support.lo)));
        break;
      case DensityPiece::Family::Sinusoidal: {
        const double k = std::nearbyint(0.5 * p.tau * lambda / M_PI);
        const double lam0 = 2 * M_PI * k / p.tau;
        const bool at_zero = nearly_equal(lambda, lam0);
        if (p.support.contains(lambda) && !at_zero)
          return diverge("probe inside positive density");
        value += sinusoidal_g(p, lambda, at_zero && p.support.contains(lambda), lam0);
        break;
      }
      case DensityPiece::Family::Tabulated: {
        const auto info = classify_tab_point(p, lambda);
        if (info.positive) return diverge("probe inside positive density");
        if (info.log_divergent)
          return diverge("isolated linear density zero: kernel integral diverges logarithmically");
        for (std::size_t i = 0; i + 1 < p.grid.size(); ++i) {
          const double x1 = p.grid[i], x2 = p.grid[i + 1];
          if (p.values[i] == 0 && p.values[i + 1] == 0) continue;
          const double d = (p.values[i + 1] - p.values[i]) / (x2 - x1);
          const double c = p.values[i] - d * x1;
          value += linear_kernel_segment(c, d, lambda, x1, x2);
        }
        break;
      }
    }
  }

  // Cascades: follow the ideal layer series; `depth` does not cap the probe.
  constexpr int kLevelCap = 1000;
  for (const auto& c : kappa.cascades()) {
    int hit_level = 0;
    if (lambda > 0 && lambda <= 1) hit_level = std::max(1, dyadic_order(lambda));
    double cval = 0, prev_incr = kInf;
    int consec = 0;
    bool settled = false;
    for (int n = 1; n <= kLevelCap; ++n) {
      rep.stop_level = n;
      if (n == hit_level) {
        rep.partial_sum = kInf;
        return diverge("cascade point mass at the probe location (level " +
                       std::to_string(n) + ")");
      }
      const double m = std::ldexp(1.0, n);
      const double y = std::ldexp(lambda, n);
      double S;
      if (lambda > 0 && lambda < 1) {
        const double s = sf::sinpi(y);
        S = sq(M_PI) / sq(s) - sf::trigamma(y) - sf::trigamma(m + 1 - y);
      } else if (lambda > 1) {
        S = sf::trigamma(y - m) - sf::trigamma(y);
      } else {  // lambda <= 0
        S = sf::trigamma(1 - y) - sf::trigamma(m + 1 - y);
      }
      const double incr = c.layer_weight(n) * m * S;
      cval += incr;
      if (rep.cascade_partials.size() < 64) rep.cascade_partials.push_back(cval);
      rep.partial_sum = cval;
      if (!std::isfinite(cval) || cval > threshold)
        return diverge("cascade partial sums exceeded the divergence threshold");
      if (incr <= 1e-13 * std::max(cval, DBL_MIN)) {
        if (++consec >= 3) {
          const double q = prev_incr > 0 ? std::min(incr / prev_incr, 0.999) : 0;
          cval += incr * q / (1 - q);
          settled = true;
          break;
        }
      } else {
        consec = 0;
      }
      prev_incr = incr;
    }
    if (!settled)
      return diverge("cascade partial sums did not stabilize by the level cap");
    value += cval;
  }

  if (!std::isfinite(value)) return diverge("kernel integral overflow near a point mass");
  rep.value = value;
  return rep;
}

// ---------------------------------------------------------------------------
// Support topology

SupportTopology support_topology(const CouplingMeasure& kappa, Interval window) {
  require(window.finite() && window.lo < window.hi, ErrorCode::Argument,
          "support topology needs a finite nonempty window");
  SupportTopology top;
  std::vector<double> zero_candidates;

  for (const auto& p : kappa.pieces()) {
    const double lo = std::max(p.support.lo, window.lo);
    const double hi = std::min(p.support.hi, window.hi);
    if (!(lo <= hi)) continue;
    switch (p.family) {
      case DensityPiece::Family::Flat:
        top.density_runs.push_back({lo, hi});
        break;
      case DensityPiece::Family::Sinusoidal: {
        top.density_runs.push_back({lo, hi});
        const double step = 2 * M_PI / p.tau;
        for (auto j = static_cast<long long>(std::ceil(lo / step - 1e-9));
             j <= static_cast<long long>(std::floor(hi / step + 1e-9)); ++j) {
          const double z = static_cast<double>(j) * step;
          if (z >= lo && z <= hi) zero_candidates.push_back(z);
        }
        break;
      }
      case DensityPiece::Family::Tabulated: {
        // positive runs are maximal unions of segments with a positive value
        std::size_t i = 0;
        while (i + 1 < p.grid.size()) {
          if (p.values[i] == 0 && p.values[i + 1] == 0) {
            ++i;
            continue;
          }
          const std::size_t start = i;
          while (i + 1 < p.grid.size() && !(p.values[i] == 0 && p.values[i + 1] == 0)) ++i;
          const double a = std::max(p.grid[start], window.lo);
          const double b = std::min(p.grid[i], window.hi);
          if (a <= b) top.density_runs.push_back({a, b});
          // interior nodes with a zero value are isolated zeros of this run
          for (std::size_t k = start + 1; k < i; ++k)
            if (p.values[k] == 0 && p.grid[k] > window.lo && p.grid[k] < window.hi)
              zero_candidates.push_back(p.grid[k]);
        }
        break;
      }
    }
  }

  std::sort(top.density_runs.begin(), top.density_runs.end(),
            [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
  std::vector<Interval> merged;
  for (const auto& r : top.density_runs) {
    if (!merged.empty() && r.lo <= merged.back().hi)
      merged.back().hi = std::max(merged.back().hi, r.hi);
    else
      merged.push_back(r);
  }
  top.density_runs = std::move(merged);

  // keep a zero candidate only where the total density really vanishes
  std::sort(zero_candidates.begin(), zero_candidates.end());
  for (double z : zero_candidates) {
    if (!top.isolated_zeros.empty() && nearly_equal(top.isolated_zeros.back(), z)) continue;
    bool covered = false;
    for (const auto& p : kappa.pieces()) {
      if (!p.support.contains(z)) continue;
      if (p.family == DensityPiece::Family::Flat) {
        covered = true;
      } else if (p.family == DensityPiece::Family::Sinusoidal) {
        const double k = std::nearbyint(0.5 * p.tau * z / M_PI);
        if (!nearly_equal(z, 2 * M_PI * k / p.tau)) covered = true;
      } else {
        const auto info = classify_tab_point(p, z);
        if (info.positive) covered = true;
      }
      if (covered) break;
    }
    if (!covered) top.isolated_zeros.push_back(z);
  }

  for (const auto& a : kappa.atoms())
    if (window.contains(a.location)) top.point_masses.push_back(a.location);
  if (kappa.comb()) {
    top.has_comb = true;
    const double tau = kappa.comb()->tau;
    for (auto j = static_cast<long long>(std::ceil(window.lo / tau));
         j <= static_cast<long long>(std::floor(window.hi / tau)); ++j)
      top.point_masses.push_back(static_cast<double>(j) * tau);
  }
  std::sort(top.point_masses.begin(), top.point_masses.end());

  if (!kappa.cascades().empty()) {
    const double a = std::max(0.0, window.lo), b = std::min(1.0, window.hi);
    if (a < b) top.cascade_hulls.push_back({a, b});
  }

  return top;
}

}  // namespace fl
