#include "flspec/selfenergy.hpp"

#include <cmath>

#include "flspec/special.hpp"

namespace fl {
namespace {

using num::nearly_equal;

double sq(double x) { return x * x; }

Complex kernel(double l, Complex z) { return 1.0 / (l - z) - l / (1 + l * l); }

double kernel_re(double l, double x) { return 1.0 / (l - x) - l / (1 + l * l); }

// lambda-derivatives of the kernel at lambda = T, orders 0..3
void kernel_derivs(double T, Complex z, Complex d[4]) {
  const Complex u = T - z;
  const double q = 1 + T * T;
  d[0] = 1.0 / u - T / q;
  d[1] = -1.0 / (u * u) - (1 - T * T) / (q * q);
  d[2] = 2.0 / (u * u * u) - (2 * T * T * T - 6 * T) / (q * q * q);
  d[3] = -6.0 / (u * u * u * u) + 6 * (T * T * T * T - 6 * T * T + 1) / (q * q * q * q);
}

// lambda-derivatives of 1/(lambda - z)^2 at lambda = T
void kernel2_derivs(double T, Complex z, Complex d[4]) {
  const Complex u = T - z;
  d[0] = 1.0 / (u * u);
  d[1] = -2.0 / (u * u * u);
  d[2] = 6.0 / (u * u * u * u);
  d[3] = -24.0 / (u * u * u * u * u);
}

// antiderivative of the flat-density kernel: log((lambda-z)/sqrt(1+lambda^2))
Complex flat_antideriv(double l, Complex z) {
  return std::log(Complex(l, 0) - z) - 0.5 * std::log1p(l * l);
}

Complex flat_diff(Complex z, double lo, double hi) {
  const Complex top = std::isinf(hi) ? Complex(0, 0) : flat_antideriv(hi, z);
  Complex bot;
  if (std::isinf(lo)) {
    // the ratio tends to -1 from the half plane opposite to Im z; a genuinely
    // real z takes the principal branch (+i pi) to match finite evaluations
    bot = Complex(0, z.imag() > 0 ? -M_PI : M_PI);
  } else {
    bot = flat_antideriv(lo, z);
  }
  return top - bot;
}

// boundary (principal value) version; limits at +-inf vanish
double flat_diff_re(double x, double lo, double hi) {
  auto F = [&](double l) { return std::log(std::abs(l - x)) - 0.5 * std::log1p(l * l); };
  const double top = std::isinf(hi) ? 0.0 : F(hi);
  const double bot = std::isinf(lo) ? 0.0 : F(lo);
  return top - bot;
}

struct CosPart {
  Complex value{0, 0};
  double err = 0;
};

// Int cos(tau l) K(l) dl over the support, where K and its derivative table
// come from the caller (self-energy kernel or its z-derivative). The core
// around ref = Re z is quadrature; infinite sides go through
// integration-by-parts tails, finite leftovers through plain quadrature.
template <typename KernelFn, typename DerivFn>
CosPart cos_oscillatory_integral(double tau, Interval sup, Complex z, double tol,
                                 KernelFn&& K, DerivFn&& derivs) {
  const double ref = z.real();
  const double R = 500.0 / tau + 10.0;
  const double cl = std::min(std::max(sup.lo, ref - R), sup.hi);
  const double ch = std::max(std::min(sup.hi, ref + R), cl);
  CosPart out;
  auto f = [&](double l) { return std::cos(tau * l) * K(l); };
  if (ch > cl) {
    auto q = num::integrate_c(f, cl, ch, tol);
    out.value += q.value;
    out.err += q.error;
  }
  if (std::isinf(sup.hi)) {
    Complex d[4];
    derivs(ch, d);
    const auto t1 = num::oscillatory_tail(tau, ch, d, 4);
    const auto t2 = num::oscillatory_tail(-tau, ch, d, 4);
    out.value += 0.5 * (t1.value + t2.value);
    out.err += 0.5 * (t1.error + t2.error);
  } else if (sup.hi > ch) {
    auto q = num::integrate_c(f, ch, sup.hi, tol);
    out.value += q.value;
    out.err += q.error;
  }
  if (std::isinf(sup.lo)) {
    Complex d[4], g[4];
    derivs(cl, d);
    for (int k = 0; k < 4; ++k) g[k] = (k % 2 ? -d[k] : d[k]);  // l -> -l
    const auto t1 = num::oscillatory_tail(tau, -cl, g, 4);
    const auto t2 = num::oscillatory_tail(-tau, -cl, g, 4);
    out.value += 0.5 * (t1.value + t2.value);
    out.err += 0.5 * (t1.error + t2.error);
  } else if (sup.lo < cl) {
    auto q = num::integrate_c(f, sup.lo, cl, tol);
    out.value += q.value;
    out.err += q.error;
  }
  return out;
}

Complex sigma_piece(const DensityPiece& p, Complex z, double tol, double* err) {
  switch (p.family) {
    case DensityPiece::Family::Flat:
      return p.level * flat_diff(z, p.support.lo, p.support.hi);
    case DensityPiece::Family::Sinusoidal: {
      if (std::isinf(p.support.lo) && std::isinf(p.support.hi)) {
        // full-line closed form on either half-plane (Schwarz pair)
        const Complex zu = z.imag() > 0 ? z : std::conj(z);
        const Complex up =
            Complex(0, p.beta / 2) * (1.0 - std::exp(Complex(0, p.tau) * zu));
        return z.imag() > 0 ? up : std::conj(up);
      }
      const double L = p.beta / (2 * M_PI);
      const auto cp = cos_oscillatory_integral(
          p.tau, p.support, z, tol, [&](double l) { return kernel(l, z); },
          [&](double T, Complex d[4]) { kernel_derivs(T, z, d); });
      *err += L * cp.err;
      return L * (flat_diff(z, p.support.lo, p.support.hi) - cp.value);
    }
    case DensityPiece::Family::Tabulated: {
      Complex total{0, 0};
      for (std::size_t i = 0; i + 1 < p.grid.size(); ++i) {
        const double s1 = p.grid[i], s2 = p.grid[i + 1];
        const double d = (p.values[i + 1] - p.values[i]) / (s2 - s1);
        const double c = p.values[i] - d * s1;
        auto F = [&](double l) {
          return (c + d * z) * std::log(Complex(l, 0) - z) -
                 0.5 * c * std::log1p(l * l) + d * std::atan(l);
        };
        total += F(s2) - F(s1);
      }
      return total;
    }
  }
  return {};
}

// principal-value real part of a piece's boundary contribution
double piece_boundary_re(const DensityPiece& p, double x, double tol, double* err,
                         bool* log_edge) {
  const double lo = p.support.lo, hi = p.support.hi;
  switch (p.family) {
    case DensityPiece::Family::Flat:
      if (x == lo || x == hi) {
        *log_edge = true;
        return x == lo ? kInf : -kInf;
      }
      return p.level * flat_diff_re(x, lo, hi);
    case DensityPiece::Family::Tabulated: {
      if ((x == p.grid.front() || x == p.grid.back()) && p.rho(x) > 0) {
        *log_edge = true;
        return x == p.grid.front() ? kInf : -kInf;
      }
      double total = 0;
      for (std::size_t i = 0; i + 1 < p.grid.size(); ++i) {
        const double s1 = p.grid[i], s2 = p.grid[i + 1];
        const double d = (p.values[i + 1] - p.values[i]) / (s2 - s1);
        const double c = p.values[i] - d * s1;
        double t = -0.5 * c * (std::log1p(s2 * s2) - std::log1p(s1 * s1)) +
                   d * (std::atan(s2) - std::atan(s1));
        // log terms at a node equal to x cancel pairwise (continuous density)
        const double coef = c + d * x;
        if (coef != 0) {
          if (s2 != x) t += coef * std::log(std::abs(s2 - x));
          if (s1 != x) t -= coef * std::log(std::abs(s1 - x));
        }
        total += t;
      }
      return total;
    }
    case DensityPiece::Family::Sinusoidal: {
      // full-line support: the transform is entire and the PV collapses
      if (std::isinf(lo) && std::isinf(hi)) return (p.beta / 2) * std::sin(p.tau * x);
      const double L = p.beta / (2 * M_PI);
      const Complex zx(x, 0);
      if (!p.support.contains(x)) {
        const auto cp = cos_oscillatory_integral(
            p.tau, p.support, zx, tol, [&](double l) { return kernel(l, zx); },
            [&](double T, Complex d[4]) { kernel_derivs(T, zx, d); });
        *err += L * cp.err;
        return L * (flat_diff_re(x, lo, hi) - cp.value.real());
      }
      const double rho_x = p.rho(x);
      if ((x == lo || x == hi) && rho_x > 0) {
        *log_edge = true;
        return x == lo ? kInf : -kInf;
      }
      const double R = 500.0 / p.tau + 10.0;
      const double cl = std::max(lo, x - R), ch = std::min(hi, x + R);
      // subtracted principal value plus the regularising term in one pass
      const double beta = p.beta, tau = p.tau;
      auto h = [=](double l) {
        const double reg = -((beta / M_PI) * sq(std::sin(0.5 * tau * l))) * l / (1 + l * l);
        if (std::abs(l - x) < 1e-9)
          return (beta / (2 * M_PI)) * tau * std::sin(tau * x) + reg;
        const double rho_l = (beta / M_PI) * sq(std::sin(0.5 * tau * l));
        return (rho_l - rho_x) / (l - x) + reg;
      };
      auto core = num::integrate_split(h, cl, ch, {x}, tol);
      *err += core.error;
      double total = core.value;
      if (rho_x > 0) total += rho_x * std::log((ch - x) / (x - cl));
      // remainder outside the core: flat part closed, cosine part by parts
      auto cos_tail = [&](double T, bool left) {
        Complex d[4], g[4];
        kernel_derivs(T, zx, d);
        if (!left) {
          const auto t1 = num::oscillatory_tail(tau, T, d, 4);
          const auto t2 = num::oscillatory_tail(-tau, T, d, 4);
          *err += 0.5 * (t1.error + t2.error);
          return 0.5 * (t1.value + t2.value).real();
        }
        for (int k = 0; k < 4; ++k) g[k] = (k % 2 ? -d[k] : d[k]);
        const auto t1 = num::oscillatory_tail(tau, -T, g, 4);
        const auto t2 = num::oscillatory_tail(-tau, -T, g, 4);
        *err += 0.5 * (t1.error + t2.error);
        return 0.5 * (t1.value + t2.value).real();
      };
      auto far_quad = [&](double a, double b) {
        auto q = num::integrate(
            [&](double l) { return p.rho(l) * kernel_re(l, x); }, a, b, tol);
        *err += q.error;
        return q.value;
      };
      if (std::isinf(hi))
        total += L * (0.0 - (std::log(std::abs(ch - x)) - 0.5 * std::log1p(ch * ch))) -
                 L * cos_tail(ch, false);
      else if (hi > ch)
        total += far_quad(ch, hi);
      if (std::isinf(lo))
        total += L * (std::log(std::abs(cl - x)) - 0.5 * std::log1p(cl * cl)) -
                 L * cos_tail(cl, true);
      else if (lo < cl)
        total += far_quad(lo, cl);
      return total;
    }
  }
  return 0;
}

double cascade_reg(double m) {
  return (sf::digamma(Complex(m + 1, m)) - sf::digamma(Complex(1, m))).real();
}

struct Collision {
  bool hit = false;
  std::string what;
};

Collision point_mass_collision(const CouplingMeasure& kappa, double x) {
  for (const auto& a : kappa.atoms())
    if (nearly_equal(x, a.location)) return {true, "atom"};
  if (kappa.comb()) {
    const double tau = kappa.comb()->tau;
    const double j = std::nearbyint(x / tau);
    if (nearly_equal(x, j * tau)) return {true, "comb lattice point"};
  }
  for (const auto& c : kappa.cascades())
    if (x > 0 && x <= 1 && dyadic_order(x) <= c.depth) return {true, "cascade point"};
  return {};
}

std::vector<double> default_deltas() {
  std::vector<double> d;
  for (int k = 0; k < 7; ++k) d.push_back(std::pow(10.0, -2.0 - 0.5 * k));
  return d;
}

// Im Sigma(x + i delta): pure Poisson integral (the regularising term is real
// on the axis), with closed forms everywhere they exist.
double im_sigma_delta(const CouplingMeasure& kappa, double x, double delta, double tol) {
  double total = 0;
  for (const auto& a : kappa.atoms())
    total += a.weight * delta / (sq(a.location - x) + delta * delta);
  if (kappa.comb()) {
    const auto& cb = *kappa.comb();
    total += (-(cb.beta / 2) * sf::cot_pi(Complex(x, delta) / cb.tau)).imag();
  }
  for (const auto& c : kappa.cascades()) {
    const Complex zc(x, delta);
    for (int n = 1; n <= c.depth; ++n) {
      const double m = std::ldexp(1.0, n);
      total += c.layer_weight(n) *
               (sf::digamma(m + 1.0 - m * zc) - sf::digamma(1.0 - m * zc)).imag();
    }
  }
  for (const auto& p : kappa.pieces()) {
    const double lo = p.support.lo, hi = p.support.hi;
    auto atan_term = [&](double l) {
      if (std::isinf(l)) return l > 0 ? M_PI / 2 : -M_PI / 2;
      return std::atan((l - x) / delta);
    };
    switch (p.family) {
      case DensityPiece::Family::Flat:
        total += p.level * (atan_term(hi) - atan_term(lo));
        break;
      case DensityPiece::Family::Tabulated:
        for (std::size_t i = 0; i + 1 < p.grid.size(); ++i) {
          const double s1 = p.grid[i], s2 = p.grid[i + 1];
          const double d = (p.values[i + 1] - p.values[i]) / (s2 - s1);
          const double c = p.values[i] - d * s1;
          total += (c + d * x) * (atan_term(s2) - atan_term(s1)) +
                   0.5 * d * delta *
                       (std::log(sq(s2 - x) + delta * delta) -
                        std::log(sq(s1 - x) + delta * delta));
        }
        break;
      case DensityPiece::Family::Sinusoidal: {
        const Complex zc(x, delta);
        if (std::isinf(lo) && std::isinf(hi)) {
          total += (Complex(0, p.beta / 2) *
                    (1.0 - std::exp(Complex(0, p.tau) * zc))).imag();
        } else {
          double err = 0;
          total += sigma_piece(p, zc, tol, &err).imag();
        }
        break;
      }
    }
  }
  return total;
}

}  // namespace

SelfEnergyValue sigma(const CouplingMeasure& kappa, Complex z, double abs_tol) {
  if (z.imag() == 0)
    throw Error(ErrorCode::DomainViolation, "sigma requires Im z != 0");
  double err = 0;
  Complex total{0, 0};
  for (const auto& a : kappa.atoms()) total += a.weight * kernel(a.location, z);
  if (kappa.comb()) {
    const auto& cb = *kappa.comb();
    total += -(cb.beta / 2) * sf::cot_pi(z / cb.tau);
  }
  for (const auto& c : kappa.cascades()) {
    for (int n = 1; n <= c.depth; ++n) {
      const double m = std::ldexp(1.0, n);
      total += c.layer_weight(n) *
               (sf::digamma(m + 1.0 - m * z) - sf::digamma(1.0 - m * z) - cascade_reg(m));
    }
  }
  for (const auto& p : kappa.pieces()) total += sigma_piece(p, z, abs_tol, &err);
  if (err > 10 * abs_tol)
    throw Error(ErrorCode::QuadratureFailure,
                "self-energy quadrature error exceeds requested tolerance");
  SelfEnergyValue out;
  out.re = total.real();
  out.im = total.imag();
  out.pv_error_estimate = err;
  return out;
}

BoundaryValue sigma_boundary(const CouplingMeasure& kappa, double lambda, double abs_tol) {
  BoundaryValue bv;
  bv.lambda = lambda;
  bv.ac_density_at_lambda = kappa.density(lambda);
  auto& sv = bv.sigma_plus;

  const auto collision = point_mass_collision(kappa, lambda);
  if (collision.hit) {
    sv.im_divergent = true;
    sv.re = std::nan("");
    sv.im = std::nan("");
    return bv;
  }

  sv.im = M_PI * bv.ac_density_at_lambda;
  double re = 0, err = 0;
  bool log_edge = false;
  for (const auto& a : kappa.atoms()) re += a.weight * kernel_re(a.location, lambda);
  if (kappa.comb()) {
    const auto& cb = *kappa.comb();
    const double u = lambda / cb.tau;
    re += -(cb.beta / 2) * sf::cospi(u) / sf::sinpi(u);
  }
  for (const auto& c : kappa.cascades()) {
    for (int n = 1; n <= c.depth; ++n) {
      const double m = std::ldexp(1.0, n);
      re += c.layer_weight(n) *
            (sf::digamma(m + 1 - m * lambda) - sf::digamma(1 - m * lambda) - cascade_reg(m));
    }
  }
  for (const auto& p : kappa.pieces())
    re += piece_boundary_re(p, lambda, abs_tol, &err, &log_edge);
  if (!log_edge && err > 10 * abs_tol)
    throw Error(ErrorCode::QuadratureFailure,
                "boundary-value quadrature error exceeds requested tolerance");
  sv.re = re;
  sv.re_log_singular = log_edge;
  sv.pv_error_estimate = err;
  return bv;
}

Complex sigma_derivative(const CouplingMeasure& kappa, Complex z, double abs_tol) {
  if (z.imag() == 0)
    throw Error(ErrorCode::DomainViolation, "sigma_derivative requires Im z != 0");
  double err = 0;
  Complex total{0, 0};
  for (const auto& a : kappa.atoms()) {
    const Complex u = a.location - z;
    total += a.weight / (u * u);
  }
  if (kappa.comb()) {
    const auto& cb = *kappa.comb();
    const Complex s = sf::sinpi(z / cb.tau);
    total += (cb.beta * M_PI / (2 * cb.tau)) / (s * s);
  }
  for (const auto& c : kappa.cascades()) {
    for (int n = 1; n <= c.depth; ++n) {
      const double m = std::ldexp(1.0, n);
      total += c.layer_weight(n) * m *
               (sf::trigamma(1.0 - m * z) - sf::trigamma(m + 1.0 - m * z));
    }
  }
  for (const auto& p : kappa.pieces()) {
    const double lo = p.support.lo, hi = p.support.hi;
    switch (p.family) {
      case DensityPiece::Family::Flat: {
        const Complex top = std::isinf(hi) ? Complex(0, 0) : -1.0 / (hi - z);
        const Complex bot = std::isinf(lo) ? Complex(0, 0) : -1.0 / (lo - z);
        total += p.level * (top - bot);
        break;
      }
      case DensityPiece::Family::Sinusoidal: {
        if (std::isinf(lo) && std::isinf(hi)) {
          // derivative of the full-line closed form (Schwarz pair)
          const Complex zu = z.imag() > 0 ? z : std::conj(z);
          const Complex up =
              (p.beta * p.tau / 2) * std::exp(Complex(0, p.tau) * zu);
          total += z.imag() > 0 ? up : std::conj(up);
          break;
        }
        const double L = p.beta / (2 * M_PI);
        const Complex top = std::isinf(hi) ? Complex(0, 0) : -1.0 / (hi - z);
        const Complex bot = std::isinf(lo) ? Complex(0, 0) : -1.0 / (lo - z);
        const auto cp = cos_oscillatory_integral(
            p.tau, p.support, z, abs_tol,
            [&](double l) { const Complex u = l - z; return 1.0 / (u * u); },
            [&](double T, Complex d[4]) { kernel2_derivs(T, z, d); });
        err += L * cp.err;
        total += L * ((top - bot) - cp.value);
        break;
      }
      case DensityPiece::Family::Tabulated:
        for (std::size_t i = 0; i + 1 < p.grid.size(); ++i) {
          const double s1 = p.grid[i], s2 = p.grid[i + 1];
          const double d = (p.values[i + 1] - p.values[i]) / (s2 - s1);
          const double c = p.values[i] - d * s1;
          auto F = [&](double l) {
            return -(c + d * z) / (l - z) + d * std::log(Complex(l, 0) - z);
          };
          total += F(s2) - F(s1);
        }
        break;
    }
  }
  if (err > 10 * abs_tol)
    throw Error(ErrorCode::QuadratureFailure,
                "self-energy derivative quadrature error exceeds requested tolerance");
  return total;
}

double stieltjes_invert(const CouplingMeasure& kappa, double a, double b,
                        std::vector<double> deltas, double stab_tol) {
  if (!(a < b) || std::isinf(a) || std::isinf(b))
    throw Error(ErrorCode::Argument, "stieltjes_invert needs a finite interval a < b");
  if (deltas.empty()) deltas = default_deltas();
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    if (!(deltas[i] > 0) || (i && !(deltas[i] < deltas[i - 1])))
      throw Error(ErrorCode::Argument, "delta sequence must be decreasing positives");
  }

  std::vector<double> breaks;
  for (const auto& at : kappa.atoms())
    if (at.location > a && at.location < b) breaks.push_back(at.location);
  if (kappa.comb()) {
    const double tau = kappa.comb()->tau;
    for (auto j = static_cast<long long>(std::ceil(a / tau));
         j <= static_cast<long long>(std::floor(b / tau)); ++j) {
      const double p = static_cast<double>(j) * tau;
      if (p > a && p < b) breaks.push_back(p);
    }
  }
  for (const auto& c : kappa.cascades()) {
    const int levels = std::min(c.depth, 10);
    for (int n = 1; n <= levels; ++n) {
      const double m = std::ldexp(1.0, n);
      for (double j = std::max(1.0, std::ceil(a * m)); j <= std::min(m, std::floor(b * m));
           ++j)
        breaks.push_back(j / m);
    }
  }
  for (const auto& p : kappa.pieces()) {
    if (p.support.lo > a && p.support.lo < b) breaks.push_back(p.support.lo);
    if (p.support.hi > a && p.support.hi < b) breaks.push_back(p.support.hi);
  }

  std::vector<double> ys;
  ys.reserve(deltas.size());
  for (double d : deltas) {
    auto q = num::integrate_split(
        [&](double x) { return im_sigma_delta(kappa, x, d, 1e-10); }, a, b, breaks,
        1e-11, 2000000);
    ys.push_back(q.value / M_PI);
  }
  const auto ex = num::richardson(deltas, ys);
  if (!(std::abs(ex.stability) <= stab_tol * std::max(1.0, std::abs(ex.value))))
    throw Error(ErrorCode::NonConvergent,
                "stieltjes inversion did not stabilise along the delta ladder");
  return ex.value;
}

Complex sigma_closed_form(ClosedFormFamily family, double beta, double tau, Complex z) {
  switch (family) {
    case ClosedFormFamily::FlatLine:
      if (z.imag() == 0)
        throw Error(ErrorCode::DomainViolation, "flat-line closed form needs Im z != 0");
      return Complex(0, z.imag() > 0 ? beta / 2 : -beta / 2);
    case ClosedFormFamily::FlatHalfLine:
      if (z.imag() == 0 && z.real() >= 0)
        throw Error(ErrorCode::DomainViolation,
                    "half-line closed form is undefined on the cut [0, inf)");
      return -beta * std::log(-z);
    case ClosedFormFamily::Sinusoidal: {
      if (z.imag() == 0)
        throw Error(ErrorCode::DomainViolation, "sinusoidal closed form needs Im z != 0");
      const double t = std::abs(tau);
      if (z.imag() > 0)
        return Complex(0, beta / 2) * (1.0 - std::exp(Complex(0, t) * z));
      return std::conj(Complex(0, beta / 2) *
                       (1.0 - std::exp(Complex(0, t) * std::conj(z))));
    }
    case ClosedFormFamily::PeriodicComb: {
      const double t = std::abs(tau);
      const double j = std::nearbyint(z.real() / t);
      if (z.imag() == 0 && nearly_equal(z.real(), j * t))
        throw Error(ErrorCode::DomainViolation, "comb closed form has a pole at the lattice");
      return -(beta / 2) * sf::cot_pi(z / t);
    }
  }
  throw Error(ErrorCode::Argument, "unknown closed-form family");
}

}  // namespace fl
