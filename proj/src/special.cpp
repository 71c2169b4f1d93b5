#include "flspec/special.hpp"

#include <cmath>

namespace fl::sf {
namespace {

// Bernoulli tail coefficients B_{2n}/(2n) for the digamma asymptotic series.
constexpr double kDigammaTail[] = {
    1.0 / 12, -1.0 / 120, 1.0 / 252, -1.0 / 240, 1.0 / 132, -691.0 / 32760, 1.0 / 12};

// B_{2n} for the trigamma asymptotic series.
constexpr double kTrigammaTail[] = {
    1.0 / 6, -1.0 / 30, 1.0 / 42, -1.0 / 30, 5.0 / 66, -691.0 / 2730, 7.0 / 6};

constexpr double kAsymCut = 10.0;

}  // namespace

double sinpi(double x) {
  const double n = std::nearbyint(x);
  const double r = x - n;  // exact: n and x share exponent range
  const double s = std::sin(M_PI * r);
  return (std::fmod(std::fabs(n), 2.0) == 1.0) ? -s : s;
}

double cospi(double x) {
  const double n = std::nearbyint(x);
  const double r = x - n;
  const double c = std::cos(M_PI * r);
  return (std::fmod(std::fabs(n), 2.0) == 1.0) ? -c : c;
}

Complex sinpi(Complex z) {
  const double n = std::nearbyint(z.real());
  const double r = z.real() - n;
  const double y = z.imag();
  Complex s(std::sin(M_PI * r) * std::cosh(M_PI * y),
            std::cos(M_PI * r) * std::sinh(M_PI * y));
  return (std::fmod(std::fabs(n), 2.0) == 1.0) ? -s : s;
}

Complex cot_pi(Complex z) {
  const double y = z.imag();
  if (std::fabs(y) > 20.0) {
    // cot(pi z) -> -i sign(y) exponentially; avoid cosh/sinh overflow
    const double s = y > 0 ? 1.0 : -1.0;
    const Complex e = std::exp(Complex(0, 1) * (2.0 * M_PI) * (s > 0 ? z : -z));
    return Complex(0, -s) * (1.0 + e) / (1.0 - e);
  }
  const double n = std::nearbyint(z.real());
  const double r = z.real() - n;  // period-1 reduction, sign cancels in the ratio
  const Complex w = M_PI * Complex(r, y);
  return std::cos(w) / std::sin(w);
}

double digamma(double x) {
  double acc = 0;
  if (x < 0.5) {
    // psi(x) = psi(1-x) - pi cot(pi x)
    const double c = cospi(x), s = sinpi(x);
    acc = -M_PI * c / s;
    x = 1.0 - x;
  }
  while (x < kAsymCut) {
    acc -= 1.0 / x;
    x += 1.0;
  }
  const double inv2 = 1.0 / (x * x);
  double tail = 0, p = inv2;
  for (double coef : kDigammaTail) {
    tail += coef * p;
    p *= inv2;
  }
  return acc + std::log(x) - 0.5 / x - tail;
}

double trigamma(double x) {
  double acc = 0;
  double sign = 1;
  if (x < 0.5) {
    // psi'(x) = pi^2/sin^2(pi x) - psi'(1-x)
    const double s = sinpi(x);
    acc = M_PI * M_PI / (s * s);
    sign = -1;
    x = 1.0 - x;
  }
  double rec = 0;
  while (x < kAsymCut) {
    rec += 1.0 / (x * x);
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  double tail = 0, p = inv * inv2;
  for (double coef : kTrigammaTail) {
    tail += coef * p;
    p *= inv2;
  }
  const double core = inv + 0.5 * inv2 + tail;
  return acc + sign * (rec + core);
}

Complex digamma(Complex z) {
  Complex acc(0, 0);
  if (z.real() < 0.5) {
    acc = -M_PI * cot_pi(z);
    z = 1.0 - z;
  }
  while (z.real() < kAsymCut) {
    acc -= 1.0 / z;
    z += 1.0;
  }
  const Complex inv2 = 1.0 / (z * z);
  Complex tail(0, 0), p = inv2;
  for (double coef : kDigammaTail) {
    tail += coef * p;
    p *= inv2;
  }
  return acc + std::log(z) - 0.5 / z - tail;
}

Complex trigamma(Complex z) {
  Complex acc(0, 0);
  double sign = 1;
  if (z.real() < 0.5) {
    const Complex s = sinpi(z);
    acc = M_PI * M_PI / (s * s);
    sign = -1;
    z = 1.0 - z;
  }
  Complex rec(0, 0);
  while (z.real() < kAsymCut) {
    rec += 1.0 / (z * z);
    z += 1.0;
  }
  const Complex inv = 1.0 / z;
  const Complex inv2 = inv * inv;
  Complex tail(0, 0), p = inv * inv2;
  for (double coef : kTrigammaTail) {
    tail += coef * p;
    p *= inv2;
  }
  return acc + sign * (rec + inv + 0.5 * inv2 + tail);
}

double lambert_w0(double x) {
  if (x < 0) throw Error(ErrorCode::DomainViolation, "lambert_w0: negative argument");
  if (x == 0) return 0;
  double w;
  if (x < 1.0) {
    // series about 0, enough to seed Halley
    w = x * (1.0 - x + 1.5 * x * x);
  } else {
    const double l1 = std::log(x);
    if (l1 > 1.0) {
      const double l2 = std::log(l1);
      w = l1 - l2 + l2 / l1;
    } else {
      w = 0.5;
    }
  }
  for (int i = 0; i < 50; ++i) {
    const double e = std::exp(w);
    const double f = w * e - x;
    if (std::fabs(f) <= 1e-16 * std::fmax(1.0, std::fabs(x))) break;
    const double wp1 = w + 1.0;
    const double step = f / (e * wp1 - (w + 2.0) * f / (2.0 * wp1));
    w -= step;
    if (std::fabs(step) <= 1e-17 * std::fmax(1.0, std::fabs(w))) break;
  }
  return w;
}

}  // namespace fl::sf
