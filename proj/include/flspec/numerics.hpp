#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace fl {

using Complex = std::complex<double>;

enum class ErrorCode {
  Argument,
  Parse,
  Validation,
  DivergentM2,
  QuadratureFailure,
  NonMonotonePiece,
  EvaluationDomain,
  AtomCollision,
  NonConvergent,
  DomainViolation,
  NoContinuation,
  WindowInsideAcSupport,
  NotAnEigenvalue,
  ZeroDerivative,
};

struct Error : std::runtime_error {
  ErrorCode code;
  Error(ErrorCode c, const std::string& msg) : std::runtime_error(msg), code(c) {}
};

const char* error_code_name(ErrorCode c);

namespace num {

// relative-tolerance comparison used for "is this probe on a lattice point"
// style decisions; 1e-14 covers accumulated rounding in products like j*tau
inline bool nearly_equal(double a, double b) {
  return std::abs(a - b) <= 1e-14 * std::max({1.0, std::abs(a), std::abs(b)});
}

struct QuadResult {
  double value = 0;
  double error = 0;
  long evals = 0;
};

struct QuadResultC {
  Complex value{0, 0};
  double error = 0;
  long evals = 0;
};

// Adaptive Gauss-Kronrod 7-15 on a finite interval. Splits the worst
// subinterval until the summed error estimate drops below abs_tol or the
// evaluation budget runs out; never throws, the caller inspects .error.
QuadResult integrate(const std::function<double(double)>& f, double a, double b,
                     double abs_tol, long max_evals = 200000);
QuadResultC integrate_c(const std::function<Complex(double)>& f, double a, double b,
                        double abs_tol, long max_evals = 200000);

// As above but the initial subdivision is forced through the given interior
// break points (used to straddle known spikes and principal-value splits).
QuadResult integrate_split(const std::function<double(double)>& f, double a, double b,
                           const std::vector<double>& breaks, double abs_tol,
                           long max_evals = 400000);
QuadResultC integrate_split_c(const std::function<Complex(double)>& f, double a, double b,
                              const std::vector<double>& breaks, double abs_tol,
                              long max_evals = 400000);

// Bisection on a bracketing pair, driving the bracket below xtol; f(lo) and
// f(hi) must have opposite signs. Returns the midpoint of the final bracket.
double bisect(const std::function<double(double)>& f, double lo, double hi,
              double xtol, int max_iter = 200);

// Safeguarded Newton: falls back to bisection whenever the Newton step leaves
// the current bracket. Needs f monotone-ish inside the bracket for best
// behaviour but stays correct for any continuous f with a sign change.
double newton_bisect(const std::function<double(double)>& f,
                     const std::function<double(double)>& df, double lo, double hi,
                     double xtol, int max_iter = 120);

// Richardson extrapolation in powers of h for samples (h_i, y_i) with
// geometrically decreasing h. Returns the apex of the Neville table and a
// stability estimate (difference of the last two column heads).
struct Extrapolated {
  double value;
  double stability;
};
Extrapolated richardson(const std::vector<double>& h, const std::vector<double>& y);

// Asymptotic tail Int_T^inf exp(i tau s) f(s) ds from the first K derivatives
// of f at T (integration by parts; f_derivs[k] = f^(k)(T), K <= 6). Valid when
// f decays monotonically past T; the error estimate is the first omitted term.
QuadResultC oscillatory_tail(double tau, double T, const Complex* f_derivs, int K);

// Oscillatory panel moments: M_k(theta) = Int_{-1}^{1} s^k exp(-i theta s) ds
// for k = 0..3. Closed forms are numerically unstable near theta = 0, where a
// Maclaurin series takes over.
void filon_moments(double theta, Complex m[4]);

// Interpolate f through the 4 panel nodes s = {-1,-1/3,1/3,1} (values v) as a
// cubic in s; coefficients in the monomial basis.
void cubic_fit(const double v[4], double c[4]);
void cubic_fit(const Complex v[4], Complex c[4]);

inline double cubic_eval(const double c[4], double s) {
  return c[0] + s * (c[1] + s * (c[2] + s * c[3]));
}

// Runs fn(i) for i in [0, n) on up to `workers` threads (0 = use
// FL_WORKERS or hardware concurrency). Exceptions propagate.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn, int workers = 0);

int worker_count_from_env();

}  // namespace num
}  // namespace fl
