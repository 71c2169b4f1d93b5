#include "flspec/numerics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <mutex>
#include <queue>
#include <thread>

namespace fl {

const char* error_code_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::Argument: return "Argument";
    case ErrorCode::Parse: return "Parse";
    case ErrorCode::Validation: return "Validation";
    case ErrorCode::DivergentM2: return "DivergentM2";
    case ErrorCode::QuadratureFailure: return "QuadratureFailure";
    case ErrorCode::NonMonotonePiece: return "NonMonotonePiece";
    case ErrorCode::EvaluationDomain: return "EvaluationDomain";
    case ErrorCode::AtomCollision: return "AtomCollision";
    case ErrorCode::NonConvergent: return "NonConvergent";
    case ErrorCode::DomainViolation: return "DomainViolation";
    case ErrorCode::NoContinuation: return "NoContinuation";
    case ErrorCode::WindowInsideAcSupport: return "WindowInsideAcSupport";
    case ErrorCode::NotAnEigenvalue: return "NotAnEigenvalue";
    case ErrorCode::ZeroDerivative: return "ZeroDerivative";
  }
  return "Unknown";
}

namespace num {
namespace {

// QUADPACK dqk15 abscissae/weights. xgk holds the positive Kronrod nodes; the
// odd-indexed ones are the embedded Gauss-7 nodes.
constexpr double kXgk[8] = {
    0.991455371120813, 0.949107912342759, 0.864864423359769, 0.741531185599394,
    0.586087235467691, 0.405845151377397, 0.207784955007898, 0.0};
constexpr double kWgk[8] = {
    0.022935322010529, 0.063092092629979, 0.104790010322250, 0.140653259715525,
    0.169004726639267, 0.190350578064785, 0.204432940075298, 0.209482141084728};
constexpr double kWg[4] = {
    0.129484966168870, 0.279705391489277, 0.381830050505119, 0.417959183673469};

template <typename T>
struct Seg {
  double a, b;
  T value;
  double err;
};

template <typename T>
void gk15(const std::function<T(double)>& f, double a, double b, T& value, double& err) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  T fc = f(c);
  T res_g = kWg[3] * fc;
  T res_k = kWgk[7] * fc;
  for (int i = 0; i < 7; ++i) {
    const double dx = h * kXgk[i];
    T f1 = f(c - dx);
    T f2 = f(c + dx);
    res_k += kWgk[i] * (f1 + f2);
    if (i % 2 == 1) res_g += kWg[i / 2] * (f1 + f2);
  }
  value = res_k * h;
  err = std::abs((res_k - res_g) * h);
  // standard dqk15 error sharpening is overkill here; the plain |K-G| bound
  // together with adaptive splitting is reliable for our smooth-by-split use.
}

template <typename T, typename R>
R adaptive(const std::function<T(double)>& f, double a, double b,
           const std::vector<double>& breaks, double abs_tol, long max_evals) {
  R out;
  if (a == b) return out;
  auto cmp = [](const Seg<T>& x, const Seg<T>& y) { return x.err < y.err; };
  std::priority_queue<Seg<T>, std::vector<Seg<T>>, decltype(cmp)> heap(cmp);

  std::vector<double> pts;
  pts.push_back(a);
  for (double p : breaks)
    if (p > a && p < b) pts.push_back(p);
  pts.push_back(b);
  std::sort(pts.begin(), pts.end());

  T total{};
  double total_err = 0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    Seg<T> s{pts[i], pts[i + 1], T{}, 0};
    gk15(f, s.a, s.b, s.value, s.err);
    out.evals += 15;
    total += s.value;
    total_err += s.err;
    heap.push(s);
  }

  double stuck_err = 0;  // error stranded on intervals at double resolution
  while (total_err + stuck_err > abs_tol && out.evals + 30 <= max_evals && !heap.empty()) {
    Seg<T> s = heap.top();
    if (s.err <= abs_tol * 1e-3 / static_cast<double>(heap.size() + 1)) break;
    heap.pop();
    const double m = 0.5 * (s.a + s.b);
    if (m <= s.a || m >= s.b) {
      total_err -= s.err;
      stuck_err += s.err;
      continue;
    }
    Seg<T> l{s.a, m, T{}, 0}, r{m, s.b, T{}, 0};
    gk15(f, l.a, l.b, l.value, l.err);
    gk15(f, r.a, r.b, r.value, r.err);
    out.evals += 30;
    total += l.value + r.value - s.value;
    total_err += l.err + r.err - s.err;
    heap.push(l);
    heap.push(r);
  }
  out.value = total;
  out.error = total_err + stuck_err;
  return out;
}

}  // namespace

QuadResult integrate(const std::function<double(double)>& f, double a, double b,
                     double abs_tol, long max_evals) {
  return adaptive<double, QuadResult>(f, a, b, {}, abs_tol, max_evals);
}

QuadResultC integrate_c(const std::function<Complex(double)>& f, double a, double b,
                        double abs_tol, long max_evals) {
  return adaptive<Complex, QuadResultC>(f, a, b, {}, abs_tol, max_evals);
}

QuadResult integrate_split(const std::function<double(double)>& f, double a, double b,
                           const std::vector<double>& breaks, double abs_tol,
                           long max_evals) {
  return adaptive<double, QuadResult>(f, a, b, breaks, abs_tol, max_evals);
}

QuadResultC integrate_split_c(const std::function<Complex(double)>& f, double a, double b,
                              const std::vector<double>& breaks, double abs_tol,
                              long max_evals) {
  return adaptive<Complex, QuadResultC>(f, a, b, breaks, abs_tol, max_evals);
}

double bisect(const std::function<double(double)>& f, double lo, double hi,
              double xtol, int max_iter) {
  double flo = f(lo);
  double fhi = f(hi);
  if (flo == 0) return lo;
  if (fhi == 0) return hi;
  if ((flo > 0) == (fhi > 0))
    throw Error(ErrorCode::Argument, "bisect: endpoints do not bracket a sign change");
  for (int i = 0; i < max_iter && (hi - lo) > xtol; ++i) {
    const double m = 0.5 * (lo + hi);
    if (m <= lo || m >= hi) break;
    const double fm = f(m);
    if (fm == 0) return m;
    if ((fm > 0) == (flo > 0)) {
      lo = m;
      flo = fm;
    } else {
      hi = m;
    }
  }
  return 0.5 * (lo + hi);
}

double newton_bisect(const std::function<double(double)>& f,
                     const std::function<double(double)>& df, double lo, double hi,
                     double xtol, int max_iter) {
  double flo = f(lo);
  double fhi = f(hi);
  if (flo == 0) return lo;
  if (fhi == 0) return hi;
  if ((flo > 0) == (fhi > 0))
    throw Error(ErrorCode::Argument, "newton_bisect: no sign change in bracket");
  double x = 0.5 * (lo + hi);
  double fx = f(x);
  for (int i = 0; i < max_iter; ++i) {
    if (fx == 0) return x;
    if ((fx > 0) == (flo > 0)) {
      lo = x;
      flo = fx;
    } else {
      hi = x;
    }
    if (hi - lo <= xtol) break;
    double step_x = x - fx / df(x);
    if (!(step_x > lo && step_x < hi)) step_x = 0.5 * (lo + hi);
    x = step_x;
    fx = f(x);
  }
  return x;
}

Extrapolated richardson(const std::vector<double>& h, const std::vector<double>& y) {
  const std::size_t n = h.size();
  if (n != y.size() || n < 2)
    throw Error(ErrorCode::Argument, "richardson: need matched samples, n >= 2");
  // Neville table for the polynomial in h through (h_i, y_i), evaluated at 0.
  std::vector<double> t(y);
  double prev = t[0];
  for (std::size_t k = 1; k < n; ++k) {
    for (std::size_t i = 0; i + k < n; ++i) {
      const double denom = h[i] - h[i + k];
      t[i] = (0.0 - h[i + k]) / denom * t[i] + (h[i] - 0.0) / denom * t[i + 1];
    }
    prev = (k + 1 < n) ? t[0] : prev;
  }
  // t[0] is the full-order head; compare against the (n-2)-order head.
  std::vector<double> t2(y.begin(), y.end() - 1);
  for (std::size_t k = 1; k < n - 1; ++k)
    for (std::size_t i = 0; i + k < n - 1; ++i) {
      const double denom = h[i] - h[i + k];
      t2[i] = -h[i + k] / denom * t2[i] + h[i] / denom * t2[i + 1];
    }
  return {t[0], std::abs(t[0] - t2[0])};
}

QuadResultC oscillatory_tail(double tau, double T, const Complex* f_derivs, int K) {
  // Int_T^inf e^{i tau s} f ds = -e^{i tau T} sum_k (-1)^k f^(k)(T) / (i tau)^{k+1}
  const Complex itau(0.0, tau);
  const Complex phase = std::exp(Complex(0.0, tau * T));
  Complex sum{0, 0};
  Complex pw = 1.0 / itau;
  double sign = 1.0;
  for (int k = 0; k < K; ++k) {
    sum += sign * f_derivs[k] * pw;
    pw /= itau;
    sign = -sign;
  }
  QuadResultC out;
  out.value = -phase * sum;
  out.error = std::abs(f_derivs[K - 1]) / std::pow(std::abs(tau), K);
  out.evals = K;
  return out;
}

void filon_moments(double theta, Complex m[4]) {
  if (std::abs(theta) < 0.5) {
    // Maclaurin: M_k = sum_m (-i theta)^m / m! * (1 + (-1)^{k+m}) / (k+m+1)
    for (int k = 0; k < 4; ++k) {
      Complex term(1.0, 0.0);
      Complex acc(0.0, 0.0);
      for (int mm = 0; mm < 24; ++mm) {
        if ((k + mm) % 2 == 0) acc += term * (2.0 / (k + mm + 1));
        term *= Complex(0.0, -theta) / double(mm + 1);
        if (std::abs(term) < 1e-20) break;
      }
      m[k] = acc;
    }
    return;
  }
  const double s = std::sin(theta);
  const double c = std::cos(theta);
  const double t2 = theta * theta;
  const double t3 = t2 * theta;
  const double t4 = t3 * theta;
  m[0] = Complex(2.0 * s / theta, 0.0);
  m[1] = Complex(0.0, 2.0 * (theta * c - s) / t2);
  m[2] = Complex(2.0 * ((t2 - 2.0) * s + 2.0 * theta * c) / t3, 0.0);
  m[3] = Complex(0.0, 2.0 * ((t3 - 6.0 * theta) * c - (3.0 * t2 - 6.0) * s) / t4);
}

namespace {
// Inverse of the Vandermonde at nodes {-1,-1/3,1/3,1}: rows give monomial
// coefficients c_k = sum_j inv[k][j] v_j. Exact rationals.
constexpr double kInv[4][4] = {
    {-1.0 / 16, 9.0 / 16, 9.0 / 16, -1.0 / 16},
    {1.0 / 16, -27.0 / 16, 27.0 / 16, -1.0 / 16},
    {9.0 / 16, -9.0 / 16, -9.0 / 16, 9.0 / 16},
    {-9.0 / 16, 27.0 / 16, -27.0 / 16, 9.0 / 16}};
}  // namespace

void cubic_fit(const double v[4], double c[4]) {
  for (int k = 0; k < 4; ++k)
    c[k] = kInv[k][0] * v[0] + kInv[k][1] * v[1] + kInv[k][2] * v[2] + kInv[k][3] * v[3];
}

void cubic_fit(const Complex v[4], Complex c[4]) {
  for (int k = 0; k < 4; ++k)
    c[k] = kInv[k][0] * v[0] + kInv[k][1] * v[1] + kInv[k][2] * v[2] + kInv[k][3] * v[3];
}

int worker_count_from_env() {
  if (const char* env = std::getenv("FL_WORKERS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  const unsigned hc = std::thread::hardware_concurrency();
  return hc ? static_cast<int>(hc) : 1;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn, int workers) {
  if (n == 0) return;
  int w = workers > 0 ? workers : worker_count_from_env();
  w = static_cast<int>(std::min<std::size_t>(w, n));
  if (w <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr err;
  std::mutex err_mx;
  std::vector<std::thread> pool;
  pool.reserve(w);
  for (int t = 0; t < w; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lk(err_mx);
          if (!err) err = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

}  // namespace num
}  // namespace fl
