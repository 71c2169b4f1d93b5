#include "flspec/model.hpp"

#include <algorithm>
#include <cmath>

namespace fl {
namespace {

double sq(double x) { return x * x; }

void require(bool ok, ErrorCode code, const std::string& what) {
  if (!ok) throw Error(code, what);
}

// n interior probe points of an interval, mapped through tan / rational
// stretches when a side is infinite
std::vector<double> probe_points(Interval dom, int n) {
  std::vector<double> pts;
  pts.reserve(n);
  const bool alo = std::isinf(dom.lo), ahi = std::isinf(dom.hi);
  for (int i = 0; i < n; ++i) {
    const double t = (i + 0.5) / n;
    double k;
    if (!alo && !ahi)
      k = dom.lo + t * (dom.hi - dom.lo);
    else if (alo && ahi)
      k = std::tan(M_PI * (t - 0.5));
    else if (!alo)
      k = dom.lo + t / (1 - t) * std::max(1.0, std::abs(dom.lo));
    else
      k = dom.hi - (1 - t) / t * std::max(1.0, std::abs(dom.hi));
    pts.push_back(k);
  }
  std::sort(pts.begin(), pts.end());
  return pts;
}

double limit_at(const ScalarFn& w, double k_inf) {
  // dispersion limit at an infinite domain endpoint; IEEE pow carries the
  // signed-infinity arithmetic (pow(-inf, odd) = -inf, pow(inf, p<0) = 0)
  const double s = k_inf > 0 ? kInf : -kInf;
  switch (w.kind) {
    case ScalarFn::Kind::Const: return w.c0;
    case ScalarFn::Kind::Affine: return w.c1 == 0 ? w.c0 : w.c0 + w.c1 * s;
    case ScalarFn::Kind::Power: return w.c1 == 0 ? w.c0 : w.c0 * std::pow(s, w.c1);
    case ScalarFn::Kind::Tabulated: break;  // finite domain enforced upstream
  }
  return w(k_inf);
}

struct BranchInverse {
  const DispersionPiece* piece;
  std::vector<double> probes;      // sorted k probes
  std::vector<double> w_at_probe;  // dispersion values there
  bool increasing;

  double operator()(double lambda) const {
    const auto& w = piece->w;
    if (w.kind == ScalarFn::Kind::Affine && w.c1 != 0) return (lambda - w.c0) / w.c1;
    if (w.kind == ScalarFn::Kind::Power && piece->domain.lo >= 0 && w.c0 != 0 &&
        w.c1 != 0) {
      const double r = lambda / w.c0;
      if (r >= 0) return std::pow(r, 1.0 / w.c1);
    }
    // monotone bisection fallback, bracket from the probe table
    double lo = probes.front(), hi = probes.back();
    auto above = [&](double wv) { return increasing ? wv >= lambda : wv <= lambda; };
    for (std::size_t i = 0; i < probes.size(); ++i) {
      if (!above(w_at_probe[i])) lo = probes[i];
      if (above(w_at_probe[i])) { hi = probes[i]; break; }
    }
    // expand past the probe range if the target escapes it
    for (int g = 0; g < 300 && !above(piece->w(hi)); ++g)
      hi = hi * 2 + (hi >= 0 ? 1 : 0);
    for (int g = 0; g < 300 && above(piece->w(lo)); ++g)
      lo = lo * 2 - (lo <= 0 ? 1 : 0);
    return num::bisect([&](double k) { return piece->w(k) - lambda; }, lo, hi,
                       1e-14 * std::max({1.0, std::abs(lo), std::abs(hi)}));
  }
};

}  // namespace

double ScalarFn::operator()(double k) const {
  switch (kind) {
    case Kind::Const: return c0;
    case Kind::Affine: return c0 + c1 * k;
    case Kind::Power: return c0 * std::pow(k, c1);
    case Kind::Tabulated: {
      if (k <= grid.front()) return values.front();
      if (k >= grid.back()) return values.back();
      const auto it = std::upper_bound(grid.begin(), grid.end(), k);
      const std::size_t i = it - grid.begin() - 1;
      const double t = (k - grid[i]) / (grid[i + 1] - grid[i]);
      return values[i] + t * (values[i + 1] - values[i]);
    }
  }
  return 0;
}

ScalarFn ScalarFn::derivative() const {
  switch (kind) {
    case Kind::Const: return constant(0);
    case Kind::Affine: return constant(c1);
    case Kind::Power:
      if (c1 == 0) return constant(0);
      return power(c0 * c1, c1 - 1);
    case Kind::Tabulated:
      throw Error(ErrorCode::Argument,
                  "tabulated scalar functions need an explicit derivative");
  }
  return constant(0);
}

ScalarFn ScalarFn::constant(double v) { return {Kind::Const, v, 0, {}, {}}; }
ScalarFn ScalarFn::affine(double intercept, double slope) {
  return {Kind::Affine, intercept, slope, {}, {}};
}
ScalarFn ScalarFn::power(double coef, double exponent) {
  return {Kind::Power, coef, exponent, {}, {}};
}
ScalarFn ScalarFn::tabulated(std::vector<double> grid, std::vector<double> values) {
  require(grid.size() >= 2 && grid.size() == values.size(), ErrorCode::Argument,
          "tabulated scalar function needs matching grid/values, size >= 2");
  require(std::is_sorted(grid.begin(), grid.end()), ErrorCode::Argument,
          "tabulated grid must be sorted");
  ScalarFn f;
  f.kind = Kind::Tabulated;
  f.grid = std::move(grid);
  f.values = std::move(values);
  return f;
}

const DispersionPiece* DispersionModel::piece_at(double k) const {
  for (const auto& p : pieces)
    if (p.domain.contains(k)) return &p;
  return nullptr;
}

double DispersionModel::omega(double k) const {
  const auto* p = piece_at(k);
  require(p != nullptr, ErrorCode::EvaluationDomain,
          "no dispersion branch covers the requested momentum");
  return p->w(k);
}

double DispersionModel::jacobian(double k) const {
  if (geometry != Geometry::Radial || dimension == 1) return 1.0;
  return std::pow(k, dimension - 1);
}

double DispersionModel::coupling_density(double k) const {
  return sq(form_factor(k)) * mu_density(k) * jacobian(k);
}

CouplingMeasure pushforward(const DispersionModel& model, double tol) {
  require(model.dimension >= 1, ErrorCode::Argument, "dimension must be >= 1");
  require(!model.pieces.empty() || !model.mu_atoms.empty(), ErrorCode::Argument,
          "model carries neither dispersion branches nor point masses");
  if (model.geometry == Geometry::Radial)
    for (const auto& p : model.pieces)
      require(p.domain.lo >= 0, ErrorCode::Argument,
              "radial branches must live on r >= 0");

  std::vector<DensityPiece> out_pieces;
  std::vector<Atom> out_atoms;

  for (const auto& piece : model.pieces) {
    require(!(piece.w.kind == ScalarFn::Kind::Tabulated && !piece.domain.finite()),
            ErrorCode::Argument, "tabulated dispersions need a finite branch domain");

    BranchInverse inv{&piece, probe_points(piece.domain, 33), {}, false};
    for (double k : inv.probes) inv.w_at_probe.push_back(piece.w(k));

    int sign = 0;
    for (double k : inv.probes) {
      const double d = piece.wprime(k);
      require(d != 0 && std::isfinite(d), ErrorCode::NonMonotonePiece,
              "dispersion derivative vanishes inside branch '" + piece.name + "'");
      const int s = d > 0 ? 1 : -1;
      require(sign == 0 || s == sign, ErrorCode::NonMonotonePiece,
              "dispersion derivative changes sign inside branch '" + piece.name + "'");
      sign = s;
    }
    inv.increasing = sign > 0;

    const double wa = std::isinf(piece.domain.lo) ? limit_at(piece.w, piece.domain.lo)
                                                  : piece.w(piece.domain.lo);
    const double wb = std::isinf(piece.domain.hi) ? limit_at(piece.w, piece.domain.hi)
                                                  : piece.w(piece.domain.hi);
    const double img_lo = std::min(wa, wb), img_hi = std::max(wa, wb);

    auto dens = [&](double lambda) {
      const double k = inv(lambda);
      return model.coupling_density(k) / std::abs(piece.wprime(k));
    };

    // constant transported density collapses to a Flat piece
    const auto lam_probes = probe_points({img_lo, img_hi}, 9);
    std::vector<double> fv;
    for (double l : lam_probes) fv.push_back(dens(l));
    const double fmax = *std::max_element(fv.begin(), fv.end());
    const double fmin = *std::min_element(fv.begin(), fv.end());
    if (fmax <= 1e-300) continue;  // zero-density branch (pure point models)
    if (fmax - fmin <= 5e-12 * std::max(1.0, fmax)) {
      out_pieces.push_back(DensityPiece::flat(fv[fv.size() / 2], img_lo, img_hi));
      continue;
    }

    // non-constant density: find finite sampling bounds, classifying each
    // infinite tail as eventually-flat or negligible
    double core_lo = img_lo, core_hi = img_hi;
    auto settle_tail = [&](double direction) {
      const double anchor =
          std::max({1.0, std::abs(img_lo) * (std::isinf(img_lo) ? 0 : 1),
                    std::abs(img_hi) * (std::isinf(img_hi) ? 0 : 1)});
      double lam = anchor * direction;
      for (int j = 0; j < 40; ++j, lam *= 4) {
        const double f1 = dens(lam), f2 = dens(2 * lam), f4 = dens(4 * lam);
        const double scale = std::max({1.0, fmax});
        if (std::abs(f1 - f2) <= 1e-9 * scale && std::abs(f2 - f4) <= 1e-9 * scale) {
          if (f4 <= 1e-13 * scale) return lam;  // decayed: truncate here
          out_pieces.push_back(
              DensityPiece::flat(f4, direction > 0 ? lam : -kInf,
                                 direction > 0 ? kInf : lam));
          return lam;
        }
      }
      throw Error(ErrorCode::EvaluationDomain,
                  "branch '" + piece.name + "' has a tail that neither flattens nor decays");
    };
    if (std::isinf(img_hi)) core_hi = settle_tail(+1);
    if (std::isinf(img_lo)) core_lo = settle_tail(-1);

    // adaptive piecewise-linear sampling of the core
    std::vector<double> xs(65), ys;
    for (int i = 0; i < 65; ++i) xs[i] = core_lo + i * (core_hi - core_lo) / 64;
    for (double x : xs) ys.push_back(std::max(0.0, dens(x)));
    for (int pass = 0; pass < 10 && xs.size() < 4000; ++pass) {
      std::vector<double> nx, ny;
      bool grew = false;
      for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
        nx.push_back(xs[i]);
        ny.push_back(ys[i]);
        const double xm = 0.5 * (xs[i] + xs[i + 1]);
        const double fm = std::max(0.0, dens(xm));
        if (std::abs(fm - 0.5 * (ys[i] + ys[i + 1])) >
            std::max(tol, 1e-8 * std::max(1.0, fmax))) {
          nx.push_back(xm);
          ny.push_back(fm);
          grew = true;
        }
      }
      nx.push_back(xs.back());
      ny.push_back(ys.back());
      xs = std::move(nx);
      ys = std::move(ny);
      if (!grew) break;
    }
    out_pieces.push_back(DensityPiece::tabulated(xs, ys));
  }

  for (const auto& a : model.mu_atoms) {
    const double w = sq(model.form_factor(a.location)) * a.weight;
    if (w > 0) out_atoms.push_back({model.omega(a.location), w});
  }

  return CouplingMeasure(std::move(out_pieces), std::move(out_atoms), {}, {});
}

}  // namespace fl
