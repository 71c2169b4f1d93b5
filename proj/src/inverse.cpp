#include "flspec/inverse.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace fl {
namespace {

void require(bool ok, ErrorCode code, const std::string& what) {
  if (!ok) throw Error(code, what);
}

double endpoint_value(const ScalarFn& w, double end) {
  if (std::isfinite(end)) return w(end);
  const double s = end > 0 ? kInf : -kInf;
  switch (w.kind) {
    case ScalarFn::Kind::Const: return w.c0;
    case ScalarFn::Kind::Affine: return w.c1 == 0 ? w.c0 : w.c0 + w.c1 * s;
    case ScalarFn::Kind::Power: return w.c1 == 0 ? w.c0 : w.c0 * std::pow(s, w.c1);
    case ScalarFn::Kind::Tabulated: break;
  }
  return w(end);
}

Interval branch_image(const DispersionPiece& pc) {
  const double a = endpoint_value(pc.w, pc.domain.lo);
  const double b = endpoint_value(pc.w, pc.domain.hi);
  return {std::min(a, b), std::max(a, b)};
}

// interior probes, spread by the golden ratio so lattice-aligned features
// cannot hide from every probe
std::vector<double> interior_probes(Interval dom, int n) {
  std::vector<double> pts;
  double u = 0.381966;
  for (int i = 0; i < n; ++i) {
    u = u + 0.6180339887498949;
    u -= std::floor(u);
    const double t = 0.05 + 0.9 * u;
    double k;
    if (dom.finite())
      k = dom.lo + t * (dom.hi - dom.lo);
    else if (std::isfinite(dom.lo))
      k = dom.lo + t / (1 - t) * std::max(1.0, std::abs(dom.lo));
    else if (std::isfinite(dom.hi))
      k = dom.hi - t / (1 - t) * std::max(1.0, std::abs(dom.hi));
    else
      k = std::tan(M_PI * (t - 0.5));
    pts.push_back(k);
  }
  return pts;
}

// try to collapse f to a closed ScalarFn; callers sample-check the candidate
std::optional<ScalarFn> closed_profile(const DesignSpec& spec) {
  if (spec.dispersion.empty()) return std::nullopt;
  const auto& first = spec.dispersion.front();
  // a single flat target piece must cover every branch image
  const auto& tp = spec.target.pieces();
  if (tp.size() != 1 || tp[0].family != DensityPiece::Family::Flat)
    return std::nullopt;
  for (const auto& pc : spec.dispersion) {
    const auto im = branch_image(pc);
    if (!(tp[0].support.lo <= im.lo && im.hi <= tp[0].support.hi))
      return std::nullopt;
  }
  // even level split: images must agree pairwise or be disjoint; the sample
  // check after the fact rejects anything subtler
  const double level = tp[0].level;
  const int n = static_cast<int>(spec.dispersion.size());
  int sharing = 1;
  if (n > 1) {
    const auto im0 = branch_image(first);
    bool all_same = true, all_disjoint = true;
    for (int i = 1; i < n; ++i) {
      const auto im = branch_image(spec.dispersion[i]);
      all_same = all_same && im.lo == im0.lo && im.hi == im0.hi;
      all_disjoint = all_disjoint && (im.lo >= im0.hi || im.hi <= im0.lo);
    }
    if (all_same)
      sharing = n;
    else if (!all_disjoint)
      return std::nullopt;
  }

  const double dm1 = spec.geometry == Geometry::Radial ? spec.dimension - 1 : 0;
  switch (first.w.kind) {
    case ScalarFn::Kind::Affine: {
      // |w'| constant: f = level |c1| / (n k^(d-1))
      const double f0 = level * std::abs(first.w.c1) / sharing;
      if (dm1 == 0) return ScalarFn::constant(std::sqrt(f0));
      return ScalarFn::power(std::sqrt(f0), -dm1 / 2);
    }
    case ScalarFn::Kind::Power: {
      // |w'| = |c0 c1| k^(c1-1): f = level |c0 c1| k^(c1-1-(d-1)) / n
      const double f0 = level * std::abs(first.w.c0 * first.w.c1) / sharing;
      const double q = first.w.c1 - 1 - dm1;
      if (q == 0) return ScalarFn::constant(std::sqrt(f0));
      return ScalarFn::power(std::sqrt(f0), q / 2);
    }
    default:
      return std::nullopt;
  }
}

}  // namespace

DesignedFormFactor design_form_factor(const DesignSpec& spec) {
  require(!spec.dispersion.empty(), ErrorCode::Argument,
          "design needs at least one dispersion branch");
  require(spec.target.atoms().empty() && !spec.target.comb() &&
              spec.target.cascades().empty(),
          ErrorCode::Validation,
          "no form factor with absolutely continuous mu can produce point, "
          "lattice or cascade parts");
  require(spec.geometry != Geometry::Radial || spec.dimension >= 1,
          ErrorCode::Argument, "radial designs need dimension >= 1");
  for (const auto& pc : spec.dispersion) {
    if (spec.geometry == Geometry::Radial)
      require(pc.domain.lo >= 0, ErrorCode::Argument,
              "radial branches live on r >= 0");
    for (double k : interior_probes(pc.domain, 9))
      require(pc.wprime(k) != 0, ErrorCode::ZeroDerivative,
              "dispersion derivative vanishes inside branch '" + pc.name + "'");
  }

  // images, for the even split among branches covering a level
  std::vector<Interval> images;
  images.reserve(spec.dispersion.size());
  for (const auto& pc : spec.dispersion) images.push_back(branch_image(pc));
  auto share_count = [images](double lambda) {
    int n = 0;
    for (const auto& im : images) n += im.contains(lambda) ? 1 : 0;
    return std::max(n, 1);
  };

  DesignedFormFactor out;
  const CouplingMeasure target = spec.target;
  const std::vector<DispersionPiece> branches = spec.dispersion;
  const double dm1 =
      spec.geometry == Geometry::Radial ? spec.dimension - 1.0 : 0.0;
  out.f = [branches, target, share_count, dm1](double k) {
    const DispersionPiece* pc = nullptr;
    for (const auto& b : branches)
      if (b.domain.contains(k)) {
        pc = &b;
        break;
      }
    require(pc != nullptr, ErrorCode::EvaluationDomain,
            "no dispersion branch covers k");
    const double dw = pc->wprime(k);
    require(dw != 0 || !pc->domain.contains_open(k), ErrorCode::ZeroDerivative,
            "dispersion derivative vanishes at an interior point");
    const double lam = pc->w(k);
    const double J = dm1 == 0 ? 1.0 : std::pow(k, dm1);
    if (J == 0) return 0.0;
    return target.density(lam) * std::abs(dw) / (J * share_count(lam));
  };
  auto f = out.f;
  out.g = [f](double k) { return std::sqrt(std::max(f(k), 0.0)); };

  if (auto closed = closed_profile(spec)) {
    // accept only if |profile|^2 reproduces f at every probe of every branch
    bool ok = true;
    for (const auto& pc : spec.dispersion) {
      for (double k : interior_probes(pc.domain, 9)) {
        const double want = out.f(k), got = (*closed)(k) * (*closed)(k);
        if (!(std::abs(got - want) <=
              1e-12 * std::max({1.0, std::abs(want), std::abs(got)}))) {
          ok = false;
          break;
        }
      }
      if (!ok) break;
    }
    if (ok) {
      out.profile = *closed;
      out.exact = true;
      return out;
    }
  }

  // dense fallback tabulation over the finite parts of the domains; the
  // designed factor is only meaningful where the target has mass
  std::vector<double> grid, vals;
  for (const auto& pc : spec.dispersion) {
    const double lo = std::isfinite(pc.domain.lo) ? pc.domain.lo : -1e4;
    const double hi = std::isfinite(pc.domain.hi) ? pc.domain.hi : 1e4;
    const int n = 4000;
    for (int i = 0; i <= n; ++i) {
      const double k = lo + (hi - lo) * i / n;
      grid.push_back(k);
      vals.push_back(out.g(k));
    }
  }
  std::vector<std::size_t> order(grid.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return grid[a] < grid[b]; });
  std::vector<double> sg, sv;
  for (std::size_t i : order) {
    if (!sg.empty() && grid[i] == sg.back()) continue;
    sg.push_back(grid[i]);
    sv.push_back(vals[i]);
  }
  out.profile = ScalarFn::tabulated(std::move(sg), std::move(sv));
  out.exact = false;
  return out;
}

double verify_design(const DesignSpec& spec, const DesignedFormFactor& designed,
                     double tol) {
  DispersionModel m;
  m.geometry = spec.geometry == Geometry::Radial ? Geometry::Radial : Geometry::Slab;
  m.dimension = spec.dimension;
  m.pieces = spec.dispersion;
  m.mu_density = ScalarFn::constant(1.0);
  m.form_factor = designed.profile;
  const CouplingMeasure built = pushforward(m, tol);

  // attainable region: target support meeting some branch image
  std::vector<Interval> region;
  for (const auto& tp : spec.target.pieces()) {
    for (const auto& pc : spec.dispersion) {
      const auto im = branch_image(pc);
      const double lo = std::max(tp.support.lo, im.lo);
      const double hi = std::min(tp.support.hi, im.hi);
      if (lo < hi) region.push_back({std::max(lo, -1e4), std::min(hi, 1e4)});
    }
  }
  require(!region.empty(), ErrorCode::Validation,
          "no branch image meets the target support");

  std::mt19937 rng(0x5eed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  double worst = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const auto& R = region[trial % region.size()];
    const double a = R.lo + U(rng) * (R.hi - R.lo);
    const double b = a + U(rng) * (R.hi - a);
    if (!(b > a)) continue;
    const double want = spec.target.mass(a, b);
    const double got = built.mass(a, b);
    const double dev = std::abs(got - want) / std::max(std::abs(want), 1e-12);
    worst = std::max(worst, dev);
  }
  return worst;
}

}  // namespace fl
