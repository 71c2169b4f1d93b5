#include "flspec/modelspec.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace fl {
namespace {

using nlohmann::ordered_json;

void require(bool ok, ErrorCode code, const std::string& msg) {
  if (!ok) throw Error(code, msg);
}

// All emitted floats pass through here: %.12g and back, so a value prints the
// same bytes no matter which code path produced it.
double round12(double v) {
  if (!std::isfinite(v)) return v;
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return std::strtod(buf, nullptr);
}

std::string fmt12(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

ordered_json jnum(double v) {
  return std::isfinite(v) ? ordered_json(round12(v)) : ordered_json(nullptr);
}

[[noreturn]] void bad(const std::string& where, const std::string& what) {
  throw Error(ErrorCode::Validation, where + ": " + what);
}

void check_keys(const ordered_json& o, std::initializer_list<const char*> allowed,
                const std::string& where) {
  for (auto it = o.begin(); it != o.end(); ++it) {
    if (std::find_if(allowed.begin(), allowed.end(), [&](const char* k) {
          return it.key() == k;
        }) == allowed.end())
      bad(where, "unknown key \"" + it.key() + "\"");
  }
}

const ordered_json& field(const ordered_json& o, const char* key,
                          const std::string& where) {
  auto it = o.find(key);
  if (it == o.end()) bad(where, std::string("missing key \"") + key + "\"");
  return *it;
}

double jdouble(const ordered_json& v, const std::string& where) {
  if (!v.is_number()) bad(where, "expected a number");
  return v.get<double>();
}

double jdouble(const ordered_json& o, const char* key, const std::string& where) {
  return jdouble(field(o, key, where), where + "." + key);
}

int jint(const ordered_json& o, const char* key, const std::string& where) {
  const auto& v = field(o, key, where);
  if (!v.is_number_integer()) bad(where + "." + key, "expected an integer");
  return v.get<int>();
}

std::string jstr(const ordered_json& o, const char* key, const std::string& where) {
  const auto& v = field(o, key, where);
  if (!v.is_string()) bad(where + "." + key, "expected a string");
  return v.get<std::string>();
}

std::vector<double> jvec(const ordered_json& v, const std::string& where) {
  if (!v.is_array()) bad(where, "expected an array of numbers");
  std::vector<double> out;
  out.reserve(v.size());
  for (const auto& e : v) out.push_back(jdouble(e, where));
  return out;
}

// interval endpoints: a number, null (unbounded), or "inf"/"+inf"/"-inf"
double endpoint(const ordered_json& v, bool is_hi, const std::string& where) {
  if (v.is_null()) return is_hi ? kInf : -kInf;
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "inf" || s == "+inf") return kInf;
    if (s == "-inf") return -kInf;
  }
  bad(where, "endpoint must be a number, null, or \"inf\"/\"-inf\"");
}

Interval jinterval(const ordered_json& v, const std::string& where) {
  if (!v.is_array() || v.size() != 2) bad(where, "expected [lo, hi]");
  Interval iv{endpoint(v[0], false, where), endpoint(v[1], true, where)};
  if (!(iv.lo < iv.hi)) bad(where, "endpoints must satisfy lo < hi");
  return iv;
}

ordered_json interval_json(Interval iv) {
  return ordered_json::array({jnum(iv.lo), jnum(iv.hi)});
}

ScalarFn parse_scalar_fn(const ordered_json& o, const std::string& where) {
  if (!o.is_object()) bad(where, "expected a scalar-evaluator object");
  const auto kind = jstr(o, "kind", where);
  if (kind == "const") {
    check_keys(o, {"kind", "value"}, where);
    return ScalarFn::constant(jdouble(o, "value", where));
  }
  if (kind == "affine") {
    check_keys(o, {"kind", "intercept", "slope"}, where);
    return ScalarFn::affine(jdouble(o, "intercept", where),
                            jdouble(o, "slope", where));
  }
  if (kind == "power") {
    check_keys(o, {"kind", "coef", "exponent"}, where);
    return ScalarFn::power(jdouble(o, "coef", where), jdouble(o, "exponent", where));
  }
  if (kind == "tabulated") {
    check_keys(o, {"kind", "grid", "values"}, where);
    return ScalarFn::tabulated(jvec(field(o, "grid", where), where + ".grid"),
                               jvec(field(o, "values", where), where + ".values"));
  }
  bad(where + ".kind", "unknown kind \"" + kind + "\"");
}

ordered_json scalar_fn_json(const ScalarFn& f) {
  ordered_json o;
  switch (f.kind) {
    case ScalarFn::Kind::Const:
      o["kind"] = "const";
      o["value"] = jnum(f.c0);
      break;
    case ScalarFn::Kind::Affine:
      o["kind"] = "affine";
      o["intercept"] = jnum(f.c0);
      o["slope"] = jnum(f.c1);
      break;
    case ScalarFn::Kind::Power:
      o["kind"] = "power";
      o["coef"] = jnum(f.c0);
      o["exponent"] = jnum(f.c1);
      break;
    case ScalarFn::Kind::Tabulated: {
      o["kind"] = "tabulated";
      auto g = ordered_json::array(), v = ordered_json::array();
      for (double x : f.grid) g.push_back(jnum(x));
      for (double y : f.values) v.push_back(jnum(y));
      o["grid"] = std::move(g);
      o["values"] = std::move(v);
      break;
    }
  }
  return o;
}

CouplingMeasure parse_measure(const ordered_json& o, const std::string& where) {
  if (!o.is_object()) bad(where, "expected an object");
  check_keys(o, {"ac", "atoms", "comb", "cascade"}, where);

  std::vector<DensityPiece> pieces;
  if (auto it = o.find("ac"); it != o.end()) {
    if (!it->is_array()) bad(where + ".ac", "expected an array");
    int i = 0;
    for (const auto& p : *it) {
      const std::string pw = where + ".ac[" + std::to_string(i++) + "]";
      const auto family = jstr(p, "family", pw);
      if (family == "flat") {
        check_keys(p, {"family", "level", "support"}, pw);
        const auto iv = jinterval(field(p, "support", pw), pw + ".support");
        pieces.push_back(DensityPiece::flat(jdouble(p, "level", pw), iv.lo, iv.hi));
      } else if (family == "sinusoidal") {
        check_keys(p, {"family", "beta", "tau", "support"}, pw);
        Interval iv{-kInf, kInf};
        if (p.contains("support")) iv = jinterval(p["support"], pw + ".support");
        pieces.push_back(DensityPiece::sinusoidal(jdouble(p, "beta", pw),
                                                  jdouble(p, "tau", pw), iv.lo, iv.hi));
      } else if (family == "tabulated") {
        check_keys(p, {"family", "grid", "values"}, pw);
        pieces.push_back(DensityPiece::tabulated(
            jvec(field(p, "grid", pw), pw + ".grid"),
            jvec(field(p, "values", pw), pw + ".values")));
      } else {
        bad(pw + ".family", "unknown family \"" + family + "\"");
      }
    }
  }

  std::vector<Atom> atoms;
  if (auto it = o.find("atoms"); it != o.end()) {
    if (!it->is_array()) bad(where + ".atoms", "expected an array");
    int i = 0;
    for (const auto& a : *it) {
      const std::string aw = where + ".atoms[" + std::to_string(i++) + "]";
      check_keys(a, {"location", "weight"}, aw);
      atoms.push_back({jdouble(a, "location", aw), jdouble(a, "weight", aw)});
    }
  }

  std::optional<PeriodicComb> comb;
  if (auto it = o.find("comb"); it != o.end()) {
    const std::string cw = where + ".comb";
    check_keys(*it, {"beta", "tau", "window"}, cw);
    PeriodicComb c;
    c.beta = jdouble(*it, "beta", cw);
    c.tau = jdouble(*it, "tau", cw);
    if (it->contains("window")) c.window = jint(*it, "window", cw);
    comb = c;
  }

  std::vector<DyadicCascade> cascades;
  if (auto it = o.find("cascade"); it != o.end()) {
    const std::string cw = where + ".cascade";
    check_keys(*it, {"base", "ratio", "depth"}, cw);
    DyadicCascade c;
    c.base = jdouble(*it, "base", cw);
    c.ratio = jdouble(*it, "ratio", cw);
    if (it->contains("depth")) c.depth = jint(*it, "depth", cw);
    cascades.push_back(c);
  }

  return CouplingMeasure(std::move(pieces), std::move(atoms), comb,
                         std::move(cascades));
}

ordered_json measure_json(const CouplingMeasure& m) {
  ordered_json o;
  auto ac = ordered_json::array();
  for (const auto& p : m.pieces()) {
    ordered_json e;
    switch (p.family) {
      case DensityPiece::Family::Flat:
        e["family"] = "flat";
        e["level"] = jnum(p.level);
        e["support"] = interval_json(p.support);
        break;
      case DensityPiece::Family::Sinusoidal:
        e["family"] = "sinusoidal";
        e["beta"] = jnum(p.beta);
        e["tau"] = jnum(p.tau);
        e["support"] = interval_json(p.support);
        break;
      case DensityPiece::Family::Tabulated: {
        e["family"] = "tabulated";
        auto g = ordered_json::array(), v = ordered_json::array();
        for (double x : p.grid) g.push_back(jnum(x));
        for (double y : p.values) v.push_back(jnum(y));
        e["grid"] = std::move(g);
        e["values"] = std::move(v);
        break;
      }
    }
    ac.push_back(std::move(e));
  }
  o["ac"] = std::move(ac);

  auto atoms = ordered_json::array();
  for (const auto& a : m.atoms())
    atoms.push_back({{"location", jnum(a.location)}, {"weight", jnum(a.weight)}});
  o["atoms"] = std::move(atoms);

  if (m.comb()) {
    o["comb"] = {{"beta", jnum(m.comb()->beta)},
                 {"tau", jnum(m.comb()->tau)},
                 {"window", m.comb()->window}};
  }
  for (const auto& c : m.cascades()) {
    o["cascade"] = {{"base", jnum(c.base)},
                    {"ratio", jnum(c.ratio)},
                    {"depth", c.depth}};
    break;  // schema carries a single cascade
  }
  return o;
}

DispersionModel parse_model(const ordered_json& o, const std::string& where) {
  if (!o.is_object()) bad(where, "expected an object");
  check_keys(o, {"geometry", "dimension", "dispersion", "mu", "form_factor"}, where);

  DispersionModel m;
  const auto geom = jstr(o, "geometry", where);
  if (geom == "line")
    m.geometry = Geometry::Line;
  else if (geom == "slab")
    m.geometry = Geometry::Slab;
  else if (geom == "radial")
    m.geometry = Geometry::Radial;
  else
    bad(where + ".geometry", "expected \"line\", \"slab\" or \"radial\"");

  m.dimension = o.contains("dimension") ? jint(o, "dimension", where) : 1;
  if (m.dimension < 1) bad(where + ".dimension", "must be >= 1");

  const auto& disp = field(o, "dispersion", where);
  if (!disp.is_array() || disp.empty())
    bad(where + ".dispersion", "expected a non-empty array of branches");
  int i = 0;
  for (const auto& b : disp) {
    const std::string bw = where + ".dispersion[" + std::to_string(i++) + "]";
    check_keys(b, {"name", "domain", "w", "wprime"}, bw);
    DispersionPiece piece;
    piece.name = b.contains("name") ? jstr(b, "name", bw) : "piece" + std::to_string(i);
    piece.domain = jinterval(field(b, "domain", bw), bw + ".domain");
    piece.w = parse_scalar_fn(field(b, "w", bw), bw + ".w");
    if (b.contains("wprime")) {
      piece.wprime = parse_scalar_fn(b["wprime"], bw + ".wprime");
    } else if (piece.w.kind == ScalarFn::Kind::Tabulated) {
      bad(bw, "a tabulated dispersion needs an explicit wprime");
    } else {
      piece.wprime = piece.w.derivative();
    }
    m.pieces.push_back(std::move(piece));
  }

  if (auto it = o.find("mu"); it != o.end()) {
    const std::string mw = where + ".mu";
    check_keys(*it, {"density", "atoms"}, mw);
    if (it->contains("density"))
      m.mu_density = parse_scalar_fn((*it)["density"], mw + ".density");
    if (auto at = it->find("atoms"); at != it->end()) {
      if (!at->is_array()) bad(mw + ".atoms", "expected an array");
      int j = 0;
      for (const auto& a : *at) {
        const std::string aw = mw + ".atoms[" + std::to_string(j++) + "]";
        check_keys(a, {"location", "weight"}, aw);
        m.mu_atoms.push_back({jdouble(a, "location", aw), jdouble(a, "weight", aw)});
      }
    }
  }

  if (o.contains("form_factor"))
    m.form_factor = parse_scalar_fn(o["form_factor"], where + ".form_factor");
  return m;
}

ordered_json model_json(const DispersionModel& m) {
  ordered_json o;
  o["geometry"] = m.geometry == Geometry::Line   ? "line"
                  : m.geometry == Geometry::Slab ? "slab"
                                                 : "radial";
  o["dimension"] = m.dimension;
  auto disp = ordered_json::array();
  for (const auto& p : m.pieces) {
    ordered_json b;
    b["name"] = p.name;
    b["domain"] = interval_json(p.domain);
    b["w"] = scalar_fn_json(p.w);
    b["wprime"] = scalar_fn_json(p.wprime);
    disp.push_back(std::move(b));
  }
  o["dispersion"] = std::move(disp);
  ordered_json mu;
  mu["density"] = scalar_fn_json(m.mu_density);
  auto atoms = ordered_json::array();
  for (const auto& a : m.mu_atoms)
    atoms.push_back({{"location", jnum(a.location)}, {"weight", jnum(a.weight)}});
  mu["atoms"] = std::move(atoms);
  o["mu"] = std::move(mu);
  o["form_factor"] = scalar_fn_json(m.form_factor);
  return o;
}

std::string dump(const ordered_json& o) { return o.dump(2) + "\n"; }

// monotone branch image endpoint; infinite domain ends probed at two depths
// to tell growth (affine, positive powers) from a finite limit
double image_end(const DispersionPiece& p, double k) {
  if (std::isfinite(k)) return p.w(k);
  const double s = k > 0 ? 1.0 : -1.0;
  const double v1 = p.w(s * 1e8), v2 = p.w(s * 2e8);
  if (std::abs(v2) > std::abs(v1) &&
      std::abs(v2 - v1) > 1e-9 * std::max(1.0, std::abs(v1)))
    return v2 > 0 ? kInf : -kInf;
  return v2;
}

}  // namespace

CouplingMeasure ModelDocument::kappa(double pushforward_tol) const {
  if (measure) return *measure;
  require(model.has_value(), ErrorCode::Validation,
          "document carries neither a measure nor a model");
  return pushforward(*model, pushforward_tol);
}

ModelDocument parse_model_document(const std::string& text) {
  ordered_json root;
  try {
    root = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::Parse, e.what());
  }
  if (!root.is_object()) bad("document", "top level must be an object");
  check_keys(root, {"schema", "measure", "model"}, "document");
  if (jint(root, "schema", "document") != 1)
    bad("document.schema", "this build reads schema 1");

  ModelDocument doc;
  if (auto it = root.find("measure"); it != root.end())
    doc.measure = parse_measure(*it, "measure");
  if (auto it = root.find("model"); it != root.end())
    doc.model = parse_model(*it, "model");
  if (!doc.measure && !doc.model)
    bad("document", "needs a \"measure\" or a \"model\" section");
  return doc;
}

ModelDocument load_model_document(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(bool(in), ErrorCode::Argument, "cannot open model document: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_model_document(buf.str());
}

std::string model_document_json(const ModelDocument& doc) {
  ordered_json root;
  root["schema"] = 1;
  if (doc.measure) root["measure"] = measure_json(*doc.measure);
  if (doc.model) root["model"] = model_json(*doc.model);
  return dump(root);
}

std::string uncoupled_summary(const DispersionModel& model) {
  struct Run {
    double lo, hi;
  };
  std::vector<Run> runs;
  for (const auto& p : model.pieces) {
    const double a = image_end(p, p.domain.lo);
    const double b = image_end(p, p.domain.hi);
    runs.push_back({std::min(a, b), std::max(a, b)});
  }
  std::sort(runs.begin(), runs.end(),
            [](const Run& x, const Run& y) { return x.lo < y.lo; });
  std::vector<Run> merged;
  for (const auto& r : runs) {
    if (!merged.empty() && r.lo <= merged.back().hi)
      merged.back().hi = std::max(merged.back().hi, r.hi);
    else
      merged.push_back(r);
  }
  std::string ranges;
  for (const auto& r : merged) {
    if (!ranges.empty()) ranges += " U ";
    ranges += "[" + fmt12(r.lo) + ", " + fmt12(r.hi) + "]";
  }
  return "multiplication by omega on the orthogonal complement of the cyclic "
         "subspace; essential range " +
         ranges;
}

std::string spectral_report_json(const SpectralReport& report, Interval window,
                                 int grid_n) {
  ordered_json o;
  o["schema"] = 1;
  o["epsilon"] = jnum(report.epsilon);
  o["window"] = interval_json(window);
  o["grid_n"] = grid_n;
  auto ac = ordered_json::array();
  for (const auto& iv : report.ac_intervals) ac.push_back(interval_json(iv));
  o["ac"] = std::move(ac);
  auto pp = ordered_json::array();
  for (const auto& p : report.pp_points) {
    ordered_json e;
    e["lambda"] = jnum(p.lambda);
    e["weight"] = p.weight ? jnum(*p.weight) : ordered_json(nullptr);
    e["g_value"] = jnum(p.g_value);
    e["residual"] = jnum(p.residual);
    pp.push_back(std::move(e));
  }
  o["pp"] = std::move(pp);
  auto sc = ordered_json::array();
  for (const auto& f : report.sc_flags) {
    ordered_json e;
    e["lambda"] = jnum(f.lambda);
    e["partial_sum"] = jnum(f.partial_sum);
    e["stop_level"] = f.stop_level;
    e["evidence"] = f.evidence;
    sc.push_back(std::move(e));
  }
  o["sc"] = std::move(sc);
  o["uncoupled"] = report.uncoupled_part;
  return dump(o);
}

std::string survival_trace_csv(const SurvivalTrace& trace) {
  std::string out = "t,re_x,im_x,abs2,error\n";
  for (std::size_t i = 0; i < trace.times.size(); ++i) {
    const Complex x = trace.amplitudes[i];
    out += fmt12(trace.times[i]) + "," + fmt12(x.real()) + "," + fmt12(x.imag()) +
           "," + fmt12(std::norm(x)) + "," + fmt12(trace.quadrature_error[i]) + "\n";
  }
  return out;
}

std::string survival_trace_json(const SurvivalTrace& trace) {
  ordered_json o;
  o["schema"] = 1;
  o["sc_flagged"] = trace.sc_flagged;
  o["note"] = trace.note;
  auto rows = ordered_json::array();
  for (std::size_t i = 0; i < trace.times.size(); ++i) {
    const Complex x = trace.amplitudes[i];
    ordered_json e;
    e["t"] = jnum(trace.times[i]);
    e["x"] = ordered_json::array({jnum(x.real()), jnum(x.imag())});
    e["abs2"] = jnum(std::norm(x));
    e["error"] = jnum(trace.quadrature_error[i]);
    rows.push_back(std::move(e));
  }
  o["rows"] = std::move(rows);
  return dump(o);
}

std::string resonances_json(const std::vector<Resonance>& list, SearchRect rect,
                            double epsilon) {
  ordered_json o;
  o["schema"] = 1;
  o["epsilon"] = jnum(epsilon);
  o["rect"] = ordered_json::array(
      {jnum(rect.re_lo), jnum(rect.re_hi), jnum(rect.im_lo), jnum(rect.im_hi)});
  auto rs = ordered_json::array();
  for (const auto& r : list) {
    ordered_json e;
    e["z0"] = ordered_json::array({jnum(r.z0.real()), jnum(r.z0.imag())});
    e["residual"] = jnum(r.residual);
    e["seed"] = ordered_json::array({jnum(r.seed.real()), jnum(r.seed.imag())});
    rs.push_back(std::move(e));
  }
  o["resonances"] = std::move(rs);
  return dump(o);
}

std::string sigma_grid_csv(const std::vector<SigmaRow>& rows) {
  std::string out = "lambda,re_sigma,im_sigma,flags\n";
  for (const auto& r : rows)
    out += fmt12(r.lambda) + "," + fmt12(r.sigma_plus.real()) + "," +
           fmt12(r.sigma_plus.imag()) + "," + r.flags + "\n";
  return out;
}

std::string form_factor_json(const DesignSpec& spec, const DesignedFormFactor& got,
                             double deviation) {
  ordered_json o;
  o["schema"] = 1;
  o["exact"] = got.exact;
  o["form_factor"] = scalar_fn_json(got.profile);

  // dense export usable as a tabulated evaluator; nodes sit at half-steps so
  // blow-ups at domain edges (radial 1/r profiles) never enter the table
  std::vector<double> grid, values;
  for (const auto& b : spec.dispersion) {
    const double lo = std::max(b.domain.lo, -100.0);
    const double hi = std::min(b.domain.hi, 100.0);
    if (!(lo < hi)) continue;
    const int n = 512;
    const double h = (hi - lo) / n;
    for (int i = 0; i < n; ++i) {
      const double k = lo + (i + 0.5) * h;
      const double v = got.g(k);
      if (std::isfinite(v)) {
        grid.push_back(k);
        values.push_back(v);
      }
    }
  }
  ordered_json tab;
  tab["kind"] = "tabulated";
  auto g = ordered_json::array(), v = ordered_json::array();
  for (double x : grid) g.push_back(jnum(x));
  for (double y : values) v.push_back(jnum(y));
  tab["grid"] = std::move(g);
  tab["values"] = std::move(v);
  o["tabulated"] = std::move(tab);
  o["verify_deviation"] = jnum(deviation);
  return dump(o);
}

}  // namespace fl
