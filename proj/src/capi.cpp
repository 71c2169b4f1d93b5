#include "flspec.h"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <memory>
#include <string>

#include "flspec/dynamics.hpp"
#include "flspec/inverse.hpp"
#include "flspec/modelspec.hpp"
#include "flspec/resonance.hpp"
#include "flspec/selfenergy.hpp"
#include "flspec/spectral.hpp"
#include "flspec/verify.hpp"

struct fl_model {
  fl::ModelDocument doc;
};

namespace {

thread_local std::string t_last_error;

fl_status map_code(fl::ErrorCode c) {
  switch (c) {
    case fl::ErrorCode::Argument:
      return FL_ERR_ARGUMENT;
    case fl::ErrorCode::Parse:
      return FL_ERR_PARSE;
    case fl::ErrorCode::Validation:
    case fl::ErrorCode::DivergentM2:
    case fl::ErrorCode::NonMonotonePiece:
    case fl::ErrorCode::AtomCollision:
      return FL_ERR_VALIDATION;
    default:
      return FL_ERR_NUMERIC;
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

// runs fn, converting every throw into a status + thread-local message
template <typename Fn>
fl_status guarded(Fn&& fn) {
  try {
    fn();
    t_last_error.clear();
    return FL_OK;
  } catch (const fl::Error& e) {
    t_last_error = std::string(fl::error_code_name(e.code)) + ": " + e.what();
    return map_code(e.code);
  } catch (const std::exception& e) {
    t_last_error = e.what();
    return FL_ERR_INTERNAL;
  } catch (...) {
    t_last_error = "unknown failure";
    return FL_ERR_INTERNAL;
  }
}

void require_arg(bool ok, const char* what) {
  if (!ok) throw fl::Error(fl::ErrorCode::Argument, what);
}

}  // namespace

extern "C" {

int fl_abi_version(void) { return 1; }

const char* fl_last_error(void) { return t_last_error.c_str(); }

void fl_string_release(char* s) { std::free(s); }

fl_status fl_model_from_json(const char* text, fl_model** out) {
  return guarded([&] {
    require_arg(text && out, "text and out must be non-null");
    auto m = std::make_unique<fl_model>();
    m->doc = fl::parse_model_document(text);
    *out = m.release();
  });
}

fl_status fl_model_from_file(const char* path, fl_model** out) {
  return guarded([&] {
    require_arg(path && out, "path and out must be non-null");
    auto m = std::make_unique<fl_model>();
    m->doc = fl::load_model_document(path);
    *out = m.release();
  });
}

void fl_model_release(fl_model* m) { delete m; }

fl_status fl_classify(const fl_model* m, double epsilon, double window_lo,
                      double window_hi, int grid_n, char** json_out) {
  return guarded([&] {
    require_arg(m && json_out, "model and json_out must be non-null");
    require_arg(std::isfinite(window_lo) && std::isfinite(window_hi) &&
                    window_lo < window_hi,
                "classification window must be finite with lo < hi");
    const int n = grid_n > 0 ? grid_n : 2048;
    const fl::Interval window{window_lo, window_hi};
    auto report = fl::classify(m->doc.kappa(), epsilon, window, n);
    if (m->doc.model) report.uncoupled_part = fl::uncoupled_summary(*m->doc.model);
    *json_out = dup_string(fl::spectral_report_json(report, window, n));
  });
}

fl_status fl_self_energy_grid(const fl_model* m, double window_lo,
                              double window_hi, int grid_n, double tol,
                              char** csv_out) {
  return guarded([&] {
    require_arg(m && csv_out, "model and csv_out must be non-null");
    require_arg(std::isfinite(window_lo) && std::isfinite(window_hi) &&
                    window_lo < window_hi,
                "grid window must be finite with lo < hi");
    require_arg(grid_n >= 2, "grid needs at least 2 points");
    require_arg(tol > 0, "tolerance must be positive");
    const auto kappa = m->doc.kappa(tol);
    const double step = (window_hi - window_lo) / (grid_n - 1);
    std::vector<fl::SigmaRow> rows;
    rows.reserve(grid_n);
    for (int i = 0; i < grid_n; ++i) {
      const double lam = window_lo + i * step;
      const auto bv = fl::sigma_boundary(kappa, lam, tol);
      fl::SigmaRow r;
      r.lambda = lam;
      r.sigma_plus = fl::Complex(bv.sigma_plus.re, bv.sigma_plus.im);
      std::string flags;
      auto add = [&flags](const char* f) {
        if (!flags.empty()) flags += ';';
        flags += f;
      };
      if (kappa.density(lam) > 0) add("ac");
      if (bv.sigma_plus.im_divergent) add("atom");
      if (bv.sigma_plus.re_log_singular) add("edge");
      r.flags = std::move(flags);
      rows.push_back(std::move(r));
    }
    *csv_out = dup_string(fl::sigma_grid_csv(rows));
  });
}

fl_status fl_evolve(const fl_model* m, double epsilon, double t_max, int t_steps,
                    double tol, char** csv_out, char** json_out) {
  return guarded([&] {
    require_arg(m && (csv_out || json_out), "model and an output must be non-null");
    require_arg(std::isfinite(t_max) && t_max > 0, "t_max must be positive");
    require_arg(t_steps >= 1, "t_steps must be >= 1");
    require_arg(tol > 0, "tolerance must be positive");
    std::vector<double> times;
    times.reserve(t_steps + 1);
    for (int i = 0; i <= t_steps; ++i) times.push_back(t_max * i / t_steps);
    const auto trace =
        fl::survival_amplitude(m->doc.kappa(std::min(tol, 1e-9)), epsilon, times, tol);
    if (csv_out) *csv_out = dup_string(fl::survival_trace_csv(trace));
    if (json_out) *json_out = dup_string(fl::survival_trace_json(trace));
  });
}

fl_status fl_resonances(const fl_model* m, double epsilon, double re_lo,
                        double re_hi, double im_lo, double im_hi, double tol,
                        char** json_out) {
  return guarded([&] {
    require_arg(m && json_out, "model and json_out must be non-null");
    require_arg(tol > 0, "tolerance must be positive");
    const fl::SearchRect rect{re_lo, re_hi, im_lo, im_hi};
    const auto list = fl::find_resonances(m->doc.kappa(tol), epsilon, rect, 12, tol);
    *json_out = dup_string(fl::resonances_json(list, rect, epsilon));
  });
}

fl_status fl_design(const fl_model* m, double tol, char** json_out) {
  return guarded([&] {
    require_arg(m && json_out, "model and json_out must be non-null");
    require_arg(tol > 0, "tolerance must be positive");
    if (!m->doc.model)
      throw fl::Error(fl::ErrorCode::Validation,
                      "design needs a model section for geometry and dispersion");
    const auto& model = *m->doc.model;
    if (model.mu_density.kind != fl::ScalarFn::Kind::Const ||
        model.mu_density.c0 != 1.0 || !model.mu_atoms.empty())
      throw fl::Error(fl::ErrorCode::Validation,
                      "design assumes a unit a.c. mu (no atoms, density 1)");
    fl::DesignSpec spec;
    spec.geometry =
        model.geometry == fl::Geometry::Radial ? fl::Geometry::Radial : fl::Geometry::Slab;
    spec.dimension = model.dimension;
    spec.dispersion = model.pieces;
    spec.target =
        m->doc.measure ? *m->doc.measure : fl::CouplingMeasure::flat_line(1.0);
    const auto designed = fl::design_form_factor(spec);
    const double dev = fl::verify_design(spec, designed, tol);
    *json_out = dup_string(fl::form_factor_json(spec, designed, dev));
  });
}

fl_status fl_verify_examples(char** table_out, int* failures) {
  return guarded([&] {
    require_arg(table_out || failures, "an output must be non-null");
    const auto rows = fl::run_example_oracles();
    int bad = 0;
    for (const auto& r : rows) bad += !r.pass;
    if (table_out) *table_out = dup_string(fl::oracle_table(rows));
    if (failures) *failures = bad;
  });
}

}  // extern "C"
