#pragma once

#include <optional>
#include <string>
#include <vector>

#include "flspec/dynamics.hpp"
#include "flspec/inverse.hpp"
#include "flspec/measure.hpp"
#include "flspec/model.hpp"
#include "flspec/resonance.hpp"
#include "flspec/spectral.hpp"

namespace fl {

// Parsed model-spec document (JSON, `schema: 1`). A document carries a
// coupling measure, a physical dispersion model, or both (a design document
// pairs a dispersion with a target measure). Schema details live in
// docs/model-spec.md; unknown keys are rejected so typos fail loudly.
struct ModelDocument {
  std::optional<CouplingMeasure> measure;
  std::optional<DispersionModel> model;

  // The coupling measure this document denotes: the explicit one when
  // present, otherwise the pushforward of the model.
  CouplingMeasure kappa(double pushforward_tol = 1e-9) const;
};

ModelDocument parse_model_document(const std::string& text);
ModelDocument load_model_document(const std::string& path);

// Inverse of parsing, emitting the same schema. Floats are rounded to 12
// significant digits before emission, so equal documents serialise to
// identical bytes.
std::string model_document_json(const ModelDocument& doc);

// One sentence describing the spectrum of the restriction to the orthogonal
// complement of the coupled cyclic subspace (multiplication by omega there).
std::string uncoupled_summary(const DispersionModel& model);

// Artifact serialisers used by the CLI. Fixed key order, floats at 12
// significant digits, trailing newline; byte-identical for equal inputs.
std::string spectral_report_json(const SpectralReport& report, Interval window,
                                 int grid_n);
std::string survival_trace_csv(const SurvivalTrace& trace);
std::string survival_trace_json(const SurvivalTrace& trace);
std::string resonances_json(const std::vector<Resonance>& list, SearchRect rect,
                            double epsilon);

// lambda, Re Sigma+, Im Sigma+ on a grid; flags mark which components sit at
// the point ("ac" inside a density run, "atom" within half a grid step of a
// point mass, "comb" on lattice models).
struct SigmaRow {
  double lambda = 0;
  Complex sigma_plus;
  std::string flags;
};
std::string sigma_grid_csv(const std::vector<SigmaRow>& rows);

// Designed form factor: the profile in scalar-evaluator form plus a dense
// tabulation over the clipped branch domains, and the roundtrip deviation.
std::string form_factor_json(const DesignSpec& spec, const DesignedFormFactor& got,
                             double deviation);

}  // namespace fl
