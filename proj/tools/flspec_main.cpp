// flspec: spectral analysis of singularly coupled atom-field models from the
// command line. Talks to the library exclusively through the C interface.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "flspec.h"

namespace {

const char* status_name(fl_status s) {
  switch (s) {
    case FL_OK:
      return "ok";
    case FL_ERR_ARGUMENT:
      return "argument";
    case FL_ERR_PARSE:
      return "parse";
    case FL_ERR_VALIDATION:
      return "validation";
    case FL_ERR_NUMERIC:
      return "numeric";
    default:
      return "internal";
  }
}

int exit_code(fl_status s) {
  if (s == FL_OK) return 0;
  if (s == FL_ERR_NUMERIC || s == FL_ERR_INTERNAL) return 2;
  return 1;
}

// diagnostic JSON on stderr, exit code per contract (1 validation, 2 numeric)
int fail(fl_status s) {
  std::string detail = fl_last_error();
  std::string esc;
  for (char c : detail) {
    if (c == '"' || c == '\\') esc += '\\';
    if (c == '\n') {
      esc += "\\n";
      continue;
    }
    esc += c;
  }
  std::fprintf(stderr, "{\"error\": \"%s\", \"detail\": \"%s\"}\n", status_name(s),
               esc.c_str());
  return exit_code(s);
}

int write_artifact(const std::filesystem::path& dir, const std::string& name,
                   const char* text) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  const auto path = dir / name;
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text)) {
    std::fprintf(stderr, "{\"error\": \"io\", \"detail\": \"cannot write %s\"}\n",
                 path.string().c_str());
    return 1;
  }
  std::printf("wrote %s\n", path.string().c_str());
  return 0;
}

struct Options {
  std::string model_path;
  std::string out_dir = ".";
  double epsilon = 0.0;
  std::vector<double> window = {-50.0, 50.0};
  std::vector<double> im_window = {-5.0, 0.0};
  double tol_quad = 1e-9;
  double tol_root = 1e-10;
  int grid_n = 2048;
  double t_max = 10.0;
  int t_steps = 200;
};

fl_model* load_model_or_die(const Options& opt, int& rc) {
  fl_model* m = nullptr;
  const fl_status s = fl_model_from_file(opt.model_path.c_str(), &m);
  rc = s == FL_OK ? 0 : fail(s);
  return m;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spectral analysis of singularly coupled atom-field models"};
  app.require_subcommand(1);

  Options opt;
  auto add_common = [&](CLI::App* sub, bool needs_model) {
    if (needs_model)
      sub->add_option("--model", opt.model_path, "model-spec document (JSON)")
          ->required();
    sub->add_option("--out", opt.out_dir, "artifact directory")
        ->capture_default_str();
    sub->add_option("--tol-quad", opt.tol_quad, "quadrature tolerance")
        ->capture_default_str();
    sub->add_option("--tol-root", opt.tol_root, "root residual tolerance")
        ->capture_default_str();
  };

  auto* classify = app.add_subcommand(
      "classify", "spectral decomposition: ac intervals, point masses, sc evidence");
  add_common(classify, true);
  classify->add_option("--epsilon", opt.epsilon, "bare excitation level")
      ->capture_default_str();
  classify->add_option("--window", opt.window, "energy window a,b")
      ->expected(2)
      ->delimiter(',');
  classify->add_option("--grid", opt.grid_n, "root-search grid points")
      ->capture_default_str();

  auto* senergy = app.add_subcommand(
      "self-energy", "boundary transform on an energy grid, written as CSV");
  add_common(senergy, true);
  senergy->add_option("--window", opt.window, "energy window a,b")
      ->expected(2)
      ->delimiter(',');
  senergy->add_option("--grid", opt.grid_n, "grid points")->capture_default_str();

  auto* evolve = app.add_subcommand(
      "evolve", "survival amplitude of the excited state on a time grid");
  add_common(evolve, true);
  evolve->add_option("--epsilon", opt.epsilon, "bare excitation level")
      ->capture_default_str();
  evolve->add_option("--t-max", opt.t_max, "final time")->capture_default_str();
  evolve->add_option("--t-steps", opt.t_steps, "number of steps")
      ->capture_default_str();

  auto* resonances = app.add_subcommand(
      "resonances", "second-sheet pole search over a lower half-plane rectangle");
  add_common(resonances, true);
  resonances->add_option("--epsilon", opt.epsilon, "bare excitation level")
      ->capture_default_str();
  resonances->add_option("--window", opt.window, "real part range a,b")
      ->expected(2)
      ->delimiter(',');
  resonances->add_option("--im-window", opt.im_window, "imaginary part range a,b")
      ->expected(2)
      ->delimiter(',');

  auto* design = app.add_subcommand(
      "design", "form factor realizing a target measure over a dispersion");
  add_common(design, true);

  auto* verify = app.add_subcommand(
      "verify-examples", "run the built-in oracle suite and print the table");
  (void)verify;

  CLI11_PARSE(app, argc, argv);

  if (app.got_subcommand(verify)) {
    char* table = nullptr;
    int failures = 0;
    const fl_status s = fl_verify_examples(&table, &failures);
    if (s != FL_OK) return fail(s);
    std::fputs(table, stdout);
    fl_string_release(table);
    return failures == 0 ? 0 : 2;
  }

  int rc = 0;
  fl_model* model = load_model_or_die(opt, rc);
  if (!model) return rc;

  char* text = nullptr;
  char* extra = nullptr;
  fl_status s = FL_OK;
  std::string artifact;

  if (app.got_subcommand(classify)) {
    s = fl_classify(model, opt.epsilon, opt.window[0], opt.window[1], opt.grid_n,
                    &text);
    artifact = "report.json";
  } else if (app.got_subcommand(senergy)) {
    s = fl_self_energy_grid(model, opt.window[0], opt.window[1], opt.grid_n,
                            opt.tol_quad, &text);
    artifact = "sigma.csv";
  } else if (app.got_subcommand(evolve)) {
    s = fl_evolve(model, opt.epsilon, opt.t_max, opt.t_steps, opt.tol_quad, &text,
                  &extra);
    artifact = "survival.csv";
  } else if (app.got_subcommand(resonances)) {
    s = fl_resonances(model, opt.epsilon, opt.window[0], opt.window[1],
                      opt.im_window[0], opt.im_window[1], opt.tol_root, &text);
    artifact = "resonances.json";
  } else if (app.got_subcommand(design)) {
    s = fl_design(model, opt.tol_quad, &text);
    artifact = "formfactor.json";
  }

  rc = s == FL_OK ? 0 : fail(s);
  if (s == FL_OK) {
    rc = write_artifact(opt.out_dir, artifact, text);
    if (rc == 0 && extra) rc = write_artifact(opt.out_dir, "survival.json", extra);
  }
  fl_string_release(text);
  fl_string_release(extra);
  fl_model_release(model);
  return rc;
}
