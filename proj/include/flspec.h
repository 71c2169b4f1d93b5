/* C interface to the coupling-measure spectral library. Every entry point is
 * thread safe; failures return a status code and leave a description in
 * fl_last_error() (thread local). All returned strings are heap allocated and
 * must be handed back to fl_string_release(). */
#ifndef FLSPEC_H
#define FLSPEC_H

#ifdef __cplusplus
extern "C" {
#endif

typedef enum fl_status {
  FL_OK = 0,
  FL_ERR_ARGUMENT = 1,   /* bad parameter from the caller */
  FL_ERR_PARSE = 2,      /* document is not valid JSON */
  FL_ERR_VALIDATION = 3, /* document violates the schema or a model gate */
  FL_ERR_NUMERIC = 4,    /* quadrature, convergence or domain failure */
  FL_ERR_INTERNAL = 5
} fl_status;

/* Interface revision; bumped on any binary-incompatible change. */
int fl_abi_version(void);

/* Description of the most recent failure on this thread ("" when none). The
 * pointer stays valid until the next failing call on the same thread. */
const char* fl_last_error(void);

void fl_string_release(char* s);

/* Parsed model-spec document (schema 1): a coupling measure, a dispersion
 * model, or both. */
typedef struct fl_model fl_model;

fl_status fl_model_from_json(const char* text, fl_model** out);
fl_status fl_model_from_file(const char* path, fl_model** out);
void fl_model_release(fl_model* m);

/* Spectral classification over [window_lo, window_hi]: absolutely continuous
 * intervals, point masses with weights, and singular-continuous evidence.
 * grid_n <= 0 selects the default (2048). Output is a JSON report. */
fl_status fl_classify(const fl_model* m, double epsilon, double window_lo,
                      double window_hi, int grid_n, char** json_out);

/* Boundary values of the self-energy on a uniform grid of grid_n points over
 * the window, as CSV rows "lambda,re_sigma,im_sigma,flags". */
fl_status fl_self_energy_grid(const fl_model* m, double window_lo,
                              double window_hi, int grid_n, double tol,
                              char** csv_out);

/* Survival amplitude on t = 0, t_max/t_steps, ..., t_max. csv_out receives
 * the trace table, json_out the same rows plus approximation flags; either
 * may be NULL when not wanted. */
fl_status fl_evolve(const fl_model* m, double epsilon, double t_max, int t_steps,
                    double tol, char** csv_out, char** json_out);

/* Second-sheet resonance search over the rectangle [re_lo,re_hi] x
 * [im_lo,im_hi], im_hi <= 0. Output is a JSON list. */
fl_status fl_resonances(const fl_model* m, double epsilon, double re_lo,
                        double re_hi, double im_lo, double im_hi, double tol,
                        char** json_out);

/* Inverse design: the document's model section supplies geometry and
 * dispersion; its measure section, when present, is the target (default: the
 * flat measure of unit decay rate). Output holds the designed profile, a
 * dense tabulation and the roundtrip deviation. */
fl_status fl_design(const fl_model* m, double tol, char** json_out);

/* Built-in oracle suite; table_out receives the rendered table and *failures
 * the number of failing rows. */
fl_status fl_verify_examples(char** table_out, int* failures);

#ifdef __cplusplus
}
#endif

#endif /* FLSPEC_H */
