#ifndef ROF_AFEM_H
#define ROF_AFEM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>

// Regularization strategy of the adaptive loop.
typedef enum RofEpsStrategy {
  ROF_EPS_STRATEGY_GLOBAL = 0,
  ROF_EPS_STRATEGY_LOCAL = 1,
} RofEpsStrategy;

// Result code of every call.
typedef enum RofStatus {
  ROF_STATUS_OK = 0,
  ROF_STATUS_NULL_POINTER = 1,
  ROF_STATUS_INVALID_ARGUMENT = 2,
  ROF_STATUS_UNKNOWN_BENCHMARK = 3,
  ROF_STATUS_NOT_CONVERGED = 4,
  ROF_STATUS_IO = 5,
  ROF_STATUS_PARSE = 6,
  ROF_STATUS_NUMERICAL = 7,
  ROF_STATUS_BUFFER_TOO_SMALL = 8,
  ROF_STATUS_PANIC = 9,
} RofStatus;

// Per-element quantities exported by [`rof_run_element_values`].
typedef enum RofField {
  // Element means of the post-processed solution.
  ROF_FIELD_SOLUTION = 0,
  // Local refinement indicators.
  ROF_FIELD_INDICATOR = 1,
  // Regularization parameter.
  ROF_FIELD_EPSILON = 2,
  // Projected data.
  ROF_FIELD_DATA = 3,
} RofField;

// A problem definition: a named benchmark or an image.
typedef struct RofProblem RofProblem;

// The levels of a finished (or aborted) adaptive run.
typedef struct RofRun RofRun;

// Parameters of an adaptive run. Obtain defaults from [`rof_config_default`].
typedef struct RofConfig {
  double theta;
  enum RofEpsStrategy eps_strategy;
  size_t max_levels;
  // Zero means unlimited.
  size_t max_vertices;
  bool uniform;
  double tau;
  size_t max_flow_steps;
} RofConfig;

// Summary of one level.
typedef struct RofLevelStats {
  size_t n_vertices;
  size_t n_elements;
  double h;
  double eta_sq;
  // NaN when no exact solution is known.
  double rho_tilde_sq;
  double linf_zbar;
  size_t flow_steps;
  double wall_time;
} RofLevelStats;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *rof_version(void);

// Length in bytes of the last error message on this thread, excluding NUL.
size_t rof_last_error_length(void);

// Copies the last error message (NUL-terminated, truncated to fit) into
// `buf` and returns the number of bytes written excluding the NUL.
//
// # Safety
// `buf` must be valid for `len` bytes or null.
size_t rof_last_error_message(char *buf, size_t len);

struct RofConfig rof_config_default(void);

// Creates one of the built-in benchmarks by name, e.g. `"one_disk_2d"`.
//
// # Safety
// `name` must be a NUL-terminated string; `out` must be writable.
enum RofStatus rof_problem_from_benchmark(const char *name, struct RofProblem **out);

// Creates a Neumann denoising problem on the unit square from a row-major
// gray image in `[0, 1]` (top row first).
//
// # Safety
// `pixels` must hold `width * height` values; `out` must be writable.
enum RofStatus rof_problem_from_image(size_t width,
                                      size_t height,
                                      const double *pixels,
                                      double alpha,
                                      size_t initial_subdivisions,
                                      struct RofProblem **out);

// # Safety
// `problem` must come from a `rof_problem_*` constructor or be null.
void rof_problem_free(struct RofProblem *problem);

// Runs the adaptive loop. When a level fails after earlier levels
// succeeded, `*out` still receives the partial run and the failure status
// is returned; otherwise `*out` is set to null on failure.
//
// # Safety
// `problem`, `config` and `out` must be valid pointers.
enum RofStatus rof_run(const struct RofProblem *problem,
                       const struct RofConfig *config,
                       struct RofRun **out);

// # Safety
// `run` must come from [`rof_run`] or be null.
void rof_run_free(struct RofRun *run);

// # Safety
// `run` and `out` must be valid pointers.
enum RofStatus rof_run_level_count(const struct RofRun *run, size_t *out);

// # Safety
// `run` and `out` must be valid pointers.
enum RofStatus rof_run_level_stats(const struct RofRun *run,
                                   size_t index,
                                   struct RofLevelStats *out);

// Copies one value per element into `buf`. Call with `buf = NULL` to
// query the element count through `written`.
//
// # Safety
// `run` and `written` must be valid; `buf` must hold `len` values or be null.
enum RofStatus rof_run_element_values(const struct RofRun *run,
                                      size_t index,
                                      enum RofField field,
                                      double *buf,
                                      size_t len,
                                      size_t *written);

// Samples the post-processed solution of a two-dimensional level at the
// pixel centers of a `width × height` grid on the bounding box, row-major
// with the top row first.
//
// # Safety
// `run` must be valid; `buf` must hold `width * height` values.
enum RofStatus rof_run_rasterize(const struct RofRun *run,
                                 size_t index,
                                 size_t width,
                                 size_t height,
                                 double *buf);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ROF_AFEM_H */
