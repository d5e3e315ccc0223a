/* C interface for the hdgml solvers (multilevel HDG trace systems).
 *
 * All fallible calls return an hdgml_status code and pass results through
 * out-pointers. Solve handles are opaque; free them with hdgml_solve_free.
 */

#ifndef HDGML_H
#define HDGML_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum hdgml_status {
  HDGML_OK = 0,
  /* A pointer argument was null or a string was not valid UTF-8. */
  HDGML_INVALID_ARGUMENT = 1,
  /* Unknown example name or solver name. */
  HDGML_UNKNOWN_CASE = 2,
  /* Mesh construction failed (levels out of range, non-square domain). */
  HDGML_INVALID_MESH = 3,
  /* A local solver or front factorization was singular. */
  HDGML_SINGULAR = 4,
  /* The requested quantity does not exist (e.g. no exact solution). */
  HDGML_UNAVAILABLE = 5,
  HDGML_INTERNAL = 6,
} hdgml_status;

typedef struct hdgml_options {
  double tol;           /* relative residual tolerance (default 1e-9) */
  int max_iter;         /* GMRES iteration cap (default 200) */
  int smooth_steps;     /* block-Jacobi pre/post smoothing steps (default 2) */
  int enrich_cap;       /* maximum EML enrichment order (default 10) */
  int compare_direct;   /* nonzero: also solve directly, fill error_vs_direct */
  uint64_t seed;        /* Example II permeability seed (default 2023) */
} hdgml_options;

/* Opaque solve handle. */
typedef struct hdgml_solve_s hdgml_solve_t;

hdgml_options hdgml_options_default(void);

/* Run one solve of a benchmark case.
 *   example: "I", "II", "III-shock", "III-smooth", "IV", "V", "VI"
 *   param:   case parameter (alpha or kappa); pass NAN for the case default
 *   levels:  mesh levels N, n = 2^N elements per side (N >= 2)
 *   order:   solution order p >= 1
 *   solver:  "direct-nd", "ml", "eml", or "bjacobi"
 *   options: may be NULL for defaults
 * On HDGML_OK, *out holds a handle owned by the caller. */
hdgml_status hdgml_solve(const char *example, double param, int levels,
                         int order, const char *solver,
                         const hdgml_options *options, hdgml_solve_t **out);

void hdgml_solve_free(hdgml_solve_t *h);

/* GMRES iteration count (0 for a direct solve); -1 on a null handle. */
int hdgml_solve_iterations(const hdgml_solve_t *h);

/* 1 if converged, 0 if not, -1 on a null handle. */
int hdgml_solve_converged(const hdgml_solve_t *h);

/* Final true relative residual |b - A x| / |b|; NaN on a null handle. */
double hdgml_solve_true_residual(const hdgml_solve_t *h);

/* max|lambda_direct - lambda|; requires options.compare_direct. */
hdgml_status hdgml_solve_error_vs_direct(const hdgml_solve_t *h, double *out);

/* L2 error of the recovered volume solution against the case's exact
 * solution; HDGML_UNAVAILABLE for cases without one. */
hdgml_status hdgml_solve_l2_error(const hdgml_solve_t *h, double *out);

/* Number of trace unknowns. */
size_t hdgml_solve_trace_len(const hdgml_solve_t *h);

/* Copy the trace solution into buf (capacity len doubles). */
hdgml_status hdgml_solve_copy_trace(const hdgml_solve_t *h, double *buf,
                                    size_t len);

/* Full solve report as a JSON string; free with hdgml_string_free.
 * Returns NULL on a null handle. */
char *hdgml_solve_report_json(const hdgml_solve_t *h);

void hdgml_string_free(char *s);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* HDGML_H */
