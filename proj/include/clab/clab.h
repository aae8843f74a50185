/* C interface of the clab numerical laboratory.
 *
 * Every function returns a clab_status. On failure the message of the most
 * recent error on the calling thread is available through clab_last_error().
 * Objects are opaque handles created by *_create / *_from_* functions and
 * released by the matching *_free function; strings returned by accessors
 * are owned by the handle and stay valid until it is freed. */
#ifndef CLAB_CLAB_H
#define CLAB_CLAB_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(CLAB_BUILDING_LIBRARY)
#    define CLAB_API __declspec(dllexport)
#  else
#    define CLAB_API __declspec(dllimport)
#  endif
#else
#  define CLAB_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum clab_status {
  CLAB_OK = 0,
  CLAB_ERR_INVALID_ARGUMENT = 1,
  CLAB_ERR_DOMAIN = 2,
  CLAB_ERR_INFEASIBLE = 3,
  CLAB_ERR_PARSE = 4,
  CLAB_ERR_MEASURABILITY = 5,
  CLAB_ERR_IO = 6,
  CLAB_ERR_INTERNAL = 7
} clab_status;

typedef struct clab_report clab_report;
typedef struct clab_tree clab_tree;
typedef struct clab_space clab_space;
typedef struct clab_grid clab_grid;

CLAB_API const char* clab_version(void);
CLAB_API const char* clab_status_name(clab_status status);
/* Message of the last failure on this thread ("" if none). */
CLAB_API const char* clab_last_error(void);

/* ---- point evaluations ---- */

/* Super-solution B(F, f, M; C) for exponent p; CLAB_ERR_DOMAIN outside
 * f >= 0, f^p <= F, 0 <= M <= C. */
CLAB_API clab_status clab_eval_supersolution(double F, double f, double M, double C, double p, double* out);
CLAB_API clab_status clab_eval_supersolution_dM(double F, double f, double M, double C, double p, double* out);
/* Hull u(f, M) with C = 1. */
CLAB_API clab_status clab_eval_hull(double f, double M, double p, double* out);
/* Optimal profile phi(M). */
CLAB_API clab_status clab_eval_phi(double M, double p, double* out);

/* ---- pipelines ---- */

/* Runs one command ("eval", "verify-supersolution", "dp-solve",
 * "extract-tree", "embed-check", "simulate", "remodel", "theorem-a",
 * "theorem-b", "doob") with a JSON configuration object (NULL or "" means
 * defaults). A report is produced whenever the run completes, whether or
 * not its checks pass. */
CLAB_API clab_status clab_run(const char* command, const char* config_json, clab_report** out);
CLAB_API void clab_report_free(clab_report* report);

/* 1 when every check passed, 0 otherwise. */
CLAB_API int clab_report_passed(const clab_report* report);
CLAB_API size_t clab_report_check_count(const clab_report* report);
CLAB_API clab_status clab_report_check(const clab_report* report, size_t index, const char** name, int* pass,
                                       double* margin, double* tolerance);
CLAB_API size_t clab_report_skip_count(const clab_report* report);
/* Deterministic JSON document (sorted keys, no timestamps). */
CLAB_API const char* clab_report_json(const clab_report* report);
/* Human-readable table of checks. */
CLAB_API const char* clab_report_table(const clab_report* report);
/* Extra outputs such as grid CSV or trees: name is a relative file name. */
CLAB_API size_t clab_report_artifact_count(const clab_report* report);
CLAB_API clab_status clab_report_artifact(const clab_report* report, size_t index, const char** name,
                                          const char** content);

/* ---- dyadic trees ---- */

CLAB_API clab_status clab_tree_from_json(const char* json, clab_tree** out);
CLAB_API void clab_tree_free(clab_tree* tree);
CLAB_API int clab_tree_depth(const clab_tree* tree);
CLAB_API clab_status clab_tree_set_weight(clab_tree* tree, int k, int j, double alpha);
CLAB_API clab_status clab_tree_embedding(const clab_tree* tree, double p, double* embedding_sum,
                                         double* carleson_constant, double* ratio);

/* ---- filtered spaces ---- */

CLAB_API clab_status clab_space_from_json(const char* json, clab_space** out);
CLAB_API void clab_space_free(clab_space* space);
CLAB_API size_t clab_space_atom_count(const clab_space* space);
CLAB_API size_t clab_space_level_count(const clab_space* space);
/* f* = max_n |E[f | F_n]| into `fstar` (atom_count entries). */
CLAB_API clab_status clab_space_maximal(const clab_space* space, const double* f, size_t n, double* fstar);
/* E[f*^p] / E[|f|^p]. */
CLAB_API clab_status clab_space_doob_ratio(const clab_space* space, const double* f, size_t n, double p,
                                           double* ratio);

/* ---- value-iteration grids ---- */

CLAB_API clab_status clab_grid_solve(double p, int n_r, int n_M, double tol, int max_iters, int split_samples,
                                     int threads, clab_grid** out);
CLAB_API void clab_grid_free(clab_grid* grid);
CLAB_API double clab_grid_sup(const clab_grid* grid);
CLAB_API int clab_grid_converged(const clab_grid* grid);
/* Lower approximation of B(F, f, M; 1). */
CLAB_API clab_status clab_grid_value(const clab_grid* grid, double F, double f, double M, double* out);

#ifdef __cplusplus
}
#endif

#endif /* CLAB_CLAB_H */
