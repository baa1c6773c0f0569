#ifndef FPTHERMO_H
#define FPTHERMO_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result of every fallible call.
 */
typedef enum FptStatus {
  FPT_STATUS_OK = 0,
  /*
   A required pointer argument was null.
   */
  FPT_STATUS_NULL_POINTER = 1,
  /*
   Bad arguments or an ill-posed system.
   */
  FPT_STATUS_INVALID_INPUT = 2,
  /*
   The computation itself failed (solver abort, non-Hurwitz drift, ...).
   */
  FPT_STATUS_NUMERIC = 3,
  /*
   Index past the end of a result.
   */
  FPT_STATUS_OUT_OF_RANGE = 4,
  /*
   A panic was caught; the handle arguments should be considered suspect.
   */
  FPT_STATUS_PANIC = 5,
} FptStatus;

/*
 Thermodynamic records of one Fokker-Planck run.
 */
typedef struct FptRun FptRun;

/*
 A diffusion system from the built-in catalog.
 */
typedef struct FptSystem FptSystem;

/*
 One row of a run's thermodynamic table.
 */
typedef struct FptRecord {
  double t;
  double entropy;
  double ep;
  double qex;
  double free_energy;
  double qhk;
  double dsdt_fd;
  double dfdt_fd;
  double res_entropy;
  double res_freeenergy;
} FptRecord;

/*
 Closed-form functionals of a Gaussian state of a linear system.
 */
typedef struct FptOuRates {
  double entropy;
  double entropy_rate;
  double ep;
  double qex;
  double free_energy;
  double qhk;
} FptOuRates;

typedef struct FptDecomposition {
  double generated;
  double change;
  double folding;
  double residual;
} FptDecomposition;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Copy the last error message of this thread into `buf` (NUL terminated,
 truncated to `len`). Returns the full message length in bytes, so a
 caller can size a buffer by passing `len = 0`.

 # Safety
 `buf` must be null or writable for `len` bytes.
 */
size_t fpt_last_error_message(char *buf, size_t len);

/*
 Build a catalog system (`"ou1d"`, `"double_well"`, `"rot_ou"`, ...) at
 the given alpha.

 # Safety
 `name` must be a NUL-terminated string; `out` must be writable.
 */
enum FptStatus fpt_system_from_catalog(const char *name, double alpha, struct FptSystem **out);

/*
 # Safety
 `system` must be null or a handle from [`fpt_system_from_catalog`] that
 has not been freed.
 */
void fpt_system_free(struct FptSystem *system);

/*
 Spatial dimension of a system, 0 for a null handle.

 # Safety
 `system` must be null or a live handle.
 */
size_t fpt_system_dim(const struct FptSystem *system);

/*
 Solve the Fokker-Planck equation on a box from a Gaussian start and
 record the thermodynamic functionals every `spacing` time units.
 `lower`, `upper`, `cells` and `mean` have `dim` entries; `cov` is a
 row-major `dim x dim` matrix. `dt <= 0` selects the default step.

 # Safety
 All pointers must be valid for the stated lengths; `out` must be writable.
 */
enum FptStatus fpt_fp_run(const struct FptSystem *system,
                          size_t dim,
                          const double *lower,
                          const double *upper,
                          const size_t *cells,
                          const double *mean,
                          const double *cov,
                          double t_end,
                          double spacing,
                          double dt,
                          struct FptRun **out);

/*
 # Safety
 `run` must be null or a live handle from [`fpt_fp_run`].
 */
void fpt_run_free(struct FptRun *run);

/*
 Number of records, 0 for a null handle.

 # Safety
 `run` must be null or a live handle.
 */
size_t fpt_run_len(const struct FptRun *run);

/*
 # Safety
 `run` must be a live handle and `out` writable.
 */
enum FptStatus fpt_run_record(const struct FptRun *run, size_t index, struct FptRecord *out);

/*
 Closed-form functionals of `N(mean, cov)` for a linear system. Fails
 with [`FptStatus::Numeric`] when the drift is not Hurwitz, since free
 energy and house-keeping heat then do not exist.

 # Safety
 `mean` has `dim` entries, `cov` is row-major `dim x dim`, `out` writable.
 */
enum FptStatus fpt_ou_rates(const struct FptSystem *system,
                            size_t dim,
                            const double *mean,
                            const double *cov,
                            struct FptOuRates *out);

/*
 Entropy decomposition of one step of a finite chain with initial law `p`
 (`n` entries) and row-major `n x n` transition matrix.

 # Safety
 `p` has `n` entries, `transition` has `n * n`, `out` writable.
 */
enum FptStatus fpt_markov_decomposition(size_t n,
                                        const double *p,
                                        const double *transition,
                                        struct FptDecomposition *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FPTHERMO_H */
