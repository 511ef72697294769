#ifndef QDIVIDE_H
#define QDIVIDE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum QdStatus {
  QD_STATUS_OK = 0,
  QD_STATUS_INVALID_INPUT = 1,
  QD_STATUS_OUT_OF_RANGE = 2,
  QD_STATUS_NON_INVERTIBLE = 3,
  QD_STATUS_DOMAIN = 4,
  QD_STATUS_PRECONDITION = 5,
  QD_STATUS_NUMERICAL = 6,
  QD_STATUS_NULL_POINTER = 7,
  QD_STATUS_PANIC = 8,
} QdStatus;

typedef enum QdVerdict {
  QD_VERDICT_CP_DIVISIBLE = 0,
  QD_VERDICT_P_DIVISIBLE_ONLY = 1,
  QD_VERDICT_NOT_P_DIVISIBLE = 2,
  QD_VERDICT_UNDETERMINED = 3,
} QdVerdict;

/**
 * Opaque rate model.
 */
typedef struct QdRateModel QdRateModel;

/**
 * Divisibility verdict. `witness_time` is NaN when there is no witness and
 * `+inf` when the deciding value is the asymptotic one.
 */
typedef struct QdVerdictResult {
  enum QdVerdict label;
  double margin;
  double witness_time;
} QdVerdictResult;

/**
 * Witness search result. Matrices are 4x4, row-major.
 */
typedef struct QdWitnessResult {
  bool found;
  double max_derivative;
  double t_a;
  double t_b;
  double mu;
  size_t evaluations;
  double rho_re[16];
  double rho_im[16];
  double sigma_re[16];
  double sigma_im[16];
} QdWitnessResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread. Valid until the next failing
 * call on the same thread; never null.
 */
const char *qd_last_error_message(void);

/**
 * Library version string (static).
 */
const char *qd_version(void);

/**
 * Mixture of the three dephasing semigroups with weights `p1, p2, p3`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum QdStatus qd_model_mixture(double p1, double p2, double p3, struct QdRateModel **out);

/**
 * Constant rates.
 *
 * # Safety
 * `rates` must point to three doubles and `out` must be valid.
 */
enum QdStatus qd_model_constants(const double *rates, double coupling, struct QdRateModel **out);

/**
 * Rates `(1, 1, sin(omega t))`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum QdStatus qd_model_sinusoid(double omega, double coupling, struct QdRateModel **out);

/**
 * Rates sampled at `n` times starting at 0; `rates` holds `3 n` values,
 * one triple per time.
 *
 * # Safety
 * `times` must hold `n` doubles, `rates` `3 n` doubles; `out` must be valid.
 */
enum QdStatus qd_model_tabulated(const double *times,
                                 const double *rates,
                                 size_t n,
                                 double coupling,
                                 struct QdRateModel **out);

/**
 * Releases a model. Null is ignored.
 *
 * # Safety
 * `model` must come from a `qd_model_*` constructor and not be used again.
 */
void qd_model_free(struct QdRateModel *model);

/**
 * Rates `(gamma_1, gamma_2, gamma_3)` at time `t`, without the coupling.
 *
 * # Safety
 * `model` must be valid; `out` must hold three doubles.
 */
enum QdStatus qd_model_rates(const struct QdRateModel *model, double t, double *out);

/**
 * Decay factors `(lambda_1, lambda_2, lambda_3)` at time `t`.
 *
 * # Safety
 * `model` must be valid; `out` must hold three doubles.
 */
enum QdStatus qd_model_decay_factors(const struct QdRateModel *model, double t, double *out);

/**
 * CP-divisibility on `grid` (`n` times; null for the default grid).
 *
 * # Safety
 * Pointers must be valid; `grid` may be null.
 */
enum QdStatus qd_cp_divisible(const struct QdRateModel *model,
                              const double *grid,
                              size_t n,
                              double tol,
                              struct QdVerdictResult *out);

/**
 * P-divisibility on `grid` (`n` times; null for the default grid).
 *
 * # Safety
 * Pointers must be valid; `grid` may be null.
 */
enum QdStatus qd_p_divisible(const struct QdRateModel *model,
                             const double *grid,
                             size_t n,
                             double tol,
                             struct QdVerdictResult *out);

/**
 * P-divisibility of the product dynamics.
 *
 * # Safety
 * Pointers must be valid; `grid` may be null.
 */
enum QdStatus qd_tensor_p_divisible(const struct QdRateModel *model1,
                                    const struct QdRateModel *model2,
                                    const double *grid,
                                    size_t n,
                                    double tol,
                                    struct QdVerdictResult *out);

/**
 * CP-divisibility of a mixture from its region inequalities.
 *
 * # Safety
 * `p` and `margins` must hold three doubles; `inside` must be valid.
 */
enum QdStatus qd_cp_region_test(const double *p, bool *inside, double *margins);

/**
 * Membership of `q` in the tensor region of a P-only `p` at time `t`
 * (`INFINITY` for the asymptotic region).
 *
 * # Safety
 * `p`, `q` and `margins` must hold three doubles; `inside` must be valid.
 */
enum QdStatus qd_tensor_region_test(const double *p,
                                    const double *q,
                                    double t,
                                    bool *inside,
                                    double *margins);

/**
 * Seeded witness search for the product of two models on the default grid.
 *
 * # Safety
 * Pointers must be valid.
 */
enum QdStatus qd_witness_search(const struct QdRateModel *model1,
                                const struct QdRateModel *model2,
                                size_t budget,
                                uint64_t seed,
                                struct QdWitnessResult *out);

/**
 * Trace norm of a Hermitian `dim x dim` matrix (`dim` 2 or 4), row-major.
 *
 * # Safety
 * `re` and `im` must hold `dim * dim` doubles; `out` must be valid.
 */
enum QdStatus qd_trace_norm(size_t dim, const double *re, const double *im, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QDIVIDE_H */
