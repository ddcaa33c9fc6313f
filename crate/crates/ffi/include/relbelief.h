#ifndef RELBELIEF_H
#define RELBELIEF_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every call.
 */
typedef enum RbStatus {
  RB_STATUS_OK = 0,
  RB_STATUS_NULL_POINTER = 1,
  RB_STATUS_INVALID_UTF8 = 2,
  RB_STATUS_PARSE = 3,
  RB_STATUS_VALIDATION = 4,
  RB_STATUS_NUMERICAL = 5,
  RB_STATUS_BUFFER_TOO_SMALL = 6,
  RB_STATUS_PANIC = 7,
} RbStatus;

/**
 * Relative belief table for one observation, indexed by psi.
 */
typedef struct RbEvidence RbEvidence;

/**
 * A validated finite model with its psi map.
 */
typedef struct RbModel RbModel;

/**
 * One row of the simulated misclassification table.
 */
typedef struct RbRiskRow {
  double beta;
  double map_err0;
  double map_err1;
  double map_sum;
  double rb_err0;
  double rb_err1;
  double rb_sum;
} RbRiskRow;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to fit). Returns the full message length without the NUL, or 0
 * when no error has been recorded.
 */
size_t rb_last_error_message(char *buf, size_t len);

/**
 * Parses and validates a model document.
 */
enum RbStatus rb_model_from_json(const char *json, struct RbModel **out);

void rb_model_free(struct RbModel *model);

/**
 * Number of observation values, or 0 for a null handle.
 */
size_t rb_model_n_x(const struct RbModel *model);

/**
 * Number of psi values, or 0 for a null handle.
 */
size_t rb_model_n_psi(const struct RbModel *model);

/**
 * Posterior of psi at observation `x`, written to `out[0..n_psi]`.
 */
enum RbStatus rb_model_posterior(const struct RbModel *model, size_t x, double *out, size_t len);

/**
 * Builds the relative belief table of psi at observation `x`.
 */
enum RbStatus rb_evidence_new(const struct RbModel *model, size_t x, struct RbEvidence **out);

void rb_evidence_free(struct RbEvidence *ev);

/**
 * Number of psi values covered by the table, or 0 for a null handle.
 */
size_t rb_evidence_len(const struct RbEvidence *ev);

/**
 * Relative belief ratios by psi index; NaN where prior and posterior are both 0.
 */
enum RbStatus rb_evidence_rb(const struct RbEvidence *ev, double *out, size_t len);

/**
 * The RB estimate as a psi index; `tie` is set when the maximum is shared.
 */
enum RbStatus rb_evidence_estimate(const struct RbEvidence *ev, size_t *index, bool *tie);

/**
 * Strength of the evidence at psi index `psi0`.
 */
enum RbStatus rb_evidence_strength(const struct RbEvidence *ev, size_t psi0, double *out);

/**
 * Membership (0/1) of each psi index in the gamma-credible region.
 */
enum RbStatus rb_evidence_credible(const struct RbEvidence *ev,
                                   double gamma,
                                   uint8_t *mask,
                                   size_t len);

/**
 * Bayes rule and risks as a JSON string. `loss` is "rb", "map" or "rb-eta";
 * `eta` is ignored unless the loss needs it. Free the result with
 * [`rb_string_free`].
 */
enum RbStatus rb_decide_json(const struct RbModel *model, const char *loss, double eta, char **out);

void rb_string_free(char *s);

/**
 * Simulated misclassification rates for each beta, written to `out[0..n_betas]`.
 */
enum RbStatus rb_classify_table1(double alpha,
                                 const double *betas,
                                 size_t n_betas,
                                 double mu,
                                 uint64_t n,
                                 uint64_t reps,
                                 uint64_t seed,
                                 struct RbRiskRow *out,
                                 size_t out_len);

/**
 * RB estimate and RB prediction of `w' beta` in normal regression.
 * `design` is row-major `n x k`.
 */
enum RbStatus rb_regress_functional(const double *design,
                                    size_t n,
                                    size_t k,
                                    const double *response,
                                    double sigma2,
                                    double tau2,
                                    const double *w,
                                    double *psi_rb,
                                    double *z_rb);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RELBELIEF_H */
