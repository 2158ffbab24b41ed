/* kinreg C ABI — generated by cbindgen from crates/kinreg-ffi; do not edit. */

#ifndef KINREG_H
#define KINREG_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Outcome classification of a non-degeneracy fit.
 */
typedef enum KinregFitFlag {
  /**
   * A trustworthy exponent was fitted.
   */
  KINREG_FIT_FLAG_OK = 0,
  /**
   * Every measured set had measure zero: uniformly non-degenerate.
   */
  KINREG_FIT_FLAG_DEGENERATE = 1,
  /**
   * Fewer than four thresholds produced positive measure; no fit.
   */
  KINREG_FIT_FLAG_TOO_FEW_POINTS = 2,
  /**
   * A fit exists but its r² is below 0.9; treat the exponent with care.
   */
  KINREG_FIT_FLAG_LOW_R2 = 3,
} KinregFitFlag;

/**
 * Status code returned by every fallible entry point.
 */
typedef enum KinregStatus {
  /**
   * Success; out-parameters are valid.
   */
  KINREG_STATUS_OK = 0,
  /**
   * A precondition on the arguments failed (null pointer, bad range, …).
   */
  KINREG_STATUS_INVALID_ARGUMENT = 1,
  /**
   * The computation itself failed (numerical trouble, I/O, panic).
   */
  KINREG_STATUS_RUNTIME_FAILURE = 2,
  /**
   * A caller-provided buffer is too short; nothing was written.
   */
  KINREG_STATUS_BUFFER_TOO_SMALL = 3,
} KinregStatus;

/**
 * Opaque result of [`kinreg_estimate_alpha`]: the fitted exponent plus the
 * measured `(δ, sup-measure)` curve behind it.
 */
typedef struct KinregFit KinregFit;

/**
 * Opaque coefficient model: flux, diffusion, square-root factor and their
 * primitives on a bounded state interval.
 */
typedef struct KinregModel KinregModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Crate version as a static NUL-terminated string; never freed.
 */
const char *kinreg_version(void);

/**
 * Copy the thread's most recent error message into `buf` (NUL-terminated).
 *
 * Returns the full message length **including** the terminator, or 0 when no
 * error has been recorded on this thread. When the return value exceeds
 * `cap` nothing was written; call again with a larger buffer. `buf` may be
 * null to query the required size.
 */
size_t kinreg_last_error(char *buf, size_t cap);

/**
 * Power-law benchmark model: flux `(λ^l, 0)`, diffusion `diag(0, |λ|^n)`
 * on two space dimensions.
 */
enum KinregStatus kinreg_model_power_law(uint32_t l, uint32_t n, struct KinregModel **out);

/**
 * Inviscid Burgers model in one space dimension (no diffusion).
 */
enum KinregStatus kinreg_model_burgers(struct KinregModel **out);

/**
 * Pure heat model: no flux, isotropic diffusion `c·I` in `d` dimensions.
 */
enum KinregStatus kinreg_model_heat(double c, size_t d, struct KinregModel **out);

/**
 * Load a tabulated model from a CSV coefficient table. `path` must be
 * NUL-terminated UTF-8.
 */
enum KinregStatus kinreg_model_from_csv(const char *path, struct KinregModel **out);

/**
 * Replace the model's state interval with `[lo, hi]`.
 */
enum KinregStatus kinreg_model_set_interval(struct KinregModel *model, double lo, double hi);

/**
 * Number of space dimensions the model is defined on.
 */
enum KinregStatus kinreg_model_dimension(const struct KinregModel *model, size_t *out);

/**
 * Release a model handle. Null is a no-op.
 */
void kinreg_model_free(struct KinregModel *model);

/**
 * Kinetic symbol `|ξ0 + ⟨f(λ)|ξ̃⟩|² + ⟨a(λ)ξ̃|ξ̃⟩` at state `lambda`.
 *
 * `xi` must hold `d + 1` entries forming a unit vector (time component
 * first); `lambda` must lie in the model's state interval.
 */
enum KinregStatus kinreg_eval_symbol(const struct KinregModel *model,
                                     const double *xi,
                                     size_t xi_len,
                                     double lambda,
                                     double *out);

/**
 * Lebesgue measure of `{λ in the state interval : symbol(ξ, λ) ≤ delta}`,
 * computed by midpoint counting on `lambda_grid` cells.
 */
enum KinregStatus kinreg_degenerate_measure(const struct KinregModel *model,
                                            const double *xi,
                                            size_t xi_len,
                                            double delta,
                                            size_t lambda_grid,
                                            double *out);

/**
 * Closed-form regularity exponents for non-degeneracy exponent `alpha` in
 * `d` space dimensions.
 *
 * Writes the integrability exponent `q*`, the smoothness exponent `s*`, and
 * the effective smoothness target (`2·s*` when `deterministic` is true,
 * `s*` otherwise). Any out-pointer may be null to skip that value.
 */
enum KinregStatus kinreg_exponents(double alpha,
                                   size_t d,
                                   bool deterministic,
                                   double *out_q_star,
                                   double *out_s_star,
                                   double *out_effective_s);

/**
 * Fit the non-degeneracy exponent α from sup-measure decay over a geometric
 * δ-grid, maximizing over `sphere_samples` unit frequencies per δ.
 *
 * `mixed_variant` selects the un-squared hyperbolic smallness condition;
 * pass false for the symbol as stated. The returned handle must be released
 * with [`kinreg_fit_free`].
 */
enum KinregStatus kinreg_estimate_alpha(const struct KinregModel *model,
                                        size_t sphere_samples,
                                        double delta_min,
                                        double delta_max,
                                        size_t delta_points,
                                        size_t lambda_grid,
                                        uint64_t seed,
                                        bool mixed_variant,
                                        struct KinregFit **out);

/**
 * Fitted exponent α; NaN when the fit refused (see [`kinreg_fit_flag`]).
 */
enum KinregStatus kinreg_fit_alpha(const struct KinregFit *fit, double *out);

/**
 * Coefficient of determination of the log–log fit (0 when no fit was made).
 */
enum KinregStatus kinreg_fit_r_squared(const struct KinregFit *fit, double *out);

/**
 * Classification of the fit outcome.
 */
enum KinregStatus kinreg_fit_flag(const struct KinregFit *fit, enum KinregFitFlag *out);

/**
 * Number of `(δ, sup-measure)` points behind the fit.
 */
enum KinregStatus kinreg_fit_point_count(const struct KinregFit *fit, size_t *out);

/**
 * Copy the δ-grid into `buf`; `cap` must be at least the point count.
 */
enum KinregStatus kinreg_fit_deltas(const struct KinregFit *fit, double *buf, size_t cap);

/**
 * Copy the per-δ sup-measures into `buf`; `cap` must be at least the point
 * count.
 */
enum KinregStatus kinreg_fit_sup_measures(const struct KinregFit *fit, double *buf, size_t cap);

/**
 * Release a fit handle. Null is a no-op.
 */
void kinreg_fit_free(struct KinregFit *fit);

/**
 * Fractional smoothness of a uniformly sampled one-dimensional signal via
 * Littlewood–Paley block-norm decay in `L^q`.
 *
 * Writes the fitted exponent and the fit's r². When the estimator refuses
 * (too few resolvable blocks above the numerical floor) both outputs are
 * NaN and the call still returns `KINREG_STATUS_OK`; structurally impossible
 * fits (signal too short) fail instead.
 */
enum KinregStatus kinreg_besov_slope(const double *data,
                                     size_t len,
                                     double q,
                                     double *out_s,
                                     double *out_r_squared);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* KINREG_H */
