#ifndef GKDV_H
#define GKDV_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every function.
 */
typedef enum GkdvStatus {
  GKDV_STATUS_OK = 0,
  GKDV_STATUS_NULL_POINTER = 1,
  GKDV_STATUS_INVALID_ARGUMENT = 2,
  GKDV_STATUS_NO_SOLITARY_WAVE = 3,
  GKDV_STATUS_NUMERICAL = 4,
  GKDV_STATUS_BUFFER_TOO_SMALL = 5,
  GKDV_STATUS_PANIC = 6,
} GkdvStatus;

/**
 * Opaque nonlinearity handle.
 */
typedef struct GkdvNonlinearity GkdvNonlinearity;

/**
 * Opaque solitary-wave profile handle.
 */
typedef struct GkdvProfile GkdvProfile;

/**
 * Conserved functionals of a profile.
 */
typedef struct GkdvFunctionals {
  double energy;
  double momentum;
  double mass;
} GkdvFunctionals;

/**
 * Critical speed and the derivative data at it.
 */
typedef struct GkdvCritical {
  double c_star;
  double d2n_dc2;
  double di_dc;
  double lambda_prime;
  double bracket_lo;
  double bracket_hi;
  bool nondegenerate;
} GkdvCritical;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or NULL. Valid until the next call on this thread.
 */
const char *gkdv_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *gkdv_version(void);

/**
 * Parses a spec such as `kdv`, `power:5` or `minus:1,6,1,8`.
 *
 * # Safety
 * `spec` must be a valid NUL-terminated string and `out_nl` a writable pointer.
 */
enum GkdvStatus gkdv_nonlinearity_parse(const char *spec, struct GkdvNonlinearity **out_nl);

/**
 * Releases a nonlinearity. NULL is ignored.
 *
 * # Safety
 * `nl` must come from [`gkdv_nonlinearity_parse`] and not have been freed.
 */
void gkdv_nonlinearity_free(struct GkdvNonlinearity *nl);

/**
 * Writes the `order`-th derivative of `f` at `u`.
 *
 * # Safety
 * `nl` must be a live handle and `value` writable.
 */
enum GkdvStatus gkdv_nonlinearity_eval(const struct GkdvNonlinearity *nl,
                                       double u,
                                       uint32_t order,
                                       double *value);

/**
 * Writes the peak height of the wave of speed `c`.
 *
 * # Safety
 * `nl` must be a live handle and `value` writable.
 */
enum GkdvStatus gkdv_amplitude(const struct GkdvNonlinearity *nl, double c, double *value);

/**
 * Builds the profile of speed `c` on the default grid for that speed.
 *
 * # Safety
 * `nl` must be a live handle and `out_profile` writable.
 */
enum GkdvStatus gkdv_profile_build(const struct GkdvNonlinearity *nl,
                                   double c,
                                   struct GkdvProfile **out_profile);

/**
 * Releases a profile. NULL is ignored.
 *
 * # Safety
 * `profile` must come from [`gkdv_profile_build`] and not have been freed.
 */
void gkdv_profile_free(struct GkdvProfile *profile);

/**
 * Number of grid nodes of the profile, 0 for NULL.
 *
 * # Safety
 * `profile` must be NULL or a live handle.
 */
size_t gkdv_profile_len(const struct GkdvProfile *profile);

/**
 * Peak height of the profile.
 *
 * # Safety
 * `profile` must be a live handle and `value` writable.
 */
enum GkdvStatus gkdv_profile_amplitude(const struct GkdvProfile *profile, double *value);

/**
 * Copies nodes and values into caller buffers of length `len`. Either buffer may be NULL.
 *
 * # Safety
 * Non-NULL buffers must hold `len` writable doubles.
 */
enum GkdvStatus gkdv_profile_copy(const struct GkdvProfile *profile,
                                  double *x,
                                  double *phi,
                                  size_t len);

/**
 * Energy, momentum and mass of the profile.
 *
 * # Safety
 * `profile` must be a live handle and `result` writable.
 */
enum GkdvStatus gkdv_profile_functionals(const struct GkdvProfile *profile,
                                         struct GkdvFunctionals *result);

/**
 * Locates the speed where `dN/dc` vanishes inside `[lo, hi]`, adjusting the bracket
 * below the sonic limit as the CLI does.
 *
 * # Safety
 * `nl` must be a live handle and `result` writable.
 */
enum GkdvStatus gkdv_critical_speed(const struct GkdvNonlinearity *nl,
                                    double lo,
                                    double hi,
                                    struct GkdvCritical *result);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GKDV_H */
