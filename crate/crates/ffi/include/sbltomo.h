#ifndef SBLTOMO_H
#define SBLTOMO_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/*
 How the noise update counts well-determined parameters.
 */
typedef enum SbltomoNoiseDenominator {
  /*
   `N − Σ (1 − Σ_ii / w_i)`.
   */
  SBLTOMO_NOISE_DENOMINATOR_MACKAY = 0,
  /*
   `N − Σ Σ_ii / w_i`.
   */
  SBLTOMO_NOISE_DENOMINATOR_LITERAL = 1,
} SbltomoNoiseDenominator;

/*
 Result code of every fallible call.
 */
typedef enum SbltomoStatus {
  SBLTOMO_STATUS_OK = 0,
  SBLTOMO_STATUS_NULL_POINTER = 1,
  SBLTOMO_STATUS_INVALID_ARGUMENT = 2,
  SBLTOMO_STATUS_DIMENSION_MISMATCH = 3,
  SBLTOMO_STATUS_DIMENSION_OVERFLOW = 4,
  SBLTOMO_STATUS_ILL_CONDITIONED = 5,
  SBLTOMO_STATUS_NUMERICAL = 6,
  SBLTOMO_STATUS_PANIC = 7,
} SbltomoStatus;

/*
 Opaque outcome of one inversion.
 */
typedef struct SbltomoResult SbltomoResult;

/*
 Opaque steering matrix over an acquisition geometry and elevation grid.
 */
typedef struct SbltomoSteering SbltomoSteering;

/*
 Solver options; obtain defaults from [`sbltomo_options_default`].
 */
typedef struct SbltomoOptions {
  uint32_t max_iterations;
  double tolerance;
  double prune_threshold;
  double noise_floor;
  /*
   Known noise variance; a non-positive or NaN value means "learn it".
   */
  double fixed_noise;
  uint32_t max_scatterers;
  enum SbltomoNoiseDenominator noise_denominator;
} SbltomoOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Default solver options.
 */
struct SbltomoOptions sbltomo_options_default(void);

/*
 Static, NUL-terminated description of `status`.
 */
const char *sbltomo_status_string(enum SbltomoStatus status);

/*
 Copy the calling thread's last error message into `buf` (NUL-terminated,
 truncated to `len - 1` bytes) and return the full message length. Pass a
 null `buf` to query the length.
 */
size_t sbltomo_last_error_message(char *buf, size_t len);

/*
 Build the steering matrix for `n` perpendicular baselines (m) over the
 grid `s_min..=s_max` with `spacing` (m). On success `*out` owns a handle to
 release with [`sbltomo_steering_free`].
 */
enum SbltomoStatus sbltomo_steering_new(double wavelength,
                                        double slant_range,
                                        const double *baselines,
                                        size_t n,
                                        double s_min,
                                        double s_max,
                                        double spacing,
                                        struct SbltomoSteering **out);

/*
 Release a steering handle; null is ignored.
 */
void sbltomo_steering_free(struct SbltomoSteering *steering);

/*
 Number of acquisitions `N` (0 for null).
 */
size_t sbltomo_steering_rows(const struct SbltomoSteering *steering);

/*
 Number of grid positions `L` (0 for null).
 */
size_t sbltomo_steering_cols(const struct SbltomoSteering *steering);

/*
 Rayleigh elevation resolution (m); NaN for null.
 */
double sbltomo_steering_rayleigh_resolution(const struct SbltomoSteering *steering);

/*
 Single-scatterer elevation CRLB (m) at linear SNR `snr`.
 */
enum SbltomoStatus sbltomo_crlb_elevation(const struct SbltomoSteering *steering,
                                          double snr,
                                          double *out);

/*
 Angle (radians) between two complex vectors of length `n`, given as
 interleaved pairs, ignoring a global phase.
 */
enum SbltomoStatus sbltomo_angular_bias(const double *a, const double *b, size_t n, double *out);

/*
 Invert one snapshot of `n` complex samples (interleaved `re, im`). A null
 `options` uses the defaults. On success `*out` owns a handle to release
 with [`sbltomo_result_free`].
 */
enum SbltomoStatus sbltomo_solve(const struct SbltomoSteering *steering,
                                 const double *g,
                                 size_t n,
                                 const struct SbltomoOptions *options,
                                 struct SbltomoResult **out);

/*
 Release a result handle; null is ignored.
 */
void sbltomo_result_free(struct SbltomoResult *result);

/*
 Number of detected scatterers (0 for null).
 */
size_t sbltomo_result_count(const struct SbltomoResult *result);

/*
 Scatterer `index` in ascending elevation: position (m), grid index and
 complex amplitude. Any output pointer may be null.
 */
enum SbltomoStatus sbltomo_result_scatterer(const struct SbltomoResult *result,
                                            size_t index,
                                            double *elevation,
                                            size_t *grid_index,
                                            double *amplitude_re,
                                            double *amplitude_im);

/*
 Iterations performed (0 for null).
 */
size_t sbltomo_result_iterations(const struct SbltomoResult *result);

/*
 Whether the solver met its convergence test (false for null).
 */
bool sbltomo_result_converged(const struct SbltomoResult *result);

/*
 Final noise variance σ² (NaN for null).
 */
double sbltomo_result_noise_variance(const struct SbltomoResult *result);

/*
 Copy the learned prior variances `w` (one per grid position) into `out`,
 which must hold exactly `len == L` doubles.
 */
enum SbltomoStatus sbltomo_result_weights(const struct SbltomoResult *result,
                                          double *out,
                                          size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SBLTOMO_H */
