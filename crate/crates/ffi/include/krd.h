#ifndef KRD_H
#define KRD_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum KrdStatus {
  KRD_STATUS_OK = 0,
  KRD_STATUS_NULL_POINTER = 1,
  KRD_STATUS_INVALID_ARGUMENT = 2,
  KRD_STATUS_INVALID_CONFIG = 3,
  KRD_STATUS_RUNTIME = 4,
  KRD_STATUS_BUFFER_TOO_SMALL = 5,
  KRD_STATUS_PANIC = 6,
} KrdStatus;

/**
 * Kraichnan noise model.
 */
typedef struct KrdNoise KrdNoise;

/**
 * One simulation path with its current state.
 */
typedef struct KrdSimulation KrdSimulation;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty when none.
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *krd_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *krd_version(void);

/**
 * Shell noise `theta ∝ 1{n <= |k| <= 2n} |k|^-gamma` with intensity `nu`.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum KrdStatus krd_noise_shell(size_t d,
                               uint32_t n,
                               double gamma,
                               double nu,
                               struct KrdNoise **out);

/**
 * Number of lattice modes in the support of the spectrum.
 *
 * # Safety
 * `noise` must be a live handle or null; `out` must be writable.
 */
enum KrdStatus krd_noise_mode_count(const struct KrdNoise *noise, size_t *out);

/**
 * Maximal deviation of the noise covariance from `I / c_d`.
 *
 * # Safety
 * `noise` must be a live handle or null; `out` must be writable.
 */
enum KrdStatus krd_noise_ellipticity(const struct KrdNoise *noise, double *out);

/**
 * # Safety
 * `noise` must come from [`krd_noise_shell`] and not be used afterwards. Null is ignored.
 */
void krd_noise_free(struct KrdNoise *noise);

/**
 * Simulation from TOML configuration text, positioned at `t = 0` on Monte-Carlo path `path`.
 *
 * # Safety
 * `config` must be a NUL-terminated string; `out` must be writable.
 */
enum KrdStatus krd_simulation_new(const char *config,
                                  bool allow_unsafe,
                                  uint64_t path,
                                  struct KrdSimulation **out);

/**
 * Advances up to `steps` steps, stopping early at `T` or on blow-up.
 *
 * # Safety
 * `sim` must be a live handle or null.
 */
enum KrdStatus krd_simulation_step(struct KrdSimulation *sim, uint64_t steps);

/**
 * Current time.
 *
 * # Safety
 * `sim` must be a live handle or null; `out` must be writable.
 */
enum KrdStatus krd_simulation_time(const struct KrdSimulation *sim, double *out);

/**
 * Writes whether the path blew up and, if so, the blow-up time (NaN otherwise).
 *
 * # Safety
 * `sim` must be a live handle or null; `blown_up` and `tau` must be writable.
 */
enum KrdStatus krd_simulation_blowup(const struct KrdSimulation *sim, bool *blown_up, double *tau);

/**
 * Number of species and grid points per species.
 *
 * # Safety
 * `sim` must be a live handle or null; `species` and `points` must be writable.
 */
enum KrdStatus krd_simulation_shape(const struct KrdSimulation *sim,
                                    size_t *species,
                                    size_t *points);

/**
 * Copies the grid values of one species (row-major) into `buf` of length `len`.
 *
 * # Safety
 * `sim` must be a live handle or null; `buf` must hold `len` doubles.
 */
enum KrdStatus krd_simulation_field(const struct KrdSimulation *sim,
                                    size_t species,
                                    double *buf,
                                    size_t len);

/**
 * Spatial mean of `v^2` for one species.
 *
 * # Safety
 * `sim` must be a live handle or null; `out` must be writable.
 */
enum KrdStatus krd_simulation_energy(const struct KrdSimulation *sim, size_t species, double *out);

/**
 * # Safety
 * `sim` must come from [`krd_simulation_new`] and not be used afterwards. Null is ignored.
 */
void krd_simulation_free(struct KrdSimulation *sim);

/**
 * Interpolation exponents `(phi, psi)` for dimension `d`, growth `h` and integrability `q`.
 *
 * # Safety
 * `phi` and `psi` must be writable.
 */
enum KrdStatus krd_interp_exponents(size_t d, double h, double q, double *phi, double *psi);

/**
 * Smallest admissible cut-off time exponent `r_0`.
 *
 * # Safety
 * `out` must be writable.
 */
enum KrdStatus krd_cutoff_r0(size_t d, double h, double q, double p, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* KRD_H */
