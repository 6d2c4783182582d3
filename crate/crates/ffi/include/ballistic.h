#ifndef BALLISTIC_H
#define BALLISTIC_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum BallisticMotorMode {
  BALLISTIC_MOTOR_MODE_NON_UNIFORM = 0,
  BALLISTIC_MOTOR_MODE_ISOTHERMAL = 1,
} BallisticMotorMode;

typedef enum BallisticPotential {
  BALLISTIC_POTENTIAL_FLAT = 0,
  BALLISTIC_POTENTIAL_SYMMETRIC = 1,
  BALLISTIC_POTENTIAL_ASYMMETRIC = 2,
} BallisticPotential;

typedef enum BallisticStatus {
  BALLISTIC_STATUS_OK = 0,
  BALLISTIC_STATUS_NULL_POINTER = 1,
  BALLISTIC_STATUS_INVALID_ARGUMENT = 2,
  BALLISTIC_STATUS_SINGULAR = 3,
  BALLISTIC_STATUS_RUNTIME = 4,
} BallisticStatus;

typedef enum BallisticTopCase {
  BALLISTIC_TOP_CASE_CONSERVATIVE_AXISYMMETRIC = 0,
  BALLISTIC_TOP_CASE_CONSERVATIVE_TILTED = 1,
  BALLISTIC_TOP_CASE_FRICTION_AXISYMMETRIC = 2,
  BALLISTIC_TOP_CASE_FRICTION_TILTED = 3,
} BallisticTopCase;

/**
 * Opaque sliding-disk simulation.
 */
typedef struct BallisticDisk BallisticDisk;

/**
 * Opaque motor simulation.
 */
typedef struct BallisticMotor BallisticMotor;

/**
 * Opaque top simulation.
 */
typedef struct BallisticTop BallisticTop;

typedef struct BallisticDiskState {
  double x;
  double v;
  double theta;
  double omega;
} BallisticDiskState;

typedef struct BallisticTopState {
  double x[3];
  double v[3];
  double xi3[3];
  double pi[3];
} BallisticTopState;

typedef struct BallisticMotorObservables {
  double x;
  double y;
  double angle;
  double energy;
  double ring_energy;
  double injected;
  double dissipated;
} BallisticMotorObservables;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread; valid until the next failing call.
 */
const char *ballistic_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *ballistic_version(void);

/**
 * Field of a point dipole `m` at offset `r`, written to `out[3]`.
 *
 * # Safety
 * `r`, `m` and `out` must point to three doubles each.
 */
enum BallisticStatus ballistic_dipole_field(const double *r, const double *m, double *out);

/**
 * Jacobian of the dipole field, row-major into `out[9]`.
 *
 * # Safety
 * `r` and `m` must point to three doubles, `out` to nine.
 */
enum BallisticStatus ballistic_dipole_jacobian(const double *r, const double *m, double *out);

/**
 * Long-time diffusion slopes of the disk: of `x + theta`, and of `x` for flat U.
 *
 * # Safety
 * Output pointers must be valid.
 */
enum BallisticStatus ballistic_diffusion_constants(double sigma,
                                                   double c,
                                                   double alpha,
                                                   double *out_xplustheta,
                                                   double *out_x_flat);

/**
 * Mean squared displacement of `n_traj` series of `n_rec` records each
 * (row-major `values[traj * n_rec + rec]`), all sharing one initial condition.
 *
 * # Safety
 * `values` must hold `n_traj * n_rec` doubles and `out` `n_rec`.
 */
enum BallisticStatus ballistic_msd(const double *values,
                                   uintptr_t n_traj,
                                   uintptr_t n_rec,
                                   double *out);

/**
 * Slope of `log series` against `log times` over the last decade.
 *
 * # Safety
 * `times` and `series` must hold `n` doubles.
 */
enum BallisticStatus ballistic_loglog_exponent(const double *times,
                                               const double *series,
                                               uintptr_t n,
                                               double *out_slope);

/**
 * Create a disk at rest.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum BallisticStatus ballistic_disk_new(double sigma,
                                        double c,
                                        double alpha,
                                        enum BallisticPotential potential,
                                        uint64_t seed,
                                        struct BallisticDisk **out);

/**
 * # Safety
 * `disk` must come from [`ballistic_disk_new`] (or be null).
 */
void ballistic_disk_free(struct BallisticDisk *disk);

/**
 * Advance by `n_steps` steps of size `h` with the internal noise stream.
 *
 * # Safety
 * `disk` must be a live handle.
 */
enum BallisticStatus ballistic_disk_step(struct BallisticDisk *disk, double h, uintptr_t n_steps);

/**
 * One step driven by caller-supplied standard normals.
 *
 * # Safety
 * `disk` must be a live handle.
 */
enum BallisticStatus ballistic_disk_step_with_noise(struct BallisticDisk *disk,
                                                    double h,
                                                    double z1,
                                                    double z2);

/**
 * # Safety
 * `disk` must be a live handle and `out` valid.
 */
enum BallisticStatus ballistic_disk_get_state(const struct BallisticDisk *disk,
                                              struct BallisticDiskState *out);

/**
 * # Safety
 * `disk` must be a live handle.
 */
enum BallisticStatus ballistic_disk_set_state(struct BallisticDisk *disk,
                                              struct BallisticDiskState state);

/**
 * Total energy and accumulated friction work.
 *
 * # Safety
 * `disk` must be a live handle and the outputs valid.
 */
enum BallisticStatus ballistic_disk_energy(const struct BallisticDisk *disk,
                                           double *out_energy,
                                           double *out_dissipated);

/**
 * Create one of the four standard top cases with default parameters.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum BallisticStatus ballistic_top_new(enum BallisticTopCase case_, struct BallisticTop **out);

/**
 * # Safety
 * `top` must come from [`ballistic_top_new`] (or be null).
 */
void ballistic_top_free(struct BallisticTop *top);

/**
 * # Safety
 * `top` must be a live handle.
 */
enum BallisticStatus ballistic_top_step(struct BallisticTop *top, double h, uintptr_t n_steps);

/**
 * # Safety
 * `top` must be a live handle and `out` valid.
 */
enum BallisticStatus ballistic_top_get_state(const struct BallisticTop *top,
                                             struct BallisticTopState *out);

/**
 * Momentum map `J = pi . xi3` and total energy.
 *
 * # Safety
 * `top` must be a live handle and the outputs valid.
 */
enum BallisticStatus ballistic_top_invariants(const struct BallisticTop *top,
                                              double *out_j,
                                              double *out_energy);

/**
 * Create a motor with default geometry. In isothermal mode `noise` sets
 * both amplitudes (ring friction is matched); otherwise it sets the ring noise.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum BallisticStatus ballistic_motor_new(enum BallisticMotorMode mode,
                                         double noise,
                                         uint64_t seed,
                                         struct BallisticMotor **out);

/**
 * # Safety
 * `motor` must come from [`ballistic_motor_new`] (or be null).
 */
void ballistic_motor_free(struct BallisticMotor *motor);

/**
 * # Safety
 * `motor` must be a live handle.
 */
enum BallisticStatus ballistic_motor_step(struct BallisticMotor *motor,
                                          double h,
                                          uintptr_t n_steps);

/**
 * # Safety
 * `motor` must be a live handle and `out` valid.
 */
enum BallisticStatus ballistic_motor_observe(const struct BallisticMotor *motor,
                                             struct BallisticMotorObservables *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BALLISTIC_H */
