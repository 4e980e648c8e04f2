#ifndef PIEZOQ_H
#define PIEZOQ_H

#include <stdbool.h>
#include <stddef.h>

typedef enum PqStatus {
  PQ_STATUS_OK = 0,
  PQ_STATUS_NULL_POINTER = 1,
  PQ_STATUS_INVALID_ARGUMENT = 2,
  PQ_STATUS_IO = 3,
  PQ_STATUS_PARSE = 4,
  PQ_STATUS_VALIDATION = 5,
  PQ_STATUS_OUT_OF_DOMAIN = 6,
  PQ_STATUS_RESONANCE = 7,
  PQ_STATUS_CONVERGENCE = 8,
  PQ_STATUS_AT_BOUND = 9,
  PQ_STATUS_UNDERDETERMINED = 10,
  PQ_STATUS_NUMERICAL = 11,
  PQ_STATUS_PANIC = 12,
} PqStatus;

/**
 * η(h/λ, t_m/h) lookup table.
 */
typedef struct PqEtaMap PqEtaMap;

/**
 * Loss model for both channels.
 */
typedef struct PqLossModel PqLossModel;

/**
 * Loaded or constructed material.
 */
typedef struct PqMaterial PqMaterial;

/**
 * Unit-cell settings for [`pq_unit_cell_eta`].
 */
typedef struct PqUnitCell {
  /**
   * λ, m
   */
  double wavelength;
  /**
   * h, m
   */
  double film_thickness;
  /**
   * t_m, m
   */
  double metal_thickness;
  /**
   * Fraction of the period covered by metal, 0..=1.
   */
  double coverage;
  size_t mesh_nx;
  size_t mesh_nz_film;
  size_t mesh_nz_metal;
  size_t n_modes;
  /**
   * Dominant displacement component of the wanted mode: 0 = x, 1 = y
   * (shear horizontal), 2 = z, negative = lowest mode.
   */
  int polarization;
} PqUnitCell;

/**
 * Modified Butterworth–Van Dyke parameters in SI units.
 */
typedef struct PqMbvdParams {
  double rm;
  double lm;
  double cm;
  double c0;
  double rs;
  double r0;
} PqMbvdParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version, a static NUL-terminated string.
 */
const char *pq_version(void);

/**
 * Message of the last failed call on this thread, or null after a success.
 * Valid until the next piezoq call on the same thread.
 */
const char *pq_last_error_message(void);

/**
 * `Q_m = 1 / (η/Q_piezo + (1 − η)/Q_metal)`.
 *
 * # Safety
 * `out` must be null or point to writable memory.
 */
enum PqStatus pq_q_m(double eta, double q_piezo, double q_metal, double *out);

/**
 * Reciprocal sum of `n` quality factors.
 *
 * # Safety
 * `qs` must point to `n` readable doubles; `out` must be writable.
 */
enum PqStatus pq_series_q(const double *qs, size_t n, double *out);

/**
 * `Q_metal = fq / f`.
 *
 * # Safety
 * `out` must be null or point to writable memory.
 */
enum PqStatus pq_q_metal_fq(double fq_hz, double f_hz, double *out);

/**
 * Reads a material file.
 *
 * # Safety
 * `file` must be a NUL-terminated string; `out` must be writable.
 */
enum PqStatus pq_material_load(const char *file, struct PqMaterial **out);

/**
 * Isotropic solid from Lamé constants (Pa) and density (kg/m³).
 *
 * # Safety
 * `out` must be writable.
 */
enum PqStatus pq_material_isotropic(double lame_lambda,
                                    double shear_modulus,
                                    double density,
                                    bool is_metal,
                                    struct PqMaterial **out);

/**
 * New material rotated by intrinsic Z–X–Z Euler angles in degrees.
 *
 * # Safety
 * `material` must be a live handle; `out` must be writable.
 */
enum PqStatus pq_material_rotate(const struct PqMaterial *material,
                                 double phi_deg,
                                 double theta_deg,
                                 double psi_deg,
                                 struct PqMaterial **out);

/**
 * Voigt stiffness entry `c_ij` (Pa), indices 0..6.
 *
 * # Safety
 * `material` must be a live handle; `out` must be writable.
 */
enum PqStatus pq_material_stiffness(const struct PqMaterial *material,
                                    size_t i,
                                    size_t j,
                                    double *out);

/**
 * # Safety
 * `material` must be null or a handle not yet freed.
 */
void pq_material_free(struct PqMaterial *material);

/**
 * Reads an η-map CSV.
 *
 * # Safety
 * `file` must be a NUL-terminated string; `out` must be writable.
 */
enum PqStatus pq_eta_map_import(const char *file, struct PqEtaMap **out);

/**
 * Builds a map from axes and row-major values (`values[i*n_tm + j]`); NaN
 * marks a gap.
 *
 * # Safety
 * Arrays must hold the stated number of doubles; `out` must be writable.
 */
enum PqStatus pq_eta_map_new(const double *h_over_lambda,
                             size_t n_h,
                             const double *tm_over_h,
                             size_t n_tm,
                             const double *values,
                             struct PqEtaMap **out);

/**
 * Bilinear η at a point; with `clamp` false, points off the grid fail with
 * `OutOfDomain`.
 *
 * # Safety
 * `map` must be a live handle; `out` must be writable.
 */
enum PqStatus pq_eta_map_interp(const struct PqEtaMap *map,
                                double h_over_lambda,
                                double tm_over_h,
                                bool clamp,
                                double *out);

/**
 * # Safety
 * `map` must be null or a handle not yet freed.
 */
void pq_eta_map_free(struct PqEtaMap *map);

/**
 * Reads a loss-model TOML file.
 *
 * # Safety
 * `file` must be a NUL-terminated string; `out` must be writable.
 */
enum PqStatus pq_loss_model_load(const char *file, struct PqLossModel **out);

/**
 * Constant `Q_piezo` with an `f·Q` metal term.
 *
 * # Safety
 * `out` must be writable.
 */
enum PqStatus pq_loss_model_new(double q_piezo, double fq_hz, struct PqLossModel **out);

/**
 * # Safety
 * `model` must be null or a handle not yet freed.
 */
void pq_loss_model_free(struct PqLossModel *model);

/**
 * Predicted `Q_m` of a device (lengths in m) at `f_hz`.
 *
 * # Safety
 * Handles must be live; `out` must be writable.
 */
enum PqStatus pq_predict_qm(const struct PqEtaMap *map,
                            const struct PqLossModel *model,
                            double wavelength_m,
                            double film_thickness_m,
                            double metal_thickness_m,
                            double f_hz,
                            bool clamp,
                            double *out);

/**
 * Solves the unit cell and reports η and frequency (Hz) of the selected
 * mode.
 *
 * # Safety
 * Pointers must be valid; outputs must be writable.
 */
enum PqStatus pq_unit_cell_eta(const struct PqMaterial *piezo,
                               const struct PqMaterial *metal,
                               const struct PqUnitCell *cell,
                               double *eta_out,
                               double *frequency_out);

/**
 * Circuit admittance at `f_hz`.
 *
 * # Safety
 * `params` must be readable; outputs must be writable.
 */
enum PqStatus pq_mbvd_admittance(const struct PqMbvdParams *params,
                                 double f_hz,
                                 double *re_out,
                                 double *im_out);

/**
 * Fits the circuit to an admittance trace (`n` points, ascending frequency)
 * starting from the built-in initial guess.
 *
 * # Safety
 * Arrays must hold `n` doubles; `out` must be writable.
 */
enum PqStatus pq_mbvd_fit(const double *f_hz,
                          const double *y_re,
                          const double *y_im,
                          size_t n,
                          struct PqMbvdParams *out);

/**
 * Loaded `ω_s·Lm/(Rm+Rs)` and mechanical `ω_s·Lm/Rm` quality factors.
 *
 * # Safety
 * `params` must be readable; outputs must be writable.
 */
enum PqStatus pq_mbvd_deembed(const struct PqMbvdParams *params,
                              double *loaded_out,
                              double *mechanical_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PIEZOQ_H */
