#ifndef TRFUSE_H
#define TRFUSE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible entry point.
 */
typedef enum TrfStatus {
  TrfStatus_Ok = 0,
  TrfStatus_NullArgument = 1,
  TrfStatus_InvalidArgument = 2,
  TrfStatus_ShapeMismatch = 3,
  TrfStatus_IoError = 4,
  TrfStatus_FormatError = 5,
  TrfStatus_NumericalError = 6,
  TrfStatus_Panic = 7,
} TrfStatus;

/**
 * Opaque degradation model handle.
 */
typedef struct TrfModel TrfModel;

/**
 * Opaque dense tensor handle.
 */
typedef struct TrfTensor TrfTensor;

/**
 * Quality indices of a reconstruction against a reference.
 */
typedef struct TrfQuality {
  double psnr;
  double rmse;
  double ergas;
  double sam;
  double ssim;
} TrfQuality;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the most recent failure on this thread, or null when
 * no failure is recorded. The pointer stays valid until the next failing
 * call on the same thread.
 */
const char *trf_last_error_message(void);

/**
 * Builds a tensor from `order` extents and a densely packed payload
 * (first index slowest). The data is copied.
 *
 * # Safety
 * `dims` must point to `order` values, `data` to their product, and `out`
 * must be a valid destination pointer.
 */
enum TrfStatus trf_tensor_create(uintptr_t order,
                                 const uintptr_t *dims,
                                 const double *data,
                                 struct TrfTensor **out);

/**
 * Reads an HTEN file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid destination.
 */
enum TrfStatus trf_tensor_read(const char *path, struct TrfTensor **out);

/**
 * Writes an HTEN file (atomically).
 *
 * # Safety
 * `path` must be NUL-terminated; `t` must be a live tensor handle.
 */
enum TrfStatus trf_tensor_write(const char *path, const struct TrfTensor *t);

/**
 * Number of modes, or 0 for a null handle.
 *
 * # Safety
 * `t` must be a live tensor handle or null.
 */
uintptr_t trf_tensor_order(const struct TrfTensor *t);

/**
 * Copies the extents into `dims` (which must hold `trf_tensor_order` many).
 *
 * # Safety
 * `t` must be live; `dims` must point to enough writable space.
 */
enum TrfStatus trf_tensor_dims(const struct TrfTensor *t, uintptr_t *dims);

/**
 * Total element count.
 *
 * # Safety
 * `t` must be a live tensor handle or null.
 */
uintptr_t trf_tensor_len(const struct TrfTensor *t);

/**
 * Borrowed pointer to the payload in canonical order; valid while the
 * handle lives.
 *
 * # Safety
 * `t` must be a live tensor handle or null.
 */
const double *trf_tensor_data(const struct TrfTensor *t);

/**
 * Releases a tensor handle; null is ignored.
 *
 * # Safety
 * `t` must have come from this library and not be freed twice.
 */
void trf_tensor_free(struct TrfTensor *t);

/**
 * Builds a degradation model: averaging blur/downsample at `factor` with
 * `kernel_size` taps on an `m_full x n_full` grid, and `msi_bands` equal
 * contiguous band-average groups over `b_full` bands.
 *
 * # Safety
 * `out` must be a valid destination pointer.
 */
enum TrfStatus trf_model_build(uintptr_t m_full,
                               uintptr_t n_full,
                               uintptr_t b_full,
                               uintptr_t factor,
                               uintptr_t kernel_size,
                               uintptr_t msi_bands,
                               struct TrfModel **out);

/**
 * Releases a model handle; null is ignored.
 *
 * # Safety
 * `m` must have come from this library and not be freed twice.
 */
void trf_model_free(struct TrfModel *m);

/**
 * Applies the model: `out_y` gets the spatially degraded cube, `out_z` the
 * spectrally degraded one.
 *
 * # Safety
 * All handles must be live; output pointers must be valid destinations.
 */
enum TrfStatus trf_degrade(const struct TrfTensor *x,
                           const struct TrfModel *model,
                           struct TrfTensor **out_y,
                           struct TrfTensor **out_z);

/**
 * Adds seeded Gaussian noise at `snr_db` (pass INFINITY for a copy).
 *
 * # Safety
 * `t` must be live; `out` must be a valid destination pointer.
 */
enum TrfStatus trf_add_noise(const struct TrfTensor *t,
                             double snr_db,
                             uint64_t seed,
                             struct TrfTensor **out);

/**
 * Affinely rescales to `[0, max_value]`.
 *
 * # Safety
 * `t` must be live; `out` must be a valid destination pointer.
 */
enum TrfStatus trf_rescale(const struct TrfTensor *t, double max_value, struct TrfTensor **out);

/**
 * Fuses an (HSI, MSI) pair. `mode` is 0 for the plain coupled model, 1 for
 * the nuclear-norm regularized one. Passing 0 for `lambda`, `rho`, `mu0`,
 * `mu_max`, `cg_tol` or `cg_iters` selects the documented defaults.
 *
 * # Safety
 * All handles must be live; `out_x_hat` must be a valid destination.
 */
enum TrfStatus trf_fuse(const struct TrfTensor *y,
                        const struct TrfTensor *z,
                        const struct TrfModel *model,
                        int mode,
                        uintptr_t rank1,
                        uintptr_t rank2,
                        uintptr_t rank3,
                        uintptr_t iters,
                        uint64_t seed,
                        double lambda,
                        double rho,
                        double mu0,
                        double mu_max,
                        double cg_tol,
                        uintptr_t cg_iters,
                        struct TrfTensor **out_x_hat);

/**
 * Scores a reconstruction against a reference.
 *
 * # Safety
 * Both handles must be live; `out` must be a valid destination.
 */
enum TrfStatus trf_evaluate(const struct TrfTensor *x_hat,
                            const struct TrfTensor *x_ref,
                            double ratio,
                            double peak,
                            struct TrfQuality *out);

/**
 * Runs the library's fast invariant self-test.
 */
enum TrfStatus trf_check(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TRFUSE_H */
