#ifndef ROSDOS_H
#define ROSDOS_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/**
 * Result code of every fallible call.
 */
typedef enum RosdosStatus {
  ROSDOS_STATUS_OK = 0,
  ROSDOS_STATUS_NULL_POINTER = 1,
  ROSDOS_STATUS_INVALID_ARGUMENT = 2,
  ROSDOS_STATUS_NON_FINITE = 3,
  ROSDOS_STATUS_DIMENSION_MISMATCH = 4,
  ROSDOS_STATUS_NUMERICAL = 5,
  ROSDOS_STATUS_IO = 6,
  ROSDOS_STATUS_PANIC = 7,
} RosdosStatus;

/**
 * Step-1 metric of the denoiser.
 */
typedef enum RosdosMode {
  ROSDOS_MODE_ROSELAND = 0,
  ROSDOS_MODE_GLOBAL_SHRINK = 1,
  ROSDOS_MODE_SHRINK_ONLY = 2,
} RosdosMode;

typedef enum RosdosManifold {
  ROSDOS_MANIFOLD_M1 = 0,
  ROSDOS_MANIFOLD_M3 = 1,
} RosdosManifold;

typedef enum RosdosNoise {
  ROSDOS_NOISE_GAUSSIAN = 0,
  ROSDOS_NOISE_SEPARABLE = 1,
} RosdosNoise;

/**
 * Opaque matrix handle.
 */
typedef struct RosdosMatrix RosdosMatrix;

/**
 * Denoiser settings. Start from [`rosdos_config_default`].
 */
typedef struct RosdosConfig {
  enum RosdosMode mode;
  /**
   * Kernel bandwidth; zero or negative selects the median heuristic.
   */
  double bandwidth;
  /**
   * Landmark exponent: `round(n^gamma)` landmarks.
   */
  double gamma;
  size_t embed_dim;
  double diffusion_time;
  /**
   * `K`, candidate neighbors.
   */
  size_t global_neighbors;
  /**
   * `k`, neighbors whose median replaces each point.
   */
  size_t local_neighbors;
  size_t imputation_count;
  bool center;
  uint64_t seed;
} RosdosConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null if none. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *rosdos_last_error_message(void);

/**
 * Copies `rows * cols` row-major values into a new matrix.
 *
 * # Safety
 * `data` must point to `rows * cols` readable doubles and `out` to a
 * writable handle slot.
 */
enum RosdosStatus rosdos_matrix_new(size_t rows,
                                    size_t cols,
                                    const double *data,
                                    struct RosdosMatrix **out);

/**
 * Number of rows (features); 0 for a null handle.
 *
 * # Safety
 * `m` must be null or a live handle.
 */
size_t rosdos_matrix_rows(const struct RosdosMatrix *m);

/**
 * Number of columns (samples); 0 for a null handle.
 *
 * # Safety
 * `m` must be null or a live handle.
 */
size_t rosdos_matrix_cols(const struct RosdosMatrix *m);

/**
 * Writes the matrix row-major into `out`, which holds `len` doubles.
 *
 * # Safety
 * `m` must be a live handle and `out` must point to `len` writable doubles.
 */
enum RosdosStatus rosdos_matrix_copy(const struct RosdosMatrix *m, double *out, size_t len);

/**
 * Releases a matrix. Null is ignored.
 *
 * # Safety
 * `m` must be null or a handle not yet freed.
 */
void rosdos_matrix_free(struct RosdosMatrix *m);

/**
 * Default denoiser settings.
 */
struct RosdosConfig rosdos_config_default(void);

/**
 * Shrinks the singular values of `x` with `k` imputed noise eigenvalues.
 * `effective_rank` may be null.
 *
 * # Safety
 * `x` must be a live handle, `out` a writable handle slot and
 * `effective_rank` null or writable.
 */
enum RosdosStatus rosdos_eoptshrink(const struct RosdosMatrix *x,
                                    size_t k,
                                    bool center,
                                    struct RosdosMatrix **out,
                                    size_t *effective_rank);

/**
 * Denoises the columns of `x`. `config` may be null for the defaults.
 *
 * # Safety
 * `x` must be a live handle, `config` null or valid, `out` writable.
 */
enum RosdosStatus rosdos_denoise(const struct RosdosMatrix *x,
                                 const struct RosdosConfig *config,
                                 struct RosdosMatrix **out);

/**
 * Samples a noisy synthetic data set exactly as `rosdos simulate` does for
 * the same arguments. `msnr_db` may be null.
 *
 * # Safety
 * `clean` and `noisy` must be writable handle slots; `msnr_db` null or
 * writable.
 */
enum RosdosStatus rosdos_simulate(enum RosdosManifold manifold,
                                  enum RosdosNoise noise,
                                  size_t p,
                                  size_t n,
                                  double alpha,
                                  uint64_t seed,
                                  struct RosdosMatrix **clean,
                                  struct RosdosMatrix **noisy,
                                  double *msnr_db);

/**
 * Per-sample normalized error of `estimate` against `clean`, written to
 * `out` (`len` must equal the sample count). `median` may be null.
 *
 * # Safety
 * Handles must be live, `out` must point to `len` writable doubles and
 * `median` must be null or writable.
 */
enum RosdosStatus rosdos_nrmse(const struct RosdosMatrix *clean,
                               const struct RosdosMatrix *estimate,
                               double *out,
                               size_t len,
                               double *median);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ROSDOS_H */
