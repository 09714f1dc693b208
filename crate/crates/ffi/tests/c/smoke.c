#include <stdio.h>
#include <stdlib.h>
#include "rosdos.h"

#define CHECK(call)                                                        \
    do {                                                                   \
        RosdosStatus s_ = (call);                                          \
        if (s_ != ROSDOS_STATUS_OK) {                                      \
            fprintf(stderr, "%s -> %d: %s\n", #call, (int)s_,             \
                    rosdos_last_error_message());                          \
            return 1;                                                      \
        }                                                                  \
    } while (0)

int main(void) {
    RosdosMatrix *clean = NULL, *noisy = NULL, *out = NULL;
    double msnr = 0.0, median = -1.0;
    CHECK(rosdos_simulate(ROSDOS_MANIFOLD_M1, ROSDOS_NOISE_GAUSSIAN, 40, 300, 0.5, 3,
                          &clean, &noisy, &msnr));
    RosdosConfig cfg = rosdos_config_default();
    cfg.mode = ROSDOS_MODE_SHRINK_ONLY;
    cfg.global_neighbors = 30;
    cfg.local_neighbors = 1;
    CHECK(rosdos_denoise(noisy, &cfg, &out));
    size_t n = rosdos_matrix_cols(out);
    double *errs = malloc(n * sizeof(double));
    CHECK(rosdos_nrmse(clean, out, errs, n, &median));

    /* k = 1 returns the input unchanged. */
    size_t len = rosdos_matrix_rows(noisy) * n;
    double *a = malloc(len * sizeof(double));
    double *b = malloc(len * sizeof(double));
    CHECK(rosdos_matrix_copy(noisy, a, len));
    CHECK(rosdos_matrix_copy(out, b, len));
    for (size_t i = 0; i < len; i++) {
        if (a[i] != b[i]) {
            fprintf(stderr, "mismatch at %zu\n", i);
            return 1;
        }
    }

    cfg.local_neighbors = 0;
    RosdosMatrix *bad = NULL;
    if (rosdos_denoise(noisy, &cfg, &bad) != ROSDOS_STATUS_INVALID_ARGUMENT) return 1;

    printf("n=%zu msnr=%.3f median=%.6f\n", n, msnr, median);
    free(a);
    free(b);
    free(errs);
    rosdos_matrix_free(clean);
    rosdos_matrix_free(noisy);
    rosdos_matrix_free(out);
    return 0;
}
