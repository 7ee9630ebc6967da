/* Minimal C consumer of the trfuse ABI: build a cube, degrade it, fuse the
 * pair back, and print the quality scores.
 *
 * Build (from the workspace root, after `cargo build --release`):
 *   cc crates/trfuse-ffi/examples/capi_demo.c \
 *      -Icrates/trfuse-ffi/include \
 *      target/release/libtrfuse_ffi.a -lm -o capi_demo
 */
#include <math.h>
#include <stdio.h>
#include <stdlib.h>

#include "trfuse.h"

int main(void) {
    const size_t dims[3] = {16, 16, 6};
    const size_t n = dims[0] * dims[1] * dims[2];
    double *data = malloc(n * sizeof(double));
    size_t idx = 0;
    for (size_t i = 0; i < dims[0]; ++i)
        for (size_t j = 0; j < dims[1]; ++j)
            for (size_t k = 0; k < dims[2]; ++k)
                data[idx++] = sin(i / 4.0) * cos(j / 5.0) + 0.3 * k;

    TrfTensor *hr = NULL, *scaled = NULL, *y0 = NULL, *z0 = NULL;
    TrfTensor *y = NULL, *z = NULL, *x_hat = NULL;
    TrfModel *model = NULL;
    TrfQuality q;

    if (trf_tensor_create(3, dims, data, &hr) != TrfStatus_Ok) goto fail;
    if (trf_rescale(hr, 255.0, &scaled) != TrfStatus_Ok) goto fail;
    if (trf_model_build(16, 16, 6, 2, 2, 2, &model) != TrfStatus_Ok) goto fail;
    if (trf_degrade(scaled, model, &y0, &z0) != TrfStatus_Ok) goto fail;
    if (trf_add_noise(y0, 30.0, 7, &y) != TrfStatus_Ok) goto fail;
    if (trf_add_noise(z0, 30.0, 8, &z) != TrfStatus_Ok) goto fail;
    if (trf_fuse(y, z, model, 1, 2, 4, 2, 25, 0,
                 0.0, 0.0, 0.0, 0.0, 0.0, 0, &x_hat) != TrfStatus_Ok) goto fail;
    if (trf_evaluate(x_hat, scaled, 2.0, 255.0, &q) != TrfStatus_Ok) goto fail;

    printf("psnr %.2f dB, rmse %.4f, ergas %.4f, sam %.4f deg, ssim %.4f\n",
           q.psnr, q.rmse, q.ergas, q.sam, q.ssim);

    trf_tensor_free(hr); trf_tensor_free(scaled);
    trf_tensor_free(y0); trf_tensor_free(z0);
    trf_tensor_free(y); trf_tensor_free(z); trf_tensor_free(x_hat);
    trf_model_free(model);
    free(data);
    return 0;

fail:
    fprintf(stderr, "trfuse error: %s\n", trf_last_error_message());
    free(data);
    return 1;
}
