#ifndef TRIPRISM_H
#define TRIPRISM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>

/**
 * Result code of every fallible call.
 */
typedef enum {
  TP_STATUS_OK = 0,
  TP_STATUS_NULL_POINTER = 1,
  TP_STATUS_INVALID_ARGUMENT = 2,
  TP_STATUS_INVALID_IMAGE = 3,
  TP_STATUS_IO = 4,
  TP_STATUS_FORMAT = 5,
  TP_STATUS_SCALE = 6,
  TP_STATUS_INDEX = 7,
  TP_STATUS_NUMERIC = 8,
  TP_STATUS_BUFFER_TOO_SMALL = 9,
  TP_STATUS_PANIC = 10,
  TP_STATUS_OTHER = 11,
} TpStatus;

/**
 * Grayscale image handle.
 */
typedef struct TpImage TpImage;

/**
 * Fitted Karhunen-Loève model handle.
 */
typedef struct TpKlModel TpKlModel;

/**
 * Message for the last failed call on this thread, or NULL. The pointer is
 * valid until the next `tp_*` call on the same thread.
 */
const char *tp_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *tp_version(void);

/**
 * Creates an image from row-major 8-bit gray levels.
 *
 * # Safety
 * `pixels` must point to `width * height` readable bytes; `out` must be
 * writable.
 */
TpStatus tp_image_from_gray8(const uint8_t *pixels, size_t width, size_t height, TpImage **out);

/**
 * Creates an image from row-major intensities in `[0, 255]`.
 *
 * # Safety
 * `pixels` must point to `width * height` readable doubles; `out` must be
 * writable.
 */
TpStatus tp_image_from_f64(const double *pixels, size_t width, size_t height, TpImage **out);

/**
 * Loads a PGM or PNG file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
TpStatus tp_image_load(const char *path, TpImage **out);

/**
 * Releases an image. NULL is ignored.
 *
 * # Safety
 * `img` must come from a `tp_image_*` constructor and not be freed twice.
 */
void tp_image_free(TpImage *img);

/**
 * # Safety
 * `img` must be a live handle and `width`/`height` writable.
 */
TpStatus tp_image_size(const TpImage *img, size_t *width, size_t *height);

/**
 * Prism area of the cell whose top-left corner is at row `i`, column `j`.
 *
 * # Safety
 * `img` must be a live handle and `out` writable.
 */
TpStatus tp_cell_area(const TpImage *img, size_t i, size_t j, size_t eps, double *out);

/**
 * `S^α(ε)`: the sum of cell areas raised to `alpha` over the grid.
 *
 * # Safety
 * `img` must be a live handle and `out` writable.
 */
TpStatus tp_weighted_area_sum(const TpImage *img, size_t eps, double alpha, double *out);

/**
 * Writes the default power-of-two scales into `scales`. `count` receives
 * the number of scales even when `cap` is too small.
 *
 * # Safety
 * `img` must be a live handle; `scales` must hold `cap` entries; `count`
 * must be writable.
 */
TpStatus tp_default_scales(const TpImage *img, size_t *scales, size_t cap, size_t *count);

/**
 * Descriptor vector `ln S^α(ε)`, α-major then ε, into `out`
 * (`n_alphas * n_scales` values). An empty scale list selects the default
 * schedule; query its length with `tp_default_scales`.
 *
 * # Safety
 * Array arguments must hold the stated number of elements.
 */
TpStatus tp_descriptors(const TpImage *img,
                        const size_t *scales,
                        size_t n_scales,
                        const double *alphas,
                        size_t n_alphas,
                        double *out,
                        size_t out_len);

/**
 * Triangular prism fractal dimension. An empty scale list selects the
 * powers of two leaving at least 8 cells per axis.
 *
 * # Safety
 * `scales` must hold `n_scales` entries; `out` must be writable.
 */
TpStatus tp_fractal_dimension(const TpImage *img,
                              const size_t *scales,
                              size_t n_scales,
                              double *out);

/**
 * Fits a KL model to `rows × cols` row-major samples.
 *
 * # Safety
 * `data` must hold `rows * cols` doubles; `out` must be writable.
 */
TpStatus tp_kl_fit(const double *data, size_t rows, size_t cols, TpKlModel **out);

/**
 * Releases a KL model. NULL is ignored.
 *
 * # Safety
 * `model` must come from `tp_kl_fit` and not be freed twice.
 */
void tp_kl_free(TpKlModel *model);

/**
 * Eigenvalues in descending order (`dim` values).
 *
 * # Safety
 * `model` must be live; `out` must hold `out_len` doubles.
 */
TpStatus tp_kl_eigenvalues(const TpKlModel *model, double *out, size_t out_len);

/**
 * Centers and projects `rows × cols` samples onto the first `k` components,
 * writing `rows × k` row-major values.
 *
 * # Safety
 * `data` must hold `rows * cols` doubles and `out` `out_len` doubles.
 */
TpStatus tp_kl_project(const TpKlModel *model,
                       const double *data,
                       size_t rows,
                       size_t cols,
                       size_t k,
                       double *out,
                       size_t out_len);

#endif  /* TRIPRISM_H */
