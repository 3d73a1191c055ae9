#ifndef CENTEROUT_H
#define CENTEROUT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CenteroutStatus {
  CENTEROUT_STATUS_OK = 0,
  CENTEROUT_STATUS_INVALID_ARGUMENT = 1,
  CENTEROUT_STATUS_NUMERIC = 2,
  CENTEROUT_STATUS_CONVERGENCE_FAILURE = 3,
  CENTEROUT_STATUS_OUT_OF_DOMAIN = 4,
  CENTEROUT_STATUS_PARSE = 5,
  CENTEROUT_STATUS_UNSUPPORTED = 6,
  CENTEROUT_STATUS_IO = 7,
  CENTEROUT_STATUS_NULL_POINTER = 8,
  CENTEROUT_STATUS_BUFFER_TOO_SMALL = 9,
  CENTEROUT_STATUS_PANIC = 10,
} CenteroutStatus;

// Synthetic data generator.
typedef struct CenteroutGenerator CenteroutGenerator;

// Sample and fitted center-outward maps.
typedef struct CenteroutModel CenteroutModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *centerout_version(void);

// Message of the last failed call on this thread, or NULL. Valid until the
// next call into the library on the same thread.
const char *centerout_last_error(void);

// Fits the maps of `n` points in dimension `d` by exact transport to the
// spherical uniform grid. Pass `n_radii = n_directions = 0` for the default
// grid shape.
//
// # Safety
// `points` must hold `n * d` doubles and `out` must be writable.
enum CenteroutStatus centerout_model_fit(const double *points,
                                         size_t n,
                                         size_t d,
                                         size_t n_radii,
                                         size_t n_directions,
                                         uint64_t seed,
                                         struct CenteroutModel **out);

// # Safety
// `model` must come from [`centerout_model_fit`] and not be used afterwards.
void centerout_model_free(struct CenteroutModel *model);

// Dimension of the model, 0 for NULL.
//
// # Safety
// `model` must be NULL or a live handle.
size_t centerout_model_dim(const struct CenteroutModel *model);

// Number of sample points, 0 for NULL.
//
// # Safety
// `model` must be NULL or a live handle.
size_t centerout_model_len(const struct CenteroutModel *model);

// Grid shape: shells, directions per shell and origin copies. Any output
// pointer may be NULL.
//
// # Safety
// `model` must be a live handle.
enum CenteroutStatus centerout_model_grid_shape(const struct CenteroutModel *model,
                                                size_t *n_radii,
                                                size_t *n_directions,
                                                size_t *origin_copies);

// Empirical distribution function at `x` (`d` doubles) into `out` (`d`
// doubles). `achievers`, if not NULL, receives the number of active atoms;
// more than one means the value is an average.
//
// # Safety
// Buffers must have `d` doubles; `model` must be a live handle.
enum CenteroutStatus centerout_model_forward(const struct CenteroutModel *model,
                                             const double *x,
                                             double *out,
                                             size_t *achievers);

// Empirical quantile function at `u`, `|u| < 1`.
//
// # Safety
// Buffers must have `d` doubles; `model` must be a live handle.
enum CenteroutStatus centerout_model_quantile(const struct CenteroutModel *model,
                                              const double *u,
                                              double *out,
                                              size_t *achievers);

// Ranks (`n` doubles) and signs (`n * d` doubles) of the sample points in
// input order. Points sent to the origin get rank 0 and a zero sign.
//
// # Safety
// `ranks` must hold `n` doubles and `signs` `n * d`; either may be NULL.
enum CenteroutStatus centerout_model_ranks_signs(const struct CenteroutModel *model,
                                                 double *ranks,
                                                 double *signs);

// Quantile contour of level `r` along `n_dirs` directions. Writes the
// number of points to `count` and the points to `out`, which holds
// `capacity` doubles. In dimension 1 the contour has two points.
//
// # Safety
// `out` must hold `capacity` doubles; `model` must be a live handle.
enum CenteroutStatus centerout_model_contour(const struct CenteroutModel *model,
                                             double r,
                                             size_t n_dirs,
                                             double *out,
                                             size_t capacity,
                                             size_t *count);

// Builds a generator from its JSON spec, e.g.
// `{"kind": "uniform-box", "lower": [0, 0], "upper": [1, 1]}`.
//
// # Safety
// `spec_json` must be a NUL-terminated string and `out` writable.
enum CenteroutStatus centerout_generator_new(const char *spec_json,
                                             struct CenteroutGenerator **out);

// # Safety
// `generator` must come from [`centerout_generator_new`] and not be used
// afterwards.
void centerout_generator_free(struct CenteroutGenerator *generator);

// Dimension of the generated points, 0 for NULL.
//
// # Safety
// `generator` must be NULL or a live handle.
size_t centerout_generator_dim(const struct CenteroutGenerator *generator);

// Draws `n` points into `out` (`n * d` doubles), deterministically in `seed`.
//
// # Safety
// `out` must hold `n * d` doubles; `generator` must be a live handle.
enum CenteroutStatus centerout_generator_sample(const struct CenteroutGenerator *generator,
                                                size_t n,
                                                uint64_t seed,
                                                double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CENTEROUT_H */
