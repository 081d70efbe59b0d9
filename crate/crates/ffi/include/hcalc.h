#ifndef HCALC_H
#define HCALC_H

#include <stddef.h>
#include <stdint.h>

// Status codes returned by every fallible function.
typedef enum HcalcStatus {
  HCALC_STATUS_OK = 0,
  HCALC_STATUS_NULL_POINTER = 1,
  HCALC_STATUS_INVALID_ARGUMENT = 2,
  HCALC_STATUS_DIMENSION_MISMATCH = 3,
  HCALC_STATUS_UNDEFINED = 4,
  HCALC_STATUS_HYPOTHESIS = 5,
  HCALC_STATUS_CONFIG = 6,
  HCALC_STATUS_NUMERICAL = 7,
  HCALC_STATUS_PANIC = 8,
} HcalcStatus;

// Tube cover of rational lines owned by the library.
typedef struct HcalcCover HcalcCover;

// Horizontal path owned by the library.
typedef struct HcalcPath HcalcPath;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer is
// valid until the next failing call on the same thread.
const char *hcalc_last_error(void);

// Library version as a static NUL-terminated string.
const char *hcalc_version(void);

// Group product `x * y` in `H^n`, written to `out` (`2n + 1` doubles).
//
// # Safety
// `x`, `y` and `out` must point to `2n + 1` doubles.
enum HcalcStatus hcalc_group_mul(size_t n, const double *x, const double *y, double *out);

// Certified bracket `lower <= d(x, y) <= upper` of the Carnot-Caratheodory
// distance.
//
// # Safety
// `x` and `y` must point to `2n + 1` doubles; `lower` and `upper` must be
// writable.
enum HcalcStatus hcalc_distance_bracket(size_t n,
                                        const double *x,
                                        const double *y,
                                        double *lower,
                                        double *upper);

// Builds the curve `gamma_y` from the origin to `y` on `[0, 1]`.
//
// # Safety
// `y` must point to `2n + 1` doubles and `out` must be writable. The
// returned handle is released with [`hcalc_path_free`].
enum HcalcStatus hcalc_gamma_y(size_t n, const double *y, struct HcalcPath **out);

// Group dimension `n` of the path, or 0 for a null handle.
//
// # Safety
// `path` must be null or a live handle.
size_t hcalc_path_dim(const struct HcalcPath *path);

// Parameter domain `[start, end]` of the path.
//
// # Safety
// `path` must be a live handle; `start` and `end` must be writable.
enum HcalcStatus hcalc_path_domain(const struct HcalcPath *path, double *start, double *end);

// Point of the path at parameter `t`, clamped to the domain.
//
// # Safety
// `path` must be a live handle and `out` must hold `2n + 1` doubles.
enum HcalcStatus hcalc_path_eval(const struct HcalcPath *path, double t, double *out);

// Lipschitz constant of the path for the Carnot-Caratheodory distance.
//
// # Safety
// `path` must be a live handle and `out` must be writable.
enum HcalcStatus hcalc_path_lipschitz(const struct HcalcPath *path, double *out);

// Releases a path handle; null is ignored.
//
// # Safety
// `path` must be null or a handle not yet released.
void hcalc_path_free(struct HcalcPath *path);

// Builds the nested tube cover of rational lines up to `height`.
//
// # Safety
// `out` must be writable. The returned handle is released with
// [`hcalc_cover_free`].
enum HcalcStatus hcalc_cover_build(size_t n,
                                   uint64_t height,
                                   size_t depth,
                                   double clip,
                                   struct HcalcCover **out);

// Number of enumerated lines in the cover, or 0 for a null handle.
//
// # Safety
// `cover` must be null or a live handle.
size_t hcalc_cover_line_count(const struct HcalcCover *cover);

// Tube radius of line `index` at `level` (levels start at 1).
//
// # Safety
// `cover` must be a live handle and `out` must be writable.
enum HcalcStatus hcalc_cover_radius(const struct HcalcCover *cover,
                                    size_t level,
                                    size_t index,
                                    double *out);

// Analytic volume bound of the level-`level` open set.
//
// # Safety
// `cover` must be a live handle and `out` must be writable.
enum HcalcStatus hcalc_cover_volume_bound(const struct HcalcCover *cover,
                                          size_t level,
                                          double *out);

// Conservative membership of `x` in the level-`level` open set: writes 1
// when the point is certified inside and 0 otherwise.
//
// # Safety
// `cover` must be a live handle, `x` must point to `2n + 1` doubles and
// `inside` must be writable.
enum HcalcStatus hcalc_cover_contains(const struct HcalcCover *cover,
                                      const double *x,
                                      size_t level,
                                      int32_t *inside);

// Releases a cover handle; null is ignored.
//
// # Safety
// `cover` must be null or a handle not yet released.
void hcalc_cover_free(struct HcalcCover *cover);

// Runs the maximizer on a JSON configuration and returns the trajectory
// as JSON lines, one iteration per line.
//
// # Safety
// `config_json` must be a NUL-terminated UTF-8 string and `out` must be
// writable. The returned string is released with [`hcalc_string_free`].
enum HcalcStatus hcalc_maximize_json(const char *config_json, char **out);

// Releases a string returned by the library; null is ignored.
//
// # Safety
// `s` must be null or a string from this library not yet released.
void hcalc_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HCALC_H */
