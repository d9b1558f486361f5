#ifndef WQ_H
#define WQ_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes shared by all fallible functions.
typedef enum WqStatus {
  WQ_STATUS_OK = 0,
  WQ_STATUS_NULL_POINTER = 1,
  WQ_STATUS_INVALID_ARGUMENT = 2,
  WQ_STATUS_IO = 3,
  WQ_STATUS_FORMAT = 4,
  WQ_STATUS_MODEL = 5,
  WQ_STATUS_METRIC = 6,
  WQ_STATUS_OTHER = 7,
  WQ_STATUS_PANIC = 8,
} WqStatus;

// A fitted model.
typedef struct WqModel WqModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the most recent failure on this thread, or null. The pointer
// stays valid until the next call into this library from the same thread.
const char *wq_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *wq_version(void);

// Great-circle distance in kilometres between two points in degrees.
double wq_haversine_km(double lat1, double lon1, double lat2, double lon2);

// Root-mean-square error of `n` predictions against observations.
//
// # Safety
// `pred` and `obs` must point to `n` readable doubles; `out` must be writable.
enum WqStatus wq_rmse(const double *pred, const double *obs, size_t n, double *out);

// Coefficient of determination of `n` predictions against observations.
//
// # Safety
// Same contract as [`wq_rmse`].
enum WqStatus wq_r_squared(const double *pred, const double *obs, size_t n, double *out);

// Fits a model on a row-major `n_rows` x `n_cols` matrix.
//
// `kind` is one of `lm`, `rf`, `gb`, `gp`, `svm`, `gam`. `params` may be
// null or a comma-separated list such as `"n_rounds=200,learning_rate=0.05"`.
//
// # Safety
// `x` must hold `n_rows * n_cols` doubles, `y` must hold `n_rows`, the
// strings must be NUL-terminated and `out` must be writable.
enum WqStatus wq_model_fit(const char *kind,
                           const char *params,
                           const double *x,
                           size_t n_rows,
                           size_t n_cols,
                           const double *y,
                           uint64_t seed,
                           struct WqModel **out);

// Predicts `n_rows` rows laid out like the training matrix into `out`.
//
// # Safety
// `model` must come from this library; `x` must hold `n_rows * n_cols`
// doubles and `out` must have room for `n_rows`.
enum WqStatus wq_model_predict(const struct WqModel *model,
                               const double *x,
                               size_t n_rows,
                               size_t n_cols,
                               double *out);

// Number of input columns the model expects, or 0 for a null handle.
//
// # Safety
// `model` must be null or come from this library.
size_t wq_model_n_features(const struct WqModel *model);

// Training RMSE recorded at fit time, or NaN for a null handle.
//
// # Safety
// `model` must be null or come from this library.
double wq_model_train_rmse(const struct WqModel *model);

// Writes the model as a JSON artifact readable by [`wq_model_load`] and
// by the `wq` command-line tool.
//
// # Safety
// `model` must come from this library and `path` must be NUL-terminated.
enum WqStatus wq_model_save(const struct WqModel *model, const char *path);

// Loads a model artifact, including those written by `wq train`.
//
// # Safety
// `path` must be NUL-terminated and `out` writable.
enum WqStatus wq_model_load(const char *path, struct WqModel **out);

// Releases a model handle. Null is ignored.
//
// # Safety
// `model` must be null or a handle not yet freed.
void wq_model_free(struct WqModel *model);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WQ_H */
