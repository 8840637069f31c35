#ifndef WFLAB_H
#define WFLAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum WflabStatus {
  WFLAB_STATUS_OK = 0,
  WFLAB_STATUS_NULL_POINTER = 1,
  WFLAB_STATUS_INVALID_UTF8 = 2,
  WFLAB_STATUS_PARSE = 3,
  WFLAB_STATUS_INVALID_CONFIG = 4,
  WFLAB_STATUS_INSUFFICIENT_DATA = 5,
  WFLAB_STATUS_INVALID_INPUT = 6,
  WFLAB_STATUS_SHAPE_MISMATCH = 7,
  WFLAB_STATUS_SINGLE_CLASS = 8,
  WFLAB_STATUS_IO = 9,
  WFLAB_STATUS_INTERNAL = 10,
  WFLAB_STATUS_PANIC = 11,
} WflabStatus;

/**
 * Fitted gradient-boosting classifier.
 */
typedef struct WflabGbm WflabGbm;

/**
 * Fitted LSTM classifier.
 */
typedef struct WflabLstm WflabLstm;

/**
 * Assembled trading sessions.
 */
typedef struct WflabSessions WflabSessions;

/**
 * Confusion counts and rates. Mean probabilities are NaN when the class
 * is absent.
 */
typedef struct WflabMetrics {
  size_t n;
  size_t tp;
  size_t fp;
  size_t tn;
  size_t fn_;
  double accuracy;
  double precision;
  double recall;
  double f1;
  double mean_prob_actual_pos;
  double mean_prob_actual_neg;
} WflabMetrics;

typedef struct WflabGbmParams {
  size_t max_leaf_nodes;
  size_t min_samples_leaf;
  double learning_rate;
  size_t max_iter;
  double l2_regularization;
  uint64_t seed;
} WflabGbmParams;

typedef struct WflabLstmParams {
  size_t hidden_units;
  double dropout_rate;
  double learning_rate;
  size_t batch_size;
  size_t max_epochs;
  size_t early_stop_patience;
  uint64_t seed;
} WflabLstmParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static nul-terminated string.
 */
const char *wflab_version(void);

/**
 * Message for the last failed call on this thread, or null. Valid until
 * the next call into the library on the same thread.
 */
const char *wflab_last_error(void);

/**
 * # Safety
 * `s` must be null or a string returned by this library.
 */
void wflab_string_free(char *s);

/**
 * Parses a bar file and assembles regular-hours sessions.
 *
 * # Safety
 * `path` must be a nul-terminated string; `out` must be writable.
 */
enum WflabStatus wflab_sessions_load(const char *path, struct WflabSessions **out);

/**
 * Generates synthetic sessions with default settings except those given.
 *
 * # Safety
 * `out` must be writable.
 */
enum WflabStatus wflab_sessions_synthetic(size_t n_days,
                                          double planted_effect,
                                          uint64_t seed,
                                          struct WflabSessions **out);

/**
 * # Safety
 * `s` must be a live handle; `n_sessions` and `n_skipped` may be null.
 */
enum WflabStatus wflab_sessions_counts(const struct WflabSessions *s,
                                       size_t *n_sessions,
                                       size_t *n_skipped);

/**
 * Writes session `index`'s date as `YYYYMMDD`.
 *
 * # Safety
 * `s` must be a live handle; `out` must be writable.
 */
enum WflabStatus wflab_sessions_date(const struct WflabSessions *s, size_t index, uint32_t *out);

/**
 * # Safety
 * `s` must be null or a handle from this library, not used afterwards.
 */
void wflab_sessions_free(struct WflabSessions *s);

/**
 * Expanding-window decile tokens. NaN inputs are missing. Writes -1 where
 * no token is emitted.
 *
 * # Safety
 * `values` and `tokens` must each hold `n` elements.
 */
enum WflabStatus wflab_tokenize(const double *values,
                                size_t n,
                                size_t n_bins,
                                size_t min_history,
                                int32_t *tokens);

/**
 * # Safety
 * `probs` and `labels` must hold `n` elements; `out` must be writable.
 */
enum WflabStatus wflab_metrics(const double *probs,
                               const uint8_t *labels_ptr,
                               size_t n,
                               double threshold,
                               struct WflabMetrics *out);

/**
 * Default GBM hyperparameters.
 */
struct WflabGbmParams wflab_gbm_default_params(void);

/**
 * Fits on a row-major `n_rows × n_cols` matrix. `params` may be null for
 * the defaults.
 *
 * # Safety
 * `x` must hold `n_rows * n_cols` values, `y` `n_rows` labels; `out` must be writable.
 */
enum WflabStatus wflab_gbm_fit(const double *x,
                               size_t n_rows,
                               size_t n_cols,
                               const uint8_t *y,
                               const struct WflabGbmParams *params,
                               struct WflabGbm **out);

/**
 * # Safety
 * `m` must be a live handle; `x` must hold `n_rows * n_cols` values and
 * `probs` `n_rows`.
 */
enum WflabStatus wflab_gbm_predict_proba(const struct WflabGbm *m,
                                         const double *x,
                                         size_t n_rows,
                                         size_t n_cols,
                                         double *probs);

/**
 * Serializes the model; free the result with [`wflab_string_free`].
 *
 * # Safety
 * `m` must be a live handle; `out` must be writable.
 */
enum WflabStatus wflab_gbm_to_json(const struct WflabGbm *m, char **out);

/**
 * # Safety
 * `json` must be a nul-terminated string; `out` must be writable.
 */
enum WflabStatus wflab_gbm_from_json(const char *json, struct WflabGbm **out);

/**
 * # Safety
 * `m` must be null or a handle from this library, not used afterwards.
 */
void wflab_gbm_free(struct WflabGbm *m);

/**
 * Default LSTM hyperparameters.
 */
struct WflabLstmParams wflab_lstm_default_params(void);

/**
 * Fits on `n × seq_len` scalar sequences stored row-major.
 *
 * # Safety
 * `seqs` must hold `n * seq_len` values and `y` `n` labels; `out` must be writable.
 */
enum WflabStatus wflab_lstm_fit(const double *seqs,
                                size_t n,
                                size_t seq_len,
                                const uint8_t *y,
                                const struct WflabLstmParams *params,
                                struct WflabLstm **out);

/**
 * # Safety
 * `m` must be a live handle; `seqs` must hold `n * seq_len` values and `probs` `n`.
 */
enum WflabStatus wflab_lstm_predict_proba(const struct WflabLstm *m,
                                          const double *seqs,
                                          size_t n,
                                          size_t seq_len,
                                          double *probs);

/**
 * # Safety
 * `m` must be a live handle; `out` must be writable.
 */
enum WflabStatus wflab_lstm_to_json(const struct WflabLstm *m, char **out);

/**
 * # Safety
 * `json` must be a nul-terminated string; `out` must be writable.
 */
enum WflabStatus wflab_lstm_from_json(const char *json, struct WflabLstm **out);

/**
 * # Safety
 * `m` must be null or a handle from this library, not used afterwards.
 */
void wflab_lstm_free(struct WflabLstm *m);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WFLAB_H */
