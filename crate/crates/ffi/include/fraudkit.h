#ifndef FRAUDKIT_H
#define FRAUDKIT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  FK_STATUS_OK = 0,
  FK_STATUS_NULL_POINTER = 1,
  FK_STATUS_INVALID_ARGUMENT = 2,
  /**
   * Malformed or inconsistent input data (duplicate node, unknown
   * endpoint, parse failure, single-class labels...).
   */
  FK_STATUS_DATA_ERROR = 3,
  FK_STATUS_SCHEMA_MISMATCH = 4,
  FK_STATUS_IO = 5,
  FK_STATUS_BUFFER_TOO_SMALL = 6,
  FK_STATUS_PANIC = 7,
} FkStatus;

typedef enum {
  /**
   * Each node sees only the graph up to its own timestep.
   */
  FK_EXTRACT_MODE_CAUSAL = 0,
  /**
   * Every node sees the whole graph (leaky baseline).
   */
  FK_EXTRACT_MODE_FULL = 1,
} FkExtractMode;

/**
 * Opaque temporal transaction graph.
 */
typedef struct FkGraph FkGraph;

/**
 * Opaque feature matrix (row-major, named columns, node-id rows).
 */
typedef struct FkMatrix FkMatrix;

/**
 * Opaque trained model as written by `fraudkit train`.
 */
typedef struct FkModel FkModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failed call on this thread, or NULL after a
 * successful call. Valid until the next fraudkit call on the same thread.
 */
const char *fk_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *fk_version(void);

FkGraph *fk_graph_new(void);

/**
 * # Safety
 * `graph` must be NULL or a handle from [`fk_graph_new`] not yet freed.
 */
void fk_graph_free(FkGraph *graph);

/**
 * Adds transaction `id` observed at `timestep` (>= 1).
 *
 * # Safety
 * `graph` must be a live handle from [`fk_graph_new`].
 */
FkStatus fk_graph_add_node(FkGraph *graph, uint64_t id, uint32_t timestep);

/**
 * Adds a directed edge between two existing nodes. Duplicates collapse and
 * self-loops are dropped.
 *
 * # Safety
 * `graph` must be a live handle from [`fk_graph_new`].
 */
FkStatus fk_graph_add_edge(FkGraph *graph, uint64_t src, uint64_t dst);

/**
 * # Safety
 * `graph` must be a live handle; the out pointers must be writable.
 */
FkStatus fk_graph_counts(const FkGraph *graph, size_t *nodes, size_t *edges);

/**
 * Computes the descriptor matrix for every node. Rows follow node
 * insertion order. With `log1p` set the heavy-tailed descriptors gain
 * `log1p_*` companion columns.
 *
 * # Safety
 * `graph` must be a live handle; `out` must be writable. On success the
 * caller owns `*out` and frees it with [`fk_matrix_free`].
 */
FkStatus fk_extract(const FkGraph *graph, FkExtractMode mode, bool log1p, FkMatrix **out);

/**
 * Builds a matrix from row-major `values` (`n_rows * n_cols` entries),
 * row ids and column names.
 *
 * # Safety
 * Array arguments must hold the stated number of elements; every name
 * must be a NUL-terminated UTF-8 string; `out` must be writable.
 */
FkStatus fk_matrix_new(const uint64_t *row_ids,
                       size_t n_rows,
                       const char *const *column_names,
                       size_t n_cols,
                       const double *values,
                       FkMatrix **out);

/**
 * # Safety
 * `matrix` must be NULL or a handle returned by this library not yet freed.
 */
void fk_matrix_free(FkMatrix *matrix);

/**
 * # Safety
 * `matrix` must be a live handle; the out pointers must be writable.
 */
FkStatus fk_matrix_shape(const FkMatrix *matrix, size_t *rows, size_t *cols);

/**
 * Name of column `index`, or NULL when out of range. The string lives as
 * long as the matrix.
 *
 * # Safety
 * `matrix` must be NULL or a live handle.
 */
const char *fk_matrix_column_name(const FkMatrix *matrix, size_t index);

/**
 * Copies the row-major values into `out`, which must hold at least
 * `rows * cols` doubles.
 *
 * # Safety
 * `matrix` must be a live handle; `out` must be writable for `len` doubles.
 */
FkStatus fk_matrix_values(const FkMatrix *matrix, double *out, size_t len);

/**
 * Copies the row ids into `out`, which must hold at least `rows` entries.
 *
 * # Safety
 * `matrix` must be a live handle; `out` must be writable for `len` ids.
 */
FkStatus fk_matrix_row_ids(const FkMatrix *matrix, uint64_t *out, size_t len);

/**
 * Loads a `model.json` written by `fraudkit train`.
 *
 * # Safety
 * `path` must be a NUL-terminated UTF-8 string; `out` must be writable.
 */
FkStatus fk_model_load(const char *path, FkModel **out);

/**
 * # Safety
 * `model` must be NULL or a handle from [`fk_model_load`] not yet freed.
 */
void fk_model_free(FkModel *model);

/**
 * Number of feature columns the model expects.
 *
 * # Safety
 * `model` must be a live handle; `out` must be writable.
 */
FkStatus fk_model_n_columns(const FkModel *model, size_t *out);

/**
 * Scores every row of `rows`. Columns are matched to the model schema by
 * name. `variant` is NULL or "raw" for forest probabilities, or the name
 * of a fitted calibrator ("sigmoid", "isotonic"). `out` must hold at least
 * one double per row.
 *
 * # Safety
 * `model` and `rows` must be live handles; `variant` must be NULL or a
 * NUL-terminated string; `out` must be writable for `len` doubles.
 */
FkStatus fk_model_predict(const FkModel *model,
                          const FkMatrix *rows,
                          const char *variant,
                          double *out,
                          size_t len);

/**
 * ROC-AUC of `scores` against 0/1 `labels`.
 *
 * # Safety
 * `scores` and `labels` must hold `n` elements; `out` must be writable.
 */
FkStatus fk_roc_auc(const double *scores, const uint8_t *labels, size_t n, double *out);

/**
 * Non-interpolated average precision of `scores` against 0/1 `labels`.
 *
 * # Safety
 * `scores` and `labels` must hold `n` elements; `out` must be writable.
 */
FkStatus fk_average_precision(const double *scores, const uint8_t *labels, size_t n, double *out);

/**
 * Brier score of probabilities in [0, 1] against 0/1 `labels`.
 *
 * # Safety
 * `probs` and `labels` must hold `n` elements; `out` must be writable.
 */
FkStatus fk_brier_score(const double *probs, const uint8_t *labels, size_t n, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FRAUDKIT_H */
