//! C ABI over fraudkit: temporal graph construction, descriptor extraction,
//! model scoring and the headline metrics.
//!
//! Every fallible function returns an [`FkStatus`]; on failure the message
//! is available from [`fk_last_error`] on the same thread. Handles are
//! opaque and must be released with their `*_free` function. Panics never
//! cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use fraudkit::calibration::brier_score;
use fraudkit::features::{extract_causal, extract_full, DescriptorSpec};
use fraudkit::forest::predict_proba;
use fraudkit::graph::{NodeId, TemporalGraph, TimeStep};
use fraudkit::matrix::{FeatureMatrix, Provenance};
use fraudkit::metrics::{average_precision, roc_auc};
use fraudkit::pipeline::TrainedModel;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FkStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// Malformed or inconsistent input data (duplicate node, unknown
    /// endpoint, parse failure, single-class labels...).
    DataError = 3,
    SchemaMismatch = 4,
    Io = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FkExtractMode {
    /// Each node sees only the graph up to its own timestep.
    Causal = 0,
    /// Every node sees the whole graph (leaky baseline).
    Full = 1,
}

/// Opaque temporal transaction graph.
pub struct FkGraph {
    inner: TemporalGraph,
}

/// Opaque feature matrix (row-major, named columns, node-id rows).
pub struct FkMatrix {
    inner: FeatureMatrix,
    names: Vec<CString>,
}

/// Opaque trained model as written by `fraudkit train`.
pub struct FkModel {
    inner: TrainedModel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(FkStatus, String);

impl From<fraudkit::Error> for Failure {
    fn from(e: fraudkit::Error) -> Self {
        use fraudkit::Error as E;
        let status = match &e {
            E::Io { .. } => FkStatus::Io,
            E::SchemaMismatch(_) => FkStatus::SchemaMismatch,
            E::InvalidArgument(_) | E::Infeasible { .. } | E::Json(_) => FkStatus::InvalidArgument,
            _ => FkStatus::DataError,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(FkStatus::NullPointer, format!("{what} is null"))
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> FkStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            FkStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            FkStatus::Panic
        }
    }
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out_slice<'a, T>(p: *mut T, len: usize, needed: usize, what: &str) -> Result<&'a mut [T], Failure> {
    if len < needed {
        return Err(Failure(
            FkStatus::BufferTooSmall,
            format!("{what} holds {len} elements, {needed} needed"),
        ));
    }
    if needed == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, needed))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(FkStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

unsafe fn labels_arg(p: *const u8, n: usize) -> Result<Vec<bool>, Failure> {
    Ok(slice(p, n, "labels")?.iter().map(|&y| y != 0).collect())
}

unsafe fn write<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

fn wrap_matrix(inner: FeatureMatrix) -> *mut FkMatrix {
    let names = inner
        .columns()
        .iter()
        .map(|c| CString::new(c.as_str()).unwrap_or_default())
        .collect();
    Box::into_raw(Box::new(FkMatrix { inner, names }))
}

/// Message for the most recent failed call on this thread, or NULL after a
/// successful call. Valid until the next fraudkit call on the same thread.
#[no_mangle]
pub extern "C" fn fk_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn fk_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[no_mangle]
pub extern "C" fn fk_graph_new() -> *mut FkGraph {
    Box::into_raw(Box::new(FkGraph {
        inner: TemporalGraph::new(),
    }))
}

/// # Safety
/// `graph` must be NULL or a handle from [`fk_graph_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fk_graph_free(graph: *mut FkGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

/// Adds transaction `id` observed at `timestep` (>= 1).
///
/// # Safety
/// `graph` must be a live handle from [`fk_graph_new`].
#[no_mangle]
pub unsafe extern "C" fn fk_graph_add_node(graph: *mut FkGraph, id: u64, timestep: u32) -> FkStatus {
    guard(|| {
        let g = graph.as_mut().ok_or_else(|| null("graph"))?;
        let t = TimeStep::new(timestep)?;
        g.inner.add_node(NodeId(id), t)?;
        Ok(())
    })
}

/// Adds a directed edge between two existing nodes. Duplicates collapse and
/// self-loops are dropped.
///
/// # Safety
/// `graph` must be a live handle from [`fk_graph_new`].
#[no_mangle]
pub unsafe extern "C" fn fk_graph_add_edge(graph: *mut FkGraph, src: u64, dst: u64) -> FkStatus {
    guard(|| {
        let g = graph.as_mut().ok_or_else(|| null("graph"))?;
        g.inner.add_edge(NodeId(src), NodeId(dst))?;
        Ok(())
    })
}

/// # Safety
/// `graph` must be a live handle; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn fk_graph_counts(graph: *const FkGraph, nodes: *mut usize, edges: *mut usize) -> FkStatus {
    guard(|| {
        let g = graph.as_ref().ok_or_else(|| null("graph"))?;
        write(nodes, g.inner.node_count(), "nodes")?;
        write(edges, g.inner.edge_count(), "edges")
    })
}

/// Computes the descriptor matrix for every node. Rows follow node
/// insertion order. With `log1p` set the heavy-tailed descriptors gain
/// `log1p_*` companion columns.
///
/// # Safety
/// `graph` must be a live handle; `out` must be writable. On success the
/// caller owns `*out` and frees it with [`fk_matrix_free`].
#[no_mangle]
pub unsafe extern "C" fn fk_extract(
    graph: *const FkGraph,
    mode: FkExtractMode,
    log1p: bool,
    out: *mut *mut FkMatrix,
) -> FkStatus {
    guard(|| {
        let g = graph.as_ref().ok_or_else(|| null("graph"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let spec = DescriptorSpec {
            log1p,
            ..DescriptorSpec::default()
        };
        let m = match mode {
            FkExtractMode::Causal => extract_causal(&g.inner, &spec)?,
            FkExtractMode::Full => extract_full(&g.inner, &spec)?,
        };
        out.write(wrap_matrix(m));
        Ok(())
    })
}

/// Builds a matrix from row-major `values` (`n_rows * n_cols` entries),
/// row ids and column names.
///
/// # Safety
/// Array arguments must hold the stated number of elements; every name
/// must be a NUL-terminated UTF-8 string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fk_matrix_new(
    row_ids: *const u64,
    n_rows: usize,
    column_names: *const *const c_char,
    n_cols: usize,
    values: *const f64,
    out: *mut *mut FkMatrix,
) -> FkStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let ids = slice(row_ids, n_rows, "row_ids")?;
        let names = slice(column_names, n_cols, "column_names")?
            .iter()
            .map(|&p| str_arg(p, "column name").map(str::to_owned))
            .collect::<Result<Vec<_>, _>>()?;
        let total = n_rows
            .checked_mul(n_cols)
            .ok_or_else(|| Failure(FkStatus::InvalidArgument, "matrix size overflows".into()))?;
        let vals = slice(values, total, "values")?;
        let m = FeatureMatrix::new(
            ids.iter().copied().map(NodeId).collect(),
            names,
            vals.to_vec(),
            Provenance::Transaction,
        )?;
        out.write(wrap_matrix(m));
        Ok(())
    })
}

/// # Safety
/// `matrix` must be NULL or a handle returned by this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fk_matrix_free(matrix: *mut FkMatrix) {
    if !matrix.is_null() {
        drop(Box::from_raw(matrix));
    }
}

/// # Safety
/// `matrix` must be a live handle; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn fk_matrix_shape(matrix: *const FkMatrix, rows: *mut usize, cols: *mut usize) -> FkStatus {
    guard(|| {
        let m = matrix.as_ref().ok_or_else(|| null("matrix"))?;
        write(rows, m.inner.n_rows(), "rows")?;
        write(cols, m.inner.n_cols(), "cols")
    })
}

/// Name of column `index`, or NULL when out of range. The string lives as
/// long as the matrix.
///
/// # Safety
/// `matrix` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fk_matrix_column_name(matrix: *const FkMatrix, index: usize) -> *const c_char {
    matrix
        .as_ref()
        .and_then(|m| m.names.get(index))
        .map_or(ptr::null(), |c| c.as_ptr())
}

/// Copies the row-major values into `out`, which must hold at least
/// `rows * cols` doubles.
///
/// # Safety
/// `matrix` must be a live handle; `out` must be writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn fk_matrix_values(matrix: *const FkMatrix, out: *mut f64, len: usize) -> FkStatus {
    guard(|| {
        let m = matrix.as_ref().ok_or_else(|| null("matrix"))?;
        let v = m.inner.values();
        out_slice(out, len, v.len(), "out")?.copy_from_slice(v);
        Ok(())
    })
}

/// Copies the row ids into `out`, which must hold at least `rows` entries.
///
/// # Safety
/// `matrix` must be a live handle; `out` must be writable for `len` ids.
#[no_mangle]
pub unsafe extern "C" fn fk_matrix_row_ids(matrix: *const FkMatrix, out: *mut u64, len: usize) -> FkStatus {
    guard(|| {
        let m = matrix.as_ref().ok_or_else(|| null("matrix"))?;
        let ids = m.inner.row_ids();
        for (o, id) in out_slice(out, len, ids.len(), "out")?.iter_mut().zip(ids) {
            *o = id.0;
        }
        Ok(())
    })
}

/// Loads a `model.json` written by `fraudkit train`.
///
/// # Safety
/// `path` must be a NUL-terminated UTF-8 string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fk_model_load(path: *const c_char, out: *mut *mut FkModel) -> FkStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = TrainedModel::load(Path::new(path))?;
        out.write(Box::into_raw(Box::new(FkModel { inner })));
        Ok(())
    })
}

/// # Safety
/// `model` must be NULL or a handle from [`fk_model_load`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fk_model_free(model: *mut FkModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of feature columns the model expects.
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fk_model_n_columns(model: *const FkModel, out: *mut usize) -> FkStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        write(out, m.inner.forest.schema.columns.len(), "out")
    })
}

/// Scores every row of `rows`. Columns are matched to the model schema by
/// name. `variant` is NULL or "raw" for forest probabilities, or the name
/// of a fitted calibrator ("sigmoid", "isotonic"). `out` must hold at least
/// one double per row.
///
/// # Safety
/// `model` and `rows` must be live handles; `variant` must be NULL or a
/// NUL-terminated string; `out` must be writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn fk_model_predict(
    model: *const FkModel,
    rows: *const FkMatrix,
    variant: *const c_char,
    out: *mut f64,
    len: usize,
) -> FkStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let rows = rows.as_ref().ok_or_else(|| null("rows"))?;
        let variant = if variant.is_null() {
            "raw"
        } else {
            str_arg(variant, "variant")?
        };
        let dst = out_slice(out, len, rows.inner.n_rows(), "out")?;
        let raw = predict_proba(&m.inner.forest, &rows.inner)?;
        let scores = if variant == "raw" {
            raw
        } else {
            m.inner
                .calibrator(variant)
                .ok_or_else(|| {
                    Failure(
                        FkStatus::InvalidArgument,
                        format!("model has no `{variant}` calibrator"),
                    )
                })?
                .apply(&raw)
        };
        dst.copy_from_slice(&scores);
        Ok(())
    })
}

/// ROC-AUC of `scores` against 0/1 `labels`.
///
/// # Safety
/// `scores` and `labels` must hold `n` elements; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fk_roc_auc(scores: *const f64, labels: *const u8, n: usize, out: *mut f64) -> FkStatus {
    guard(|| {
        let v = roc_auc(slice(scores, n, "scores")?, &labels_arg(labels, n)?)?;
        write(out, v, "out")
    })
}

/// Non-interpolated average precision of `scores` against 0/1 `labels`.
///
/// # Safety
/// `scores` and `labels` must hold `n` elements; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fk_average_precision(
    scores: *const f64,
    labels: *const u8,
    n: usize,
    out: *mut f64,
) -> FkStatus {
    guard(|| {
        let v = average_precision(slice(scores, n, "scores")?, &labels_arg(labels, n)?)?;
        write(out, v, "out")
    })
}

/// Brier score of probabilities in [0, 1] against 0/1 `labels`.
///
/// # Safety
/// `probs` and `labels` must hold `n` elements; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fk_brier_score(probs: *const f64, labels: *const u8, n: usize, out: *mut f64) -> FkStatus {
    guard(|| {
        let v = brier_score(slice(probs, n, "probs")?, &labels_arg(labels, n)?)?;
        write(out, v, "out")
    })
}
