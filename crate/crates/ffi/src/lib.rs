//! C ABI over `wq-core`.
//!
//! Every fallible call returns a [`WqStatus`]; on failure the message is
//! available from [`wq_last_error_message`] on the same thread. Models are
//! opaque [`WqModel`] handles released with [`wq_model_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use wq_core::geo::{haversine_km, LatLon};
use wq_core::matrix::Matrix;
use wq_core::models::{self, ModelKind, ModelSpec, TrainedModel};
use wq_core::preprocess::DesignMatrix;
use wq_core::{eval, Error};

/// Result codes shared by all fallible functions.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WqStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    Model = 5,
    Metric = 6,
    Other = 7,
    Panic = 8,
}

/// A fitted model.
pub struct WqModel {
    inner: TrainedModel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> WqStatus {
    match err.category() {
        "io" | "stage-input" => WqStatus::Io,
        "format" => WqStatus::Format,
        "config" => WqStatus::InvalidArgument,
        "model" => WqStatus::Model,
        "metric" => WqStatus::Metric,
        _ => WqStatus::Other,
    }
}

/// Runs `f`, recording any error or panic as the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), (WqStatus, String)>) -> WqStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => WqStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            WqStatus::Panic
        }
    }
}

fn core_err(e: Error) -> (WqStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (WqStatus, String) {
    (WqStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (WqStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|_| (WqStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn slice_arg<'a>(p: *const f64, n: usize, what: &str) -> Result<&'a [f64], (WqStatus, String)> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(unsafe { std::slice::from_raw_parts(p, n) })
}

/// Message for the most recent failure on this thread, or null. The pointer
/// stays valid until the next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn wq_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn wq_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Great-circle distance in kilometres between two points in degrees.
#[no_mangle]
pub extern "C" fn wq_haversine_km(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    haversine_km(LatLon::new(lat1, lon1), LatLon::new(lat2, lon2))
}

/// Root-mean-square error of `n` predictions against observations.
///
/// # Safety
/// `pred` and `obs` must point to `n` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wq_rmse(pred: *const f64, obs: *const f64, n: usize, out: *mut f64) -> WqStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let p = unsafe { slice_arg(pred, n, "pred") }?;
        let o = unsafe { slice_arg(obs, n, "obs") }?;
        let v = eval::rmse(p, o).map_err(core_err)?;
        unsafe { *out = v };
        Ok(())
    })
}

/// Coefficient of determination of `n` predictions against observations.
///
/// # Safety
/// Same contract as [`wq_rmse`].
#[no_mangle]
pub unsafe extern "C" fn wq_r_squared(pred: *const f64, obs: *const f64, n: usize, out: *mut f64) -> WqStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let p = unsafe { slice_arg(pred, n, "pred") }?;
        let o = unsafe { slice_arg(obs, n, "obs") }?;
        let v = eval::r_squared(p, o).map_err(core_err)?;
        unsafe { *out = v };
        Ok(())
    })
}

fn parse_params(spec: &mut ModelSpec, text: &str) -> Result<(), (WqStatus, String)> {
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| (WqStatus::InvalidArgument, format!("expected key=value, got {item:?}")))?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| (WqStatus::InvalidArgument, format!("{k}: not a number")))?;
        spec.set(k.trim(), v).map_err(core_err)?;
    }
    Ok(())
}

/// Fits a model on a row-major `n_rows` x `n_cols` matrix.
///
/// `kind` is one of `lm`, `rf`, `gb`, `gp`, `svm`, `gam`. `params` may be
/// null or a comma-separated list such as `"n_rounds=200,learning_rate=0.05"`.
///
/// # Safety
/// `x` must hold `n_rows * n_cols` doubles, `y` must hold `n_rows`, the
/// strings must be NUL-terminated and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wq_model_fit(
    kind: *const c_char,
    params: *const c_char,
    x: *const f64,
    n_rows: usize,
    n_cols: usize,
    y: *const f64,
    seed: u64,
    out: *mut *mut WqModel,
) -> WqStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        unsafe { *out = ptr::null_mut() };
        let kind: ModelKind = unsafe { str_arg(kind, "kind") }?.parse().map_err(core_err)?;
        let mut spec = ModelSpec::new(kind).with_seed(seed);
        if !params.is_null() {
            parse_params(&mut spec, unsafe { str_arg(params, "params") }?)?;
        }
        let len = n_rows
            .checked_mul(n_cols)
            .ok_or((WqStatus::InvalidArgument, "matrix too large".to_string()))?;
        let xs = unsafe { slice_arg(x, len, "x") }?.to_vec();
        let ys = unsafe { slice_arg(y, n_rows, "y") }?.to_vec();
        let m = Matrix::from_vec(n_rows, n_cols, xs).map_err(core_err)?;
        let dm = DesignMatrix::numeric(m, ys).map_err(core_err)?;
        let inner = models::fit(&spec, &dm).map_err(core_err)?;
        unsafe { *out = Box::into_raw(Box::new(WqModel { inner })) };
        Ok(())
    })
}

/// Predicts `n_rows` rows laid out like the training matrix into `out`.
///
/// # Safety
/// `model` must come from this library; `x` must hold `n_rows * n_cols`
/// doubles and `out` must have room for `n_rows`.
#[no_mangle]
pub unsafe extern "C" fn wq_model_predict(
    model: *const WqModel,
    x: *const f64,
    n_rows: usize,
    n_cols: usize,
    out: *mut f64,
) -> WqStatus {
    guard(|| {
        let model = unsafe { model.as_ref() }.ok_or_else(|| null("model"))?;
        if out.is_null() && n_rows > 0 {
            return Err(null("out"));
        }
        let len = n_rows
            .checked_mul(n_cols)
            .ok_or((WqStatus::InvalidArgument, "matrix too large".to_string()))?;
        let xs = unsafe { slice_arg(x, len, "x") }?.to_vec();
        let m = Matrix::from_vec(n_rows, n_cols, xs).map_err(core_err)?;
        let pred = model.inner.predict_matrix(&m).map_err(core_err)?;
        if n_rows > 0 {
            unsafe { std::slice::from_raw_parts_mut(out, n_rows) }.copy_from_slice(&pred);
        }
        Ok(())
    })
}

/// Number of input columns the model expects, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn wq_model_n_features(model: *const WqModel) -> usize {
    unsafe { model.as_ref() }.map_or(0, |m| m.inner.layout.len())
}

/// Training RMSE recorded at fit time, or NaN for a null handle.
///
/// # Safety
/// `model` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn wq_model_train_rmse(model: *const WqModel) -> f64 {
    unsafe { model.as_ref() }.map_or(f64::NAN, |m| m.inner.summary.train_rmse)
}

/// Writes the model as a JSON artifact readable by [`wq_model_load`] and
/// by the `wq` command-line tool.
///
/// # Safety
/// `model` must come from this library and `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn wq_model_save(model: *const WqModel, path: *const c_char) -> WqStatus {
    guard(|| {
        let model = unsafe { model.as_ref() }.ok_or_else(|| null("model"))?;
        let path = unsafe { str_arg(path, "path") }?;
        model.inner.save(Path::new(path)).map_err(core_err)
    })
}

/// Loads a model artifact, including those written by `wq train`.
///
/// # Safety
/// `path` must be NUL-terminated and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn wq_model_load(path: *const c_char, out: *mut *mut WqModel) -> WqStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        unsafe { *out = ptr::null_mut() };
        let path = unsafe { str_arg(path, "path") }?;
        let inner = TrainedModel::load(Path::new(path)).map_err(core_err)?;
        unsafe { *out = Box::into_raw(Box::new(WqModel { inner })) };
        Ok(())
    })
}

/// Releases a model handle. Null is ignored.
///
/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn wq_model_free(model: *mut WqModel) {
    if !model.is_null() {
        drop(unsafe { Box::from_raw(model) });
    }
}
