//! C ABI for the wflab toolkit.
//!
//! Every function returns a [`WflabStatus`]. On failure the message is
//! retrievable on the same thread with [`wflab_last_error`]. Objects are
//! opaque handles released with their `_free` function; strings returned
//! by the library are released with [`wflab_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use ndarray::ArrayView2;
use wflab::evaluation::classification_metrics;
use wflab::gbm::{fit_gbm, GbmConfig, GbmModel};
use wflab::lstm::{fit_lstm, LstmConfig, LstmModel};
use wflab::market_data::{assemble_sessions, read_bars_file, Assembly};
use wflab::synthetic::{gen_sessions, SynthConfig};
use wflab::tokenizer::{tokenize_series, TokenizerConfig};
use wflab::{Error, SessionSpec};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WflabStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    InvalidConfig = 4,
    InsufficientData = 5,
    InvalidInput = 6,
    ShapeMismatch = 7,
    SingleClass = 8,
    Io = 9,
    Internal = 10,
    Panic = 11,
}

/// Assembled trading sessions.
pub struct WflabSessions {
    assembly: Assembly,
}

/// Fitted gradient-boosting classifier.
pub struct WflabGbm {
    model: GbmModel,
}

/// Fitted LSTM classifier.
pub struct WflabLstm {
    model: LstmModel,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct WflabGbmParams {
    pub max_leaf_nodes: usize,
    pub min_samples_leaf: usize,
    pub learning_rate: f64,
    pub max_iter: usize,
    pub l2_regularization: f64,
    pub seed: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct WflabLstmParams {
    pub hidden_units: usize,
    pub dropout_rate: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub early_stop_patience: usize,
    pub seed: u64,
}

/// Confusion counts and rates. Mean probabilities are NaN when the class
/// is absent.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct WflabMetrics {
    pub n: usize,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub mean_prob_actual_pos: f64,
    pub mean_prob_actual_neg: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> WflabStatus {
    match e {
        Error::MalformedRow { .. }
        | Error::NonMonotonic { .. }
        | Error::DuplicateTimestamp { .. }
        | Error::InconsistentBar { .. }
        | Error::BadHeader { .. }
        | Error::Csv(_)
        | Error::Json(_) => WflabStatus::Parse,
        Error::InvalidConfig(_) => WflabStatus::InvalidConfig,
        Error::InsufficientData(_) => WflabStatus::InsufficientData,
        Error::InvalidInput(_) => WflabStatus::InvalidInput,
        Error::ShapeMismatch(_) => WflabStatus::ShapeMismatch,
        Error::SingleClass => WflabStatus::SingleClass,
        Error::Io(_) => WflabStatus::Io,
        Error::Stage { source, .. } | Error::Permutation { source, .. } => status_of(source),
        _ => WflabStatus::Internal,
    }
}

struct Fail(WflabStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard<F: FnOnce() -> Result<(), Fail>>(f: F) -> WflabStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => WflabStatus::Ok,
        Ok(Err(Fail(code, msg))) => {
            set_error(msg);
            code
        }
        Err(_) => {
            set_error("internal panic".into());
            WflabStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(WflabStatus::NullPointer, format!("{what} is null"))
}

unsafe fn slice<'a, T>(p: *const T, n: usize, what: &str) -> Result<&'a [T], Fail> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn slice_mut<'a, T>(p: *mut T, n: usize, what: &str) -> Result<&'a mut [T], Fail> {
    if n == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, n))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(WflabStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn put_string(out: *mut *mut c_char, s: String) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = CString::new(s)
        .map_err(|_| Fail(WflabStatus::Internal, "string contains nul".into()))?
        .into_raw();
    Ok(())
}

fn matrix<'a>(data: &'a [f64], rows: usize, cols: usize) -> Result<ArrayView2<'a, f64>, Fail> {
    ArrayView2::from_shape((rows, cols), data).map_err(|e| Fail(WflabStatus::ShapeMismatch, e.to_string()))
}

fn labels(y: &[u8]) -> Result<(), Fail> {
    if y.iter().any(|&v| v > 1) {
        return Err(Fail(WflabStatus::InvalidInput, "labels must be 0 or 1".into()));
    }
    Ok(())
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn wflab_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread, or null. Valid until
/// the next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn wflab_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `s` must be null or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn wflab_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses a bar file and assembles regular-hours sessions.
///
/// # Safety
/// `path` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wflab_sessions_load(path: *const c_char, out: *mut *mut WflabSessions) -> WflabStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let bars = read_bars_file(Path::new(path))?;
        let assembly = assemble_sessions(&bars, &SessionSpec::rth())?;
        put(out, WflabSessions { assembly })
    })
}

/// Generates synthetic sessions with default settings except those given.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wflab_sessions_synthetic(
    n_days: usize,
    planted_effect: f64,
    seed: u64,
    out: *mut *mut WflabSessions,
) -> WflabStatus {
    guard(|| {
        let cfg = SynthConfig {
            n_days,
            planted_effect,
            seed,
            ..Default::default()
        };
        let sessions = gen_sessions(&cfg)?;
        put(
            out,
            WflabSessions {
                assembly: Assembly {
                    sessions,
                    skipped: Vec::new(),
                },
            },
        )
    })
}

/// # Safety
/// `s` must be a live handle; `n_sessions` and `n_skipped` may be null.
#[no_mangle]
pub unsafe extern "C" fn wflab_sessions_counts(
    s: *const WflabSessions,
    n_sessions: *mut usize,
    n_skipped: *mut usize,
) -> WflabStatus {
    guard(|| {
        let s = s.as_ref().ok_or_else(|| null("sessions"))?;
        if let Some(n) = n_sessions.as_mut() {
            *n = s.assembly.sessions.len();
        }
        if let Some(n) = n_skipped.as_mut() {
            *n = s.assembly.skipped.len();
        }
        Ok(())
    })
}

/// Writes session `index`'s date as `YYYYMMDD`.
///
/// # Safety
/// `s` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wflab_sessions_date(s: *const WflabSessions, index: usize, out: *mut u32) -> WflabStatus {
    guard(|| {
        let s = s.as_ref().ok_or_else(|| null("sessions"))?;
        let out = out.as_mut().ok_or_else(|| null("output pointer"))?;
        let session = s
            .assembly
            .sessions
            .get(index)
            .ok_or_else(|| Fail(WflabStatus::InvalidInput, format!("session index {index} out of range")))?;
        let d = session.date;
        *out = d.format("%Y%m%d").to_string().parse().expect("eight digits");
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a handle from this library, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn wflab_sessions_free(s: *mut WflabSessions) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Expanding-window decile tokens. NaN inputs are missing. Writes -1 where
/// no token is emitted.
///
/// # Safety
/// `values` and `tokens` must each hold `n` elements.
#[no_mangle]
pub unsafe extern "C" fn wflab_tokenize(
    values: *const f64,
    n: usize,
    n_bins: usize,
    min_history: usize,
    tokens: *mut i32,
) -> WflabStatus {
    guard(|| {
        let values = slice(values, n, "values")?;
        let tokens = slice_mut(tokens, n, "tokens")?;
        let series: Vec<Option<f64>> = values.iter().map(|v| (!v.is_nan()).then_some(*v)).collect();
        let cfg = TokenizerConfig { n_bins, min_history };
        let out = tokenize_series(&series, &cfg)?;
        for (dst, t) in tokens.iter_mut().zip(out) {
            *dst = t.map_or(-1, |t| t as i32);
        }
        Ok(())
    })
}

/// # Safety
/// `probs` and `labels` must hold `n` elements; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wflab_metrics(
    probs: *const f64,
    labels_ptr: *const u8,
    n: usize,
    threshold: f64,
    out: *mut WflabMetrics,
) -> WflabStatus {
    guard(|| {
        let probs = slice(probs, n, "probs")?;
        let y = slice(labels_ptr, n, "labels")?;
        labels(y)?;
        let out = out.as_mut().ok_or_else(|| null("output pointer"))?;
        let m = classification_metrics(probs, y, threshold)?;
        *out = WflabMetrics {
            n: m.n,
            tp: m.tp,
            fp: m.fp,
            tn: m.tn,
            fn_: m.fn_,
            accuracy: m.accuracy,
            precision: m.precision,
            recall: m.recall,
            f1: m.f1,
            mean_prob_actual_pos: m.mean_prob_actual_pos.unwrap_or(f64::NAN),
            mean_prob_actual_neg: m.mean_prob_actual_neg.unwrap_or(f64::NAN),
        };
        Ok(())
    })
}

/// Default GBM hyperparameters.
#[no_mangle]
pub extern "C" fn wflab_gbm_default_params() -> WflabGbmParams {
    let c = GbmConfig::default();
    WflabGbmParams {
        max_leaf_nodes: c.max_leaf_nodes,
        min_samples_leaf: c.min_samples_leaf,
        learning_rate: c.learning_rate,
        max_iter: c.max_iter,
        l2_regularization: c.l2_regularization,
        seed: c.seed,
    }
}

/// Fits on a row-major `n_rows × n_cols` matrix. `params` may be null for
/// the defaults.
///
/// # Safety
/// `x` must hold `n_rows * n_cols` values, `y` `n_rows` labels; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wflab_gbm_fit(
    x: *const f64,
    n_rows: usize,
    n_cols: usize,
    y: *const u8,
    params: *const WflabGbmParams,
    out: *mut *mut WflabGbm,
) -> WflabStatus {
    guard(|| {
        let data = slice(x, n_rows.saturating_mul(n_cols), "x")?;
        let y = slice(y, n_rows, "y")?;
        labels(y)?;
        let p = params.as_ref().copied().unwrap_or_else(|| wflab_gbm_default_params());
        let cfg = GbmConfig {
            max_leaf_nodes: p.max_leaf_nodes,
            min_samples_leaf: p.min_samples_leaf,
            learning_rate: p.learning_rate,
            max_iter: p.max_iter,
            l2_regularization: p.l2_regularization,
            seed: p.seed,
            ..GbmConfig::default()
        };
        let model = fit_gbm(matrix(data, n_rows, n_cols)?, y, &cfg)?;
        put(out, WflabGbm { model })
    })
}

/// # Safety
/// `m` must be a live handle; `x` must hold `n_rows * n_cols` values and
/// `probs` `n_rows`.
#[no_mangle]
pub unsafe extern "C" fn wflab_gbm_predict_proba(
    m: *const WflabGbm,
    x: *const f64,
    n_rows: usize,
    n_cols: usize,
    probs: *mut f64,
) -> WflabStatus {
    guard(|| {
        let m = m.as_ref().ok_or_else(|| null("model"))?;
        let data = slice(x, n_rows.saturating_mul(n_cols), "x")?;
        let probs = slice_mut(probs, n_rows, "probs")?;
        let p = m.model.predict_proba(matrix(data, n_rows, n_cols)?)?;
        probs.copy_from_slice(&p);
        Ok(())
    })
}

/// Serializes the model; free the result with [`wflab_string_free`].
///
/// # Safety
/// `m` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wflab_gbm_to_json(m: *const WflabGbm, out: *mut *mut c_char) -> WflabStatus {
    guard(|| {
        let m = m.as_ref().ok_or_else(|| null("model"))?;
        put_string(out, m.model.to_json()?)
    })
}

/// # Safety
/// `json` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wflab_gbm_from_json(json: *const c_char, out: *mut *mut WflabGbm) -> WflabStatus {
    guard(|| {
        let model = GbmModel::from_json(str_arg(json, "json")?)?;
        put(out, WflabGbm { model })
    })
}

/// # Safety
/// `m` must be null or a handle from this library, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn wflab_gbm_free(m: *mut WflabGbm) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Default LSTM hyperparameters.
#[no_mangle]
pub extern "C" fn wflab_lstm_default_params() -> WflabLstmParams {
    let c = LstmConfig::default();
    WflabLstmParams {
        hidden_units: c.hidden_units,
        dropout_rate: c.dropout_rate,
        learning_rate: c.learning_rate,
        batch_size: c.batch_size,
        max_epochs: c.max_epochs,
        early_stop_patience: c.early_stop_patience,
        seed: c.seed,
    }
}

fn lstm_config(p: WflabLstmParams, seq_len: usize) -> LstmConfig {
    LstmConfig {
        hidden_units: p.hidden_units,
        sequence_length: seq_len,
        dropout_rate: p.dropout_rate,
        learning_rate: p.learning_rate,
        batch_size: p.batch_size,
        max_epochs: p.max_epochs,
        early_stop_patience: p.early_stop_patience,
        seed: p.seed,
        ..LstmConfig::default()
    }
}

/// Fits on `n × seq_len` scalar sequences stored row-major.
///
/// # Safety
/// `seqs` must hold `n * seq_len` values and `y` `n` labels; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wflab_lstm_fit(
    seqs: *const f64,
    n: usize,
    seq_len: usize,
    y: *const u8,
    params: *const WflabLstmParams,
    out: *mut *mut WflabLstm,
) -> WflabStatus {
    guard(|| {
        let data = slice(seqs, n.saturating_mul(seq_len), "seqs")?;
        let y = slice(y, n, "y")?;
        labels(y)?;
        let p = params.as_ref().copied().unwrap_or_else(|| wflab_lstm_default_params());
        let model = fit_lstm(matrix(data, n, seq_len)?, y, &lstm_config(p, seq_len))?;
        put(out, WflabLstm { model })
    })
}

/// # Safety
/// `m` must be a live handle; `seqs` must hold `n * seq_len` values and `probs` `n`.
#[no_mangle]
pub unsafe extern "C" fn wflab_lstm_predict_proba(
    m: *const WflabLstm,
    seqs: *const f64,
    n: usize,
    seq_len: usize,
    probs: *mut f64,
) -> WflabStatus {
    guard(|| {
        let m = m.as_ref().ok_or_else(|| null("model"))?;
        let data = slice(seqs, n.saturating_mul(seq_len), "seqs")?;
        let probs = slice_mut(probs, n, "probs")?;
        let p = m.model.predict_proba(matrix(data, n, seq_len)?)?;
        probs.copy_from_slice(&p);
        Ok(())
    })
}

/// # Safety
/// `m` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wflab_lstm_to_json(m: *const WflabLstm, out: *mut *mut c_char) -> WflabStatus {
    guard(|| {
        let m = m.as_ref().ok_or_else(|| null("model"))?;
        put_string(out, m.model.to_json()?)
    })
}

/// # Safety
/// `json` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wflab_lstm_from_json(json: *const c_char, out: *mut *mut WflabLstm) -> WflabStatus {
    guard(|| {
        let model = LstmModel::from_json(str_arg(json, "json")?)?;
        put(out, WflabLstm { model })
    })
}

/// # Safety
/// `m` must be null or a handle from this library, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn wflab_lstm_free(m: *mut WflabLstm) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}
