//! C ABI over the `adsel` library.
//!
//! Every function returns an [`AdselStatus`]; on failure the message is
//! available from [`adsel_last_error_message`] on the same thread. Objects
//! are opaque handles created by `*_fit` / `*_load` functions and released
//! with the matching `*_free`. Matrices are row-major `double` arrays.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use adsel::dataset::{load_csv_unlabeled, LabeledDataset};
use adsel::detectors::{Algorithm, DetectorConfig, NormalityClassifier, TrainedDetector};
use adsel::features::mc_cv_fpr;
use adsel::hypervolume::{estimate_hypervolume, fit_enclosing_ball, EnclosingBall};
use adsel::metamodel::MetaModel;
use ndarray::ArrayView2;
use adsel::ranking::{kendall_tau_b, lc_score, ndcg, scaled_mcc, ConfusionCounts};
use adsel::Error;

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdselStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    DimensionMismatch = 3,
    Io = 4,
    Parse = 5,
    Fit = 6,
    Model = 7,
    Timeout = 8,
    Panic = 9,
    Other = 10,
}

/// A loaded labeled dataset.
pub struct AdselDataset(LabeledDataset);
/// A fitted detector with its threshold.
pub struct AdselDetector(TrainedDetector);
/// An enclosing ball of a training set.
pub struct AdselBall(EnclosingBall);
/// A loaded meta-model.
pub struct AdselMetaModel(MetaModel);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(err: &Error) -> AdselStatus {
    match err {
        Error::Io { .. } => AdselStatus::Io,
        Error::Parse { .. } | Error::Csv(_) | Error::Json(_) => AdselStatus::Parse,
        Error::InvalidInput(_) | Error::Config(_) => AdselStatus::InvalidInput,
        Error::DimensionMismatch { .. } => AdselStatus::DimensionMismatch,
        Error::Fit { .. } => AdselStatus::Fit,
        Error::Model(_) => AdselStatus::Model,
        Error::Timeout(_) => AdselStatus::Timeout,
        _ => AdselStatus::Other,
    }
}

struct Fail(AdselStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(AdselStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> AdselStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            AdselStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            AdselStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(AdselStatus::InvalidInput, format!("{what} is not UTF-8")))
}

unsafe fn matrix<'a>(data: *const f64, n_rows: usize, n_cols: usize) -> Result<ArrayView2<'a, f64>, Fail> {
    if data.is_null() {
        return Err(null("data"));
    }
    let len = n_rows
        .checked_mul(n_cols)
        .ok_or_else(|| Fail(AdselStatus::InvalidInput, "matrix size overflows".into()))?;
    let slice = std::slice::from_raw_parts(data, len);
    ArrayView2::from_shape((n_rows, n_cols), slice).map_err(|e| Fail(AdselStatus::InvalidInput, e.to_string()))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).expect("nul bytes removed").into_raw()
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn adsel_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn adsel_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn adsel_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Default configuration of `algorithm` as JSON; free with [`adsel_string_free`].
///
/// # Safety
/// `algorithm` must be a NUL-terminated string; `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn adsel_default_config(algorithm: *const c_char, out_json: *mut *mut c_char) -> AdselStatus {
    guard(|| {
        let alg: Algorithm = str_arg(algorithm, "algorithm")?.parse()?;
        *out(out_json, "out_json")? = into_c_string(DetectorConfig::default_for(alg).to_json());
        Ok(())
    })
}

/// Loads a CSV; a missing label column means all rows are normal.
///
/// # Safety
/// String arguments must be NUL-terminated; `out_dataset` must be writable.
#[no_mangle]
pub unsafe extern "C" fn adsel_dataset_load_csv(
    path: *const c_char,
    label_column: *const c_char,
    out_dataset: *mut *mut AdselDataset,
) -> AdselStatus {
    guard(|| {
        let ds = load_csv_unlabeled(str_arg(path, "path")?, str_arg(label_column, "label_column")?)?;
        *out(out_dataset, "out_dataset")? = Box::into_raw(Box::new(AdselDataset(ds)));
        Ok(())
    })
}

/// # Safety
/// `dataset` must be a live handle; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn adsel_dataset_shape(
    dataset: *const AdselDataset,
    out_rows: *mut usize,
    out_cols: *mut usize,
    out_anomalies: *mut usize,
) -> AdselStatus {
    guard(|| {
        let ds = &handle(dataset, "dataset")?.0;
        *out(out_rows, "out_rows")? = ds.n_rows();
        *out(out_cols, "out_cols")? = ds.n_features();
        *out(out_anomalies, "out_anomalies")? = ds.n_anomalies();
        Ok(())
    })
}

/// # Safety
/// `dataset` must come from [`adsel_dataset_load_csv`] or be null.
#[no_mangle]
pub unsafe extern "C" fn adsel_dataset_free(dataset: *mut AdselDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Fits the detector described by `config_json` on a row-major matrix.
///
/// # Safety
/// `data` must point to `n_rows * n_cols` doubles; `config_json` must be
/// NUL-terminated; `out_detector` must be writable.
#[no_mangle]
pub unsafe extern "C" fn adsel_detector_fit(
    config_json: *const c_char,
    data: *const f64,
    n_rows: usize,
    n_cols: usize,
    out_detector: *mut *mut AdselDetector,
) -> AdselStatus {
    guard(|| {
        let cfg = DetectorConfig::from_json(str_arg(config_json, "config_json")?)?;
        let det = cfg.fit_matrix(matrix(data, n_rows, n_cols)?)?;
        *out(out_detector, "out_detector")? = Box::into_raw(Box::new(AdselDetector(det)));
        Ok(())
    })
}

/// Fits on the normal rows of a loaded dataset.
///
/// # Safety
/// `config_json` must be NUL-terminated; `dataset` a live handle;
/// `out_detector` writable.
#[no_mangle]
pub unsafe extern "C" fn adsel_detector_fit_dataset(
    config_json: *const c_char,
    dataset: *const AdselDataset,
    out_detector: *mut *mut AdselDetector,
) -> AdselStatus {
    guard(|| {
        let cfg = DetectorConfig::from_json(str_arg(config_json, "config_json")?)?;
        let det = cfg.fit(&handle(dataset, "dataset")?.0.normals())?;
        *out(out_detector, "out_detector")? = Box::into_raw(Box::new(AdselDetector(det)));
        Ok(())
    })
}

/// Outlier scores of `n_rows` rows into `out_scores`.
///
/// # Safety
/// `data` must hold `n_rows * n_cols` doubles and `out_scores` `n_rows`.
#[no_mangle]
pub unsafe extern "C" fn adsel_detector_score(
    detector: *const AdselDetector,
    data: *const f64,
    n_rows: usize,
    n_cols: usize,
    out_scores: *mut f64,
) -> AdselStatus {
    guard(|| {
        let det = &handle(detector, "detector")?.0;
        let x = matrix(data, n_rows, n_cols)?;
        if out_scores.is_null() {
            return Err(null("out_scores"));
        }
        let dst = std::slice::from_raw_parts_mut(out_scores, n_rows);
        for (i, row) in x.rows().into_iter().enumerate() {
            dst[i] = det.score(&row.to_vec())?;
        }
        Ok(())
    })
}

/// Writes 1 for anomalies and 0 for normal rows into `out_flags`.
///
/// # Safety
/// `data` must hold `n_rows * n_cols` doubles and `out_flags` `n_rows` bytes.
#[no_mangle]
pub unsafe extern "C" fn adsel_detector_predict(
    detector: *const AdselDetector,
    data: *const f64,
    n_rows: usize,
    n_cols: usize,
    out_flags: *mut u8,
) -> AdselStatus {
    guard(|| {
        let det = &handle(detector, "detector")?.0;
        let x = matrix(data, n_rows, n_cols)?;
        if n_cols != det.dim() {
            return Err(Error::DimensionMismatch { expected: det.dim(), found: n_cols }.into());
        }
        if out_flags.is_null() {
            return Err(null("out_flags"));
        }
        let dst = std::slice::from_raw_parts_mut(out_flags, n_rows);
        for (i, row) in x.rows().into_iter().enumerate() {
            dst[i] = u8::from(det.is_anomaly(&row.to_vec()));
        }
        Ok(())
    })
}

/// # Safety
/// `detector` must be a live handle; `out_threshold` writable.
#[no_mangle]
pub unsafe extern "C" fn adsel_detector_threshold(detector: *const AdselDetector, out_threshold: *mut f64) -> AdselStatus {
    guard(|| {
        *out(out_threshold, "out_threshold")? = handle(detector, "detector")?.0.threshold();
        Ok(())
    })
}

/// # Safety
/// `detector` must come from a fit function or be null.
#[no_mangle]
pub unsafe extern "C" fn adsel_detector_free(detector: *mut AdselDetector) {
    if !detector.is_null() {
        drop(Box::from_raw(detector));
    }
}

/// (1+epsilon)-approximate minimal enclosing ball of the rows.
///
/// # Safety
/// `data` must hold `n_rows * n_cols` doubles; `out_ball` writable.
#[no_mangle]
pub unsafe extern "C" fn adsel_ball_fit(
    data: *const f64,
    n_rows: usize,
    n_cols: usize,
    epsilon: f64,
    out_ball: *mut *mut AdselBall,
) -> AdselStatus {
    guard(|| {
        let ball = fit_enclosing_ball(matrix(data, n_rows, n_cols)?, epsilon)?;
        *out(out_ball, "out_ball")? = Box::into_raw(Box::new(AdselBall(ball)));
        Ok(())
    })
}

/// Copies the centre into `out_center` (length `dim`) and the radius.
///
/// # Safety
/// `out_center` must hold `dim` doubles; `out_radius` writable.
#[no_mangle]
pub unsafe extern "C" fn adsel_ball_get(
    ball: *const AdselBall,
    out_center: *mut f64,
    dim: usize,
    out_radius: *mut f64,
) -> AdselStatus {
    guard(|| {
        let b = &handle(ball, "ball")?.0;
        if dim != b.dim() {
            return Err(Error::DimensionMismatch { expected: b.dim(), found: dim }.into());
        }
        if out_center.is_null() {
            return Err(null("out_center"));
        }
        std::slice::from_raw_parts_mut(out_center, dim).copy_from_slice(&b.center);
        *out(out_radius, "out_radius")? = b.radius;
        Ok(())
    })
}

/// # Safety
/// `ball` must come from [`adsel_ball_fit`] or be null.
#[no_mangle]
pub unsafe extern "C" fn adsel_ball_free(ball: *mut AdselBall) {
    if !ball.is_null() {
        drop(Box::from_raw(ball));
    }
}

/// Fraction of `n_samples` uniform ball points the detector deems normal.
///
/// # Safety
/// Handles must be live; outputs writable.
#[no_mangle]
pub unsafe extern "C" fn adsel_hypervolume(
    detector: *const AdselDetector,
    ball: *const AdselBall,
    n_samples: usize,
    seed: u64,
    out_fraction: *mut f64,
    out_std_error: *mut f64,
) -> AdselStatus {
    guard(|| {
        let est = estimate_hypervolume(&handle(detector, "detector")?.0, &handle(ball, "ball")?.0, n_samples, seed)?;
        *out(out_fraction, "out_fraction")? = est.fraction;
        *out(out_std_error, "out_std_error")? = est.std_error;
        Ok(())
    })
}

/// Monte Carlo cross-validated false-positive rate on normal-only rows.
///
/// # Safety
/// `config_json` NUL-terminated; `data` holds `n_rows * n_cols` doubles.
#[no_mangle]
pub unsafe extern "C" fn adsel_mc_cv_fpr(
    config_json: *const c_char,
    data: *const f64,
    n_rows: usize,
    n_cols: usize,
    test_fraction: f64,
    repetitions: usize,
    seed: u64,
    out_fpr: *mut f64,
) -> AdselStatus {
    guard(|| {
        let cfg = DetectorConfig::from_json(str_arg(config_json, "config_json")?)?;
        let est = mc_cv_fpr(&cfg, matrix(data, n_rows, n_cols)?, test_fraction, repetitions, seed)?;
        *out(out_fpr, "out_fpr")? = est.mean;
        Ok(())
    })
}

/// # Safety
/// `path` NUL-terminated; `out_model` writable.
#[no_mangle]
pub unsafe extern "C" fn adsel_metamodel_load(path: *const c_char, out_model: *mut *mut AdselMetaModel) -> AdselStatus {
    guard(|| {
        let m = MetaModel::load(str_arg(path, "path")?)?;
        *out(out_model, "out_model")? = Box::into_raw(Box::new(AdselMetaModel(m)));
        Ok(())
    })
}

/// # Safety
/// `model` live; `out_count` writable.
#[no_mangle]
pub unsafe extern "C" fn adsel_metamodel_n_columns(model: *const AdselMetaModel, out_count: *mut usize) -> AdselStatus {
    guard(|| {
        *out(out_count, "out_count")? = handle(model, "model")?.0.columns.len();
        Ok(())
    })
}

/// Name of feature column `index`; free with [`adsel_string_free`].
///
/// # Safety
/// `model` live; `out_name` writable.
#[no_mangle]
pub unsafe extern "C" fn adsel_metamodel_column_name(
    model: *const AdselMetaModel,
    index: usize,
    out_name: *mut *mut c_char,
) -> AdselStatus {
    guard(|| {
        let cols = &handle(model, "model")?.0.columns;
        let name = cols
            .get(index)
            .ok_or_else(|| Fail(AdselStatus::InvalidInput, format!("column {index} of {}", cols.len())))?;
        *out(out_name, "out_name")? = into_c_string(name.clone());
        Ok(())
    })
}

/// Predicted scaled MCC for one instance given in model column order;
/// NaN marks an absent value.
///
/// # Safety
/// `values` must hold `len` doubles; `out_prediction` writable.
#[no_mangle]
pub unsafe extern "C" fn adsel_metamodel_predict(
    model: *const AdselMetaModel,
    values: *const f64,
    len: usize,
    out_prediction: *mut f64,
) -> AdselStatus {
    guard(|| {
        let m = &handle(model, "model")?.0;
        if values.is_null() {
            return Err(null("values"));
        }
        let row: Vec<Option<f64>> = std::slice::from_raw_parts(values, len)
            .iter()
            .map(|v| (!v.is_nan()).then_some(*v))
            .collect();
        *out(out_prediction, "out_prediction")? = m.predict_values(&row)?;
        Ok(())
    })
}

/// # Safety
/// `model` must come from [`adsel_metamodel_load`] or be null.
#[no_mangle]
pub unsafe extern "C" fn adsel_metamodel_free(model: *mut AdselMetaModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Matthews correlation and its [0, 1] rescaling.
///
/// # Safety
/// Outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn adsel_mcc(
    tp: u64,
    fp: u64,
    fn_: u64,
    tn: u64,
    out_mcc: *mut f64,
    out_scaled: *mut f64,
) -> AdselStatus {
    guard(|| {
        let m = ConfusionCounts { tp, fp, fn_, tn }.mcc();
        *out(out_mcc, "out_mcc")? = m;
        *out(out_scaled, "out_scaled")? = scaled_mcc(m);
        Ok(())
    })
}

/// # Safety
/// `out_score` must be writable.
#[no_mangle]
pub unsafe extern "C" fn adsel_lc_score(hv: f64, fpr: f64, out_score: *mut f64) -> AdselStatus {
    guard(|| {
        *out(out_score, "out_score")? = lc_score(hv, fpr)?;
        Ok(())
    })
}

/// # Safety
/// `x` and `y` must hold `n` doubles; `out_tau` writable.
#[no_mangle]
pub unsafe extern "C" fn adsel_kendall_tau_b(x: *const f64, y: *const f64, n: usize, out_tau: *mut f64) -> AdselStatus {
    guard(|| {
        if x.is_null() || y.is_null() {
            return Err(null("input"));
        }
        let (x, y) = (std::slice::from_raw_parts(x, n), std::slice::from_raw_parts(y, n));
        *out(out_tau, "out_tau")? = kendall_tau_b(x, y)?;
        Ok(())
    })
}

/// NDCG of the ranking `order` (candidate indices, best first).
///
/// # Safety
/// `order` and `relevance` must hold `n` elements; `out_ndcg` writable.
#[no_mangle]
pub unsafe extern "C" fn adsel_ndcg(
    order: *const usize,
    relevance: *const f64,
    n: usize,
    out_ndcg: *mut f64,
) -> AdselStatus {
    guard(|| {
        if order.is_null() || relevance.is_null() {
            return Err(null("input"));
        }
        let order = std::slice::from_raw_parts(order, n);
        if let Some(bad) = order.iter().find(|&&i| i >= n) {
            return Err(Fail(AdselStatus::InvalidInput, format!("index {bad} out of range")));
        }
        *out(out_ndcg, "out_ndcg")? = ndcg(order, std::slice::from_raw_parts(relevance, n))?;
        Ok(())
    })
}
