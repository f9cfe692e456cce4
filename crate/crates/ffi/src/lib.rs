//! C ABI over `projres`.
//!
//! Datasets and trained models are opaque handles created and released by
//! the library. Every fallible call returns a [`PrStatus`]; on failure the
//! message is available from [`pr_last_error_message`] on the same thread.
//! Panics never cross the boundary and are reported as `PR_STATUS_PANIC`.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{self, AssertUnwindSafe};
use std::slice;

use projres::data::{gen_synthetic_sparse, load_numeric_csv};
use projres::leverage::HatState;
use projres::model::{Dataset, DeletionRequest};
use projres::numerics::DenseMatrix;
use projres::unlearn::{run_method, Method, MethodOptions};
use projres::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    DataError = 4,
    Singular = 5,
    InvalidDeletion = 6,
    DegenerateDeletion = 7,
    Io = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrMethod {
    Retrain = 0,
    Newton = 1,
    Influence = 2,
    Gradient = 3,
    Residual = 4,
}

fn method_from_code(code: u32) -> Result<Method, Fail> {
    Ok(match code {
        c if c == PrMethod::Retrain as u32 => Method::Retrain,
        c if c == PrMethod::Newton as u32 => Method::Newton,
        c if c == PrMethod::Influence as u32 => Method::Influence,
        c if c == PrMethod::Gradient as u32 => Method::Gradient,
        c if c == PrMethod::Residual as u32 => Method::Residual,
        other => return Err(Fail(PrStatus::InvalidArgument, format!("unknown method code {other}"))),
    })
}

/// Owned training data.
pub struct PrDataset {
    inner: Dataset,
}

/// Ridge model with its precomputed hat state and a copy of its training data.
pub struct PrModel {
    data: Dataset,
    hat: HatState,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> PrStatus {
    match e {
        Error::DimensionMismatch { .. } => PrStatus::DimensionMismatch,
        Error::InvalidArgument(_) => PrStatus::InvalidArgument,
        Error::InvalidDeletion(_) => PrStatus::InvalidDeletion,
        Error::DegenerateDeletion(_) => PrStatus::DegenerateDeletion,
        Error::Singular { .. } | Error::SingularNormalEquations | Error::NotPositiveDefinite { .. } => {
            PrStatus::Singular
        }
        Error::Io(_) => PrStatus::Io,
        _ => PrStatus::DataError,
    }
}

struct Fail(PrStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(PrStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, recording its error message and converting panics.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> PrStatus {
    match panic::catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            PrStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            PrStatus::Panic
        }
    }
}

unsafe fn slice_in<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn slice_out<'a>(p: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

unsafe fn write_handle<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("output handle"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

fn check_len(what: &str, expected: usize, found: usize) -> Result<(), Fail> {
    if expected == found {
        Ok(())
    } else {
        Err(Fail(
            PrStatus::DimensionMismatch,
            format!("{what}: expected length {expected}, got {found}"),
        ))
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread, or an empty string.
/// Valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn pr_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Copies a row-major `n × d` matrix and `n` labels into a new dataset.
#[no_mangle]
pub unsafe extern "C" fn pr_dataset_new(
    x: *const f64,
    y: *const f64,
    n: usize,
    d: usize,
    out: *mut *mut PrDataset,
) -> PrStatus {
    guard(|| {
        let len = n.checked_mul(d).ok_or_else(|| Fail(PrStatus::InvalidArgument, "n * d overflows".into()))?;
        let x = slice_in(x, len, "x")?;
        let y = slice_in(y, n, "y")?;
        let m = DenseMatrix::from_row_major(n, d, x.to_vec())?;
        let inner = Dataset::new(m, y.to_vec())?;
        write_handle(out, PrDataset { inner })
    })
}

/// Loads a numeric CSV whose last column is the label.
#[no_mangle]
pub unsafe extern "C" fn pr_dataset_load_csv(path: *const c_char, has_header: bool, out: *mut *mut PrDataset) -> PrStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| Fail(PrStatus::InvalidArgument, "path is not UTF-8".into()))?;
        let inner = load_numeric_csv(path, has_header)?;
        write_handle(out, PrDataset { inner })
    })
}

/// Seeded synthetic sparse dataset with `n` rows and `d` features.
#[no_mangle]
pub unsafe extern "C" fn pr_dataset_generate(n: usize, d: usize, p: f64, seed: u64, out: *mut *mut PrDataset) -> PrStatus {
    guard(|| {
        let inner = gen_synthetic_sparse(n, d, p, seed)?;
        write_handle(out, PrDataset { inner })
    })
}

/// Number of rows, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn pr_dataset_rows(data: *const PrDataset) -> usize {
    data.as_ref().map_or(0, |d| d.inner.len())
}

/// Number of features, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn pr_dataset_cols(data: *const PrDataset) -> usize {
    data.as_ref().map_or(0, |d| d.inner.dim())
}

/// Releases a dataset. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn pr_dataset_free(data: *mut PrDataset) {
    if !data.is_null() {
        drop(Box::from_raw(data));
    }
}

/// Trains a ridge model and precomputes its hat state. The dataset is copied
/// and may be freed afterwards.
#[no_mangle]
pub unsafe extern "C" fn pr_model_train(data: *const PrDataset, lambda: f64, out: *mut *mut PrModel) -> PrStatus {
    guard(|| {
        let data = data.as_ref().ok_or_else(|| null("dataset"))?;
        let hat = HatState::new(&data.inner, lambda)?;
        write_handle(
            out,
            PrModel {
                data: data.inner.clone(),
                hat,
            },
        )
    })
}

/// Parameter count, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn pr_model_dim(model: *const PrModel) -> usize {
    model.as_ref().map_or(0, |m| m.hat.dim())
}

/// Copies θ into `out`, which must hold exactly `pr_model_dim` values.
#[no_mangle]
pub unsafe extern "C" fn pr_model_theta(model: *const PrModel, out: *mut f64, len: usize) -> PrStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        let theta = &model.hat.model().theta;
        check_len("theta buffer", theta.len(), len)?;
        slice_out(out, len, "theta buffer")?.copy_from_slice(theta);
        Ok(())
    })
}

/// Prediction `θᵀx` for one feature vector of length `pr_model_dim`.
#[no_mangle]
pub unsafe extern "C" fn pr_model_predict(model: *const PrModel, x: *const f64, len: usize, out: *mut f64) -> PrStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        let x = slice_in(x, len, "x")?;
        let y = model.hat.model().predict(x)?;
        *out.as_mut().ok_or_else(|| null("output"))? = y;
        Ok(())
    })
}

/// Parameters after deleting rows `indices[0..k]` with `method`, one of the
/// `PrMethod` values.
///
/// `alpha` is the gradient-method step size; pass NaN for the default.
/// The updated θ is written to `theta_out` (length `pr_model_dim`) and the
/// timed wall-clock seconds to `seconds_out` when it is non-null. The model
/// itself is not modified.
#[no_mangle]
pub unsafe extern "C" fn pr_model_unlearn(
    model: *const PrModel,
    method: u32,
    indices: *const usize,
    k: usize,
    alpha: f64,
    theta_out: *mut f64,
    len: usize,
    seconds_out: *mut f64,
) -> PrStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        let method = method_from_code(method)?;
        check_len("theta buffer", model.hat.dim(), len)?;
        let indices = slice_in(indices, k, "indices")?;
        let req = DeletionRequest::new(indices.to_vec(), model.data.len())?;
        let opts = MethodOptions {
            alpha: if alpha.is_nan() { None } else { Some(alpha) },
            rounds: 1,
        };
        let result = run_method(method, &model.data, &req, &model.hat, &opts)?;
        slice_out(theta_out, len, "theta buffer")?.copy_from_slice(&result.theta);
        if let Some(s) = seconds_out.as_mut() {
            *s = result.wall_time.as_secs_f64();
        }
        Ok(())
    })
}

/// Releases a model. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn pr_model_free(model: *mut PrModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

