//! C ABI for `monoracle`.
//!
//! Objects cross the boundary as opaque handles created by `*_new`,
//! `*_parse`, `*_draw`, `monoracle_fit*`, `monoracle_oracle` or
//! `monoracle_kernel_from_json`, and released with the matching `*_free`.
//! Every fallible function returns a [`MonoracleStatus`]; on failure the
//! message is kept per thread and read with [`monoracle_last_error`].
//! Results are written through out-pointers only on success.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use monoracle::criteria::{cv_value, estimate_density, mise_value};
use monoracle::selector::{oracle_kernel, refine, RefineOptions};
use monoracle::spectral::KernelFile;
use monoracle::{DensityModel, EmpiricalSpectrum, Error, FrequencyGrid, SampleSet, SpectralKernel};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MonoracleStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Precondition = 4,
    Io = 5,
    Panic = 6,
}

pub struct MonoracleModel(DensityModel);
pub struct MonoracleSample(SampleSet);
pub struct MonoracleKernel(SpectralKernel);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

struct Failure(MonoracleStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::InvalidArgument(_) => MonoracleStatus::InvalidArgument,
            Error::ModelSpec { .. } | Error::ParseValue { .. } | Error::Json(_) => {
                MonoracleStatus::Parse
            }
            Error::Io(_) => MonoracleStatus::Io,
            _ => MonoracleStatus::Precondition,
        };
        Failure(status, e.to_string())
    }
}

fn null(name: &str) -> Failure {
    Failure(MonoracleStatus::NullPointer, format!("{name} is null"))
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> MonoracleStatus {
    let outcome = catch_unwind(AssertUnwindSafe(body)).unwrap_or_else(|payload| {
        let text = payload
            .downcast_ref::<&str>()
            .map(|s| s.to_string())
            .or_else(|| payload.downcast_ref::<String>().cloned())
            .unwrap_or_else(|| "unknown panic".into());
        Err(Failure(MonoracleStatus::Panic, text))
    });
    match outcome {
        Ok(()) => {
            LAST_ERROR.with(|e| e.borrow_mut().clear());
            MonoracleStatus::Ok
        }
        Err(Failure(status, message)) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = message);
            status
        }
    }
}

unsafe fn borrow<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(name))
}

unsafe fn out<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(name))
}

unsafe fn text<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        Failure(
            MonoracleStatus::InvalidArgument,
            format!("{name} is not UTF-8"),
        )
    })
}

unsafe fn slice<'a>(p: *const f64, len: usize, name: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

fn boxed<T>(value: T) -> *mut T {
    Box::into_raw(Box::new(value))
}

/// Copies the calling thread's last error message, NUL-terminated and
/// truncated to `capacity` bytes, into `buffer`. Returns the full message
/// length excluding the terminator; 0 when the last call succeeded.
#[no_mangle]
pub unsafe extern "C" fn monoracle_last_error(buffer: *mut c_char, capacity: usize) -> usize {
    LAST_ERROR.with(|e| {
        let message = e.borrow();
        if !buffer.is_null() && capacity > 0 {
            let n = message.len().min(capacity - 1);
            ptr::copy_nonoverlapping(message.as_ptr().cast::<c_char>(), buffer, n);
            *buffer.add(n) = 0;
        }
        message.len()
    })
}

/// Parses a model spec such as `"gaussian:0,1"`.
#[no_mangle]
pub unsafe extern "C" fn monoracle_model_parse(
    spec: *const c_char,
    model: *mut *mut MonoracleModel,
) -> MonoracleStatus {
    guard(|| {
        let parsed: DensityModel = text(spec, "spec")?.parse()?;
        *out(model, "model")? = boxed(MonoracleModel(parsed));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn monoracle_model_free(model: *mut MonoracleModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Squared L2 norm of the model density.
#[no_mangle]
pub unsafe extern "C" fn monoracle_model_l2_norm_sq(
    model: *const MonoracleModel,
    value: *mut f64,
) -> MonoracleStatus {
    guard(|| {
        *out(value, "value")? = borrow(model, "model")?.0.l2_norm_sq();
        Ok(())
    })
}

/// Copies `len` observations into a new sample.
#[no_mangle]
pub unsafe extern "C" fn monoracle_sample_new(
    values: *const f64,
    len: usize,
    sample: *mut *mut MonoracleSample,
) -> MonoracleStatus {
    guard(|| {
        let set = SampleSet::new(slice(values, len, "values")?.to_vec())?;
        *out(sample, "sample")? = boxed(MonoracleSample(set));
        Ok(())
    })
}

/// Draws `n` observations from `model` with a seeded generator.
#[no_mangle]
pub unsafe extern "C" fn monoracle_sample_draw(
    model: *const MonoracleModel,
    n: usize,
    seed: u64,
    sample: *mut *mut MonoracleSample,
) -> MonoracleStatus {
    guard(|| {
        let set = borrow(model, "model")?.0.sample(n, seed)?;
        *out(sample, "sample")? = boxed(MonoracleSample(set));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn monoracle_sample_len(sample: *const MonoracleSample) -> usize {
    sample.as_ref().map_or(0, |s| s.0.len())
}

#[no_mangle]
pub unsafe extern "C" fn monoracle_sample_free(sample: *mut MonoracleSample) {
    if !sample.is_null() {
        drop(Box::from_raw(sample));
    }
}

/// Validated kernel from its transform values on the grid of band `band`
/// and resolution `t`.
#[no_mangle]
pub unsafe extern "C" fn monoracle_kernel_new(
    band: f64,
    t: u32,
    values: *const f64,
    len: usize,
    kernel: *mut *mut MonoracleKernel,
) -> MonoracleStatus {
    guard(|| {
        let grid = FrequencyGrid::new(band, t)?;
        let k = SpectralKernel::new(grid, slice(values, len, "values")?.to_vec())?;
        *out(kernel, "kernel")? = boxed(MonoracleKernel(k));
        Ok(())
    })
}

/// CV-optimal kernel, refined until the discretization gap drops below
/// `eps` (or the default resolution caps are hit).
#[no_mangle]
pub unsafe extern "C" fn monoracle_fit(
    sample: *const MonoracleSample,
    band: f64,
    eps: f64,
    kernel: *mut *mut MonoracleKernel,
) -> MonoracleStatus {
    guard(|| {
        let options = RefineOptions {
            eps,
            ..RefineOptions::default()
        };
        let (k, _) = refine(&borrow(sample, "sample")?.0, band, &options)?;
        *out(kernel, "kernel")? = boxed(MonoracleKernel(k));
        Ok(())
    })
}

/// CV-optimal kernel on the fixed grid `(band, t)`.
#[no_mangle]
pub unsafe extern "C" fn monoracle_fit_fixed(
    sample: *const MonoracleSample,
    band: f64,
    t: u32,
    kernel: *mut *mut MonoracleKernel,
) -> MonoracleStatus {
    guard(|| {
        let grid = FrequencyGrid::new(band, t)?;
        let spectrum = EmpiricalSpectrum::new(&borrow(sample, "sample")?.0, grid)?;
        let k = monoracle::selector::cv_optimal_kernel(&spectrum)?;
        *out(kernel, "kernel")? = boxed(MonoracleKernel(k));
        Ok(())
    })
}

/// MISE-optimal monotone kernel for `n` draws from `model`.
#[no_mangle]
pub unsafe extern "C" fn monoracle_oracle(
    model: *const MonoracleModel,
    n: usize,
    band: f64,
    t: u32,
    kernel: *mut *mut MonoracleKernel,
) -> MonoracleStatus {
    guard(|| {
        let grid = FrequencyGrid::new(band, t)?;
        let k = oracle_kernel(&borrow(model, "model")?.0, n, grid)?;
        *out(kernel, "kernel")? = boxed(MonoracleKernel(k));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn monoracle_kernel_free(kernel: *mut MonoracleKernel) {
    if !kernel.is_null() {
        drop(Box::from_raw(kernel));
    }
}

/// Number of grid bins; 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn monoracle_kernel_len(kernel: *const MonoracleKernel) -> usize {
    kernel.as_ref().map_or(0, |k| k.0.values().len())
}

#[no_mangle]
pub unsafe extern "C" fn monoracle_kernel_band(kernel: *const MonoracleKernel) -> f64 {
    kernel.as_ref().map_or(f64::NAN, |k| k.0.grid().band())
}

#[no_mangle]
pub unsafe extern "C" fn monoracle_kernel_resolution(kernel: *const MonoracleKernel) -> u32 {
    kernel.as_ref().map_or(0, |k| k.0.grid().resolution())
}

/// Copies the transform values into `buffer`, which must hold
/// `monoracle_kernel_len` entries.
#[no_mangle]
pub unsafe extern "C" fn monoracle_kernel_values(
    kernel: *const MonoracleKernel,
    buffer: *mut f64,
    capacity: usize,
) -> MonoracleStatus {
    guard(|| {
        let values = borrow(kernel, "kernel")?.0.values();
        if capacity < values.len() {
            return Err(Failure(
                MonoracleStatus::InvalidArgument,
                format!(
                    "buffer holds {capacity} values, kernel has {}",
                    values.len()
                ),
            ));
        }
        if buffer.is_null() {
            return Err(null("buffer"));
        }
        ptr::copy_nonoverlapping(values.as_ptr(), buffer, values.len());
        Ok(())
    })
}

/// Kernel value `K(x)` in the space domain.
#[no_mangle]
pub unsafe extern "C" fn monoracle_kernel_eval(
    kernel: *const MonoracleKernel,
    x: f64,
    value: *mut f64,
) -> MonoracleStatus {
    guard(|| {
        *out(value, "value")? = borrow(kernel, "kernel")?.0.evaluate(x);
        Ok(())
    })
}

/// Density estimate at `len` points, written to `values`.
#[no_mangle]
pub unsafe extern "C" fn monoracle_estimate(
    kernel: *const MonoracleKernel,
    sample: *const MonoracleSample,
    points: *const f64,
    len: usize,
    values: *mut f64,
) -> MonoracleStatus {
    guard(|| {
        let k = &borrow(kernel, "kernel")?.0;
        let s = &borrow(sample, "sample")?.0;
        let xs = slice(points, len, "points")?;
        if len > 0 && values.is_null() {
            return Err(null("values"));
        }
        let estimates = estimate_density(k, s, xs);
        if len > 0 {
            ptr::copy_nonoverlapping(estimates.as_ptr(), values, len);
        }
        Ok(())
    })
}

/// Exact MISE of `kernel` for `n` draws from `model`.
#[no_mangle]
pub unsafe extern "C" fn monoracle_mise(
    kernel: *const MonoracleKernel,
    model: *const MonoracleModel,
    n: usize,
    value: *mut f64,
) -> MonoracleStatus {
    guard(|| {
        if n == 0 {
            return Err(Failure(
                MonoracleStatus::InvalidArgument,
                "n must be positive".into(),
            ));
        }
        *out(value, "value")? =
            mise_value(&borrow(kernel, "kernel")?.0, &borrow(model, "model")?.0, n);
        Ok(())
    })
}

/// Cross-validation criterion of `kernel` on `sample`.
#[no_mangle]
pub unsafe extern "C" fn monoracle_cv(
    kernel: *const MonoracleKernel,
    sample: *const MonoracleSample,
    value: *mut f64,
) -> MonoracleStatus {
    guard(|| {
        let k = &borrow(kernel, "kernel")?.0;
        let spectrum = EmpiricalSpectrum::new(&borrow(sample, "sample")?.0, *k.grid())?;
        *out(value, "value")? = cv_value(k, &spectrum)?;
        Ok(())
    })
}

/// Serializes the kernel as `{"W": .., "t": .., "v": [..]}`. Release the
/// string with [`monoracle_string_free`].
#[no_mangle]
pub unsafe extern "C" fn monoracle_kernel_to_json(
    kernel: *const MonoracleKernel,
    json: *mut *mut c_char,
) -> MonoracleStatus {
    guard(|| {
        let doc = serde_json::to_string(&KernelFile::from(&borrow(kernel, "kernel")?.0))
            .map_err(Error::from)?;
        let c = CString::new(doc).map_err(|e| Failure(MonoracleStatus::Panic, e.to_string()))?;
        *out(json, "json")? = c.into_raw();
        Ok(())
    })
}

/// Parses and validates a kernel JSON document.
#[no_mangle]
pub unsafe extern "C" fn monoracle_kernel_from_json(
    json: *const c_char,
    kernel: *mut *mut MonoracleKernel,
) -> MonoracleStatus {
    guard(|| {
        let file: KernelFile = serde_json::from_str(text(json, "json")?).map_err(Error::from)?;
        let k = file.into_kernel()?;
        *out(kernel, "kernel")? = boxed(MonoracleKernel(k));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn monoracle_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
