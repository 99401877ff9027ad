//! C ABI for the `sbltomo` solver.
//!
//! Steering matrices and solver results are opaque heap handles created and
//! released through this API. Every fallible call returns an
//! [`SbltomoStatus`]; the message of the most recent failure on the calling
//! thread is available from [`sbltomo_last_error_message`]. Complex vectors
//! cross the boundary as interleaved `re, im` `double` pairs.
//!
//! No call unwinds across the boundary: panics are caught and reported as
//! [`SbltomoStatus::Panic`].

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use sbltomo::metrics::{angular_bias, crlb_elevation};
use sbltomo::sbl::NoiseDenominator;
use sbltomo::{
    sbl_solve, AcquisitionGeometry, DVector, ElevationGrid, Error, SblOptions, SblResult,
    SteeringMatrix, C64,
};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SbltomoStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    DimensionOverflow = 4,
    IllConditioned = 5,
    Numerical = 6,
    Panic = 7,
}

/// How the noise update counts well-determined parameters.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SbltomoNoiseDenominator {
    /// `N − Σ (1 − Σ_ii / w_i)`.
    Mackay = 0,
    /// `N − Σ Σ_ii / w_i`.
    Literal = 1,
}

/// Solver options; obtain defaults from [`sbltomo_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SbltomoOptions {
    pub max_iterations: u32,
    pub tolerance: f64,
    pub prune_threshold: f64,
    pub noise_floor: f64,
    /// Known noise variance; a non-positive or NaN value means "learn it".
    pub fixed_noise: f64,
    pub max_scatterers: u32,
    pub noise_denominator: SbltomoNoiseDenominator,
}

/// Opaque steering matrix over an acquisition geometry and elevation grid.
pub struct SbltomoSteering {
    inner: SteeringMatrix,
}

/// Opaque outcome of one inversion.
pub struct SbltomoResult {
    inner: SblResult,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(message: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = message.into());
}

fn status_of(err: &Error) -> SbltomoStatus {
    match err {
        Error::DimensionMismatch { .. } => SbltomoStatus::DimensionMismatch,
        Error::DimensionOverflow { .. } => SbltomoStatus::DimensionOverflow,
        Error::IllConditioned(_) => SbltomoStatus::IllConditioned,
        Error::Eigen(_) => SbltomoStatus::Numerical,
        _ => SbltomoStatus::InvalidArgument,
    }
}

/// Run `f`, translating errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (SbltomoStatus, String)>) -> SbltomoStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SbltomoStatus::Ok,
        Ok(Err((status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic");
            SbltomoStatus::Panic
        }
    }
}

fn lib_err(err: Error) -> (SbltomoStatus, String) {
    (status_of(&err), err.to_string())
}

fn null(what: &str) -> (SbltomoStatus, String) {
    (SbltomoStatus::NullPointer, format!("`{what}` is null"))
}

unsafe fn doubles<'a>(
    p: *const f64,
    len: usize,
    what: &str,
) -> Result<&'a [f64], (SbltomoStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn complex_vector(
    p: *const f64,
    n: usize,
    what: &str,
) -> Result<DVector<C64>, (SbltomoStatus, String)> {
    let raw = doubles(p, 2 * n, what)?;
    Ok(DVector::from_iterator(
        n,
        raw.chunks_exact(2).map(|c| C64::new(c[0], c[1])),
    ))
}

impl From<SbltomoOptions> for SblOptions {
    fn from(o: SbltomoOptions) -> Self {
        SblOptions {
            max_iterations: o.max_iterations as usize,
            tolerance: o.tolerance,
            prune_threshold: o.prune_threshold,
            noise_floor: o.noise_floor,
            fixed_noise: (o.fixed_noise > 0.0).then_some(o.fixed_noise),
            trace: false,
            max_scatterers: o.max_scatterers as usize,
            noise_denominator: match o.noise_denominator {
                SbltomoNoiseDenominator::Mackay => NoiseDenominator::Mackay,
                SbltomoNoiseDenominator::Literal => NoiseDenominator::Literal,
            },
        }
    }
}

/// Default solver options.
#[no_mangle]
pub extern "C" fn sbltomo_options_default() -> SbltomoOptions {
    let d = SblOptions::default();
    SbltomoOptions {
        max_iterations: d.max_iterations as u32,
        tolerance: d.tolerance,
        prune_threshold: d.prune_threshold,
        noise_floor: d.noise_floor,
        fixed_noise: d.fixed_noise.unwrap_or(0.0),
        max_scatterers: d.max_scatterers as u32,
        noise_denominator: SbltomoNoiseDenominator::Mackay,
    }
}

/// Static, NUL-terminated description of `status`.
#[no_mangle]
pub extern "C" fn sbltomo_status_string(status: SbltomoStatus) -> *const c_char {
    let s: &'static CStr = match status {
        SbltomoStatus::Ok => c"ok",
        SbltomoStatus::NullPointer => c"null pointer",
        SbltomoStatus::InvalidArgument => c"invalid argument",
        SbltomoStatus::DimensionMismatch => c"dimension mismatch",
        SbltomoStatus::DimensionOverflow => c"dimension overflow",
        SbltomoStatus::IllConditioned => c"ill-conditioned system",
        SbltomoStatus::Numerical => c"numerical failure",
        SbltomoStatus::Panic => c"internal panic",
    };
    s.as_ptr()
}

/// Copy the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to `len - 1` bytes) and return the full message length. Pass a
/// null `buf` to query the length.
#[no_mangle]
pub unsafe extern "C" fn sbltomo_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Build the steering matrix for `n` perpendicular baselines (m) over the
/// grid `s_min..=s_max` with `spacing` (m). On success `*out` owns a handle to
/// release with [`sbltomo_steering_free`].
#[no_mangle]
pub unsafe extern "C" fn sbltomo_steering_new(
    wavelength: f64,
    slant_range: f64,
    baselines: *const f64,
    n: usize,
    s_min: f64,
    s_max: f64,
    spacing: f64,
    out: *mut *mut SbltomoSteering,
) -> SbltomoStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let baselines = doubles(baselines, n, "baselines")?.to_vec();
        let geometry =
            AcquisitionGeometry::new(wavelength, slant_range, baselines).map_err(lib_err)?;
        let grid = ElevationGrid::new(s_min, s_max, spacing).map_err(lib_err)?;
        let inner = SteeringMatrix::build(&geometry, &grid).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(SbltomoSteering { inner }));
        Ok(())
    })
}

/// Release a steering handle; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn sbltomo_steering_free(steering: *mut SbltomoSteering) {
    if !steering.is_null() {
        drop(Box::from_raw(steering));
    }
}

/// Number of acquisitions `N` (0 for null).
#[no_mangle]
pub unsafe extern "C" fn sbltomo_steering_rows(steering: *const SbltomoSteering) -> usize {
    steering.as_ref().map_or(0, |s| s.inner.nrows())
}

/// Number of grid positions `L` (0 for null).
#[no_mangle]
pub unsafe extern "C" fn sbltomo_steering_cols(steering: *const SbltomoSteering) -> usize {
    steering.as_ref().map_or(0, |s| s.inner.ncols())
}

/// Rayleigh elevation resolution (m); NaN for null.
#[no_mangle]
pub unsafe extern "C" fn sbltomo_steering_rayleigh_resolution(
    steering: *const SbltomoSteering,
) -> f64 {
    steering
        .as_ref()
        .map_or(f64::NAN, |s| s.inner.geometry().rayleigh_resolution())
}

/// Single-scatterer elevation CRLB (m) at linear SNR `snr`.
#[no_mangle]
pub unsafe extern "C" fn sbltomo_crlb_elevation(
    steering: *const SbltomoSteering,
    snr: f64,
    out: *mut f64,
) -> SbltomoStatus {
    guard(|| {
        let s = steering.as_ref().ok_or_else(|| null("steering"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = crlb_elevation(s.inner.geometry(), snr).map_err(lib_err)?;
        Ok(())
    })
}

/// Angle (radians) between two complex vectors of length `n`, given as
/// interleaved pairs, ignoring a global phase.
#[no_mangle]
pub unsafe extern "C" fn sbltomo_angular_bias(
    a: *const f64,
    b: *const f64,
    n: usize,
    out: *mut f64,
) -> SbltomoStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let a = complex_vector(a, n, "a")?;
        let b = complex_vector(b, n, "b")?;
        *out = angular_bias(&a, &b).map_err(lib_err)?;
        Ok(())
    })
}

/// Invert one snapshot of `n` complex samples (interleaved `re, im`). A null
/// `options` uses the defaults. On success `*out` owns a handle to release
/// with [`sbltomo_result_free`].
#[no_mangle]
pub unsafe extern "C" fn sbltomo_solve(
    steering: *const SbltomoSteering,
    g: *const f64,
    n: usize,
    options: *const SbltomoOptions,
    out: *mut *mut SbltomoResult,
) -> SbltomoStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let s = steering.as_ref().ok_or_else(|| null("steering"))?;
        let options: SblOptions = options
            .as_ref()
            .copied()
            .unwrap_or_else(|| sbltomo_options_default())
            .into();
        let g = complex_vector(g, n, "g")?;
        let inner = sbl_solve(&g, &s.inner, &options).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(SbltomoResult { inner }));
        Ok(())
    })
}

/// Release a result handle; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn sbltomo_result_free(result: *mut SbltomoResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// Number of detected scatterers (0 for null).
#[no_mangle]
pub unsafe extern "C" fn sbltomo_result_count(result: *const SbltomoResult) -> usize {
    result.as_ref().map_or(0, |r| r.inner.scatterers.len())
}

/// Scatterer `index` in ascending elevation: position (m), grid index and
/// complex amplitude. Any output pointer may be null.
#[no_mangle]
pub unsafe extern "C" fn sbltomo_result_scatterer(
    result: *const SbltomoResult,
    index: usize,
    elevation: *mut f64,
    grid_index: *mut usize,
    amplitude_re: *mut f64,
    amplitude_im: *mut f64,
) -> SbltomoStatus {
    guard(|| {
        let r = result.as_ref().ok_or_else(|| null("result"))?;
        let d = r.inner.scatterers.get(index).ok_or_else(|| {
            (
                SbltomoStatus::InvalidArgument,
                format!(
                    "scatterer index {index} out of range ({} found)",
                    r.inner.scatterers.len()
                ),
            )
        })?;
        if let Some(p) = elevation.as_mut() {
            *p = d.elevation;
        }
        if let Some(p) = grid_index.as_mut() {
            *p = d.grid_index;
        }
        if let Some(p) = amplitude_re.as_mut() {
            *p = d.amplitude.re;
        }
        if let Some(p) = amplitude_im.as_mut() {
            *p = d.amplitude.im;
        }
        Ok(())
    })
}

/// Iterations performed (0 for null).
#[no_mangle]
pub unsafe extern "C" fn sbltomo_result_iterations(result: *const SbltomoResult) -> usize {
    result.as_ref().map_or(0, |r| r.inner.state.iteration)
}

/// Whether the solver met its convergence test (false for null).
#[no_mangle]
pub unsafe extern "C" fn sbltomo_result_converged(result: *const SbltomoResult) -> bool {
    result.as_ref().is_some_and(|r| r.inner.converged)
}

/// Final noise variance σ² (NaN for null).
#[no_mangle]
pub unsafe extern "C" fn sbltomo_result_noise_variance(result: *const SbltomoResult) -> f64 {
    result.as_ref().map_or(f64::NAN, |r| r.inner.state.sigma2)
}

/// Copy the learned prior variances `w` (one per grid position) into `out`,
/// which must hold exactly `len == L` doubles.
#[no_mangle]
pub unsafe extern "C" fn sbltomo_result_weights(
    result: *const SbltomoResult,
    out: *mut f64,
    len: usize,
) -> SbltomoStatus {
    guard(|| {
        let r = result.as_ref().ok_or_else(|| null("result"))?;
        let w = &r.inner.state.w;
        if len != w.len() {
            return Err(lib_err(Error::DimensionMismatch {
                expected: w.len(),
                actual: len,
                context: "weights buffer length vs grid size",
            }));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        slice::from_raw_parts_mut(out, len).copy_from_slice(w);
        Ok(())
    })
}
