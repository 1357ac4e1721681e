//! C ABI over `fmcw-core`.
//!
//! Objects cross the boundary as opaque handles created by `*_new` /
//! `*_synthesize` and released by the matching `*_free`. Every fallible
//! call returns an [`FmcwStatus`]; on failure a description is available
//! from [`fmcw_last_error`] until the next failing call on the same thread.
//! Panics are caught at the boundary and reported as `FMCW_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use fmcw_core::crb::crb_at_snr;
use fmcw_core::estimate::{estimate_targets, Algorithm, EstimatorOptions};
use fmcw_core::signal::synthesize_measurement;
use fmcw_core::spectral::{bias_prediction, GridSpec};
use fmcw_core::{Error, MeasurementMatrix, RadarConfig, Target};
use num_complex::Complex64;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FmcwStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidConfig = 3,
    /// The estimator or bound failed numerically (unresolved peaks,
    /// singular systems, non-finite derivatives).
    Numerical = 4,
    BufferTooSmall = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FmcwAlgorithm {
    Fft2d = 0,
    Music2d = 1,
    Lse = 2,
    Mle = 3,
}

impl From<FmcwAlgorithm> for Algorithm {
    fn from(a: FmcwAlgorithm) -> Self {
        match a {
            FmcwAlgorithm::Fft2d => Algorithm::Fft2d,
            FmcwAlgorithm::Music2d => Algorithm::Music2d,
            FmcwAlgorithm::Lse => Algorithm::Lse,
            FmcwAlgorithm::Mle => Algorithm::Mle,
        }
    }
}

/// Point target: amplitude, reflectivity phase (rad), range (m), angle (rad).
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FmcwTarget {
    pub a: f64,
    pub phi: f64,
    pub r: f64,
    pub theta: f64,
}

/// Estimated amplitude, lumped phase (rad), range (m) and angle (rad).
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FmcwEstimate {
    pub a: f64,
    pub psi: f64,
    pub r: f64,
    pub theta: f64,
}

/// Opaque radar configuration.
pub struct FmcwConfig(RadarConfig);

/// Opaque N×M measurement matrix.
pub struct FmcwMeasurement(MeasurementMatrix);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> FmcwStatus {
    match e {
        _ if e.is_numerical() => FmcwStatus::Numerical,
        Error::InvalidConfig(_) => FmcwStatus::InvalidConfig,
        _ => FmcwStatus::InvalidArgument,
    }
}

struct Fail(FmcwStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(FmcwStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, recording any error or panic.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> FmcwStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FmcwStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            FmcwStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

/// Message of the last failed call on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn fmcw_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Creates a configuration with half-wavelength element spacing.
///
/// # Safety
/// `out` must be valid for writing one pointer.
#[no_mangle]
pub unsafe extern "C" fn fmcw_config_new(
    carrier_hz: f64,
    bandwidth_hz: f64,
    sweep_time_s: f64,
    samples: usize,
    tx: usize,
    rx: usize,
    out: *mut *mut FmcwConfig,
) -> FmcwStatus {
    guard(|| {
        let cfg = RadarConfig::new(carrier_hz, bandwidth_hz, sweep_time_s, samples, tx, rx)?;
        write_out(out, Box::into_raw(Box::new(FmcwConfig(cfg))), "out")
    })
}

/// 77 GHz, 4 GHz bandwidth, 100 us sweep, 256 samples, 4×4 MIMO.
///
/// # Safety
/// `out` must be valid for writing one pointer.
#[no_mangle]
pub unsafe extern "C" fn fmcw_config_default(out: *mut *mut FmcwConfig) -> FmcwStatus {
    guard(|| write_out(out, Box::into_raw(Box::new(FmcwConfig(RadarConfig::automotive_77ghz()))), "out"))
}

/// # Safety
/// `config` must come from this library and not be used afterwards. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn fmcw_config_free(config: *mut FmcwConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Noise standard deviation giving `snr_db` for a target of amplitude `a`.
///
/// # Safety
/// `config` must be a live handle and `sigma` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn fmcw_sigma_for_snr(
    config: *const FmcwConfig,
    a: f64,
    snr_db: f64,
    sigma: *mut f64,
) -> FmcwStatus {
    guard(|| {
        let cfg = &deref(config, "config")?.0;
        write_out(sigma, cfg.sigma_for_snr(a, snr_db), "sigma")
    })
}

fn targets_from(p: *const FmcwTarget, k: usize) -> Result<Vec<Target>, Fail> {
    if k == 0 {
        return Ok(Vec::new());
    }
    if p.is_null() {
        return Err(null("targets"));
    }
    // SAFETY: the caller guarantees `k` readable elements.
    let s = unsafe { std::slice::from_raw_parts(p, k) };
    Ok(s.iter().map(|t| Target::new(t.a, t.phi, t.r, t.theta)).collect())
}

/// Synthesizes `k` targets plus complex Gaussian noise of std `sigma`.
///
/// # Safety
/// `targets` must point to `k` elements; `out` must be valid for writing.
#[no_mangle]
pub unsafe extern "C" fn fmcw_measurement_synthesize(
    config: *const FmcwConfig,
    targets: *const FmcwTarget,
    k: usize,
    sigma: f64,
    seed: u64,
    out: *mut *mut FmcwMeasurement,
) -> FmcwStatus {
    guard(|| {
        let cfg = &deref(config, "config")?.0;
        let z = synthesize_measurement(cfg, &targets_from(targets, k)?, sigma, seed)?;
        write_out(out, Box::into_raw(Box::new(FmcwMeasurement(z))), "out")
    })
}

/// Wraps caller samples: `len` doubles as interleaved (re, im) pairs,
/// row-major N×M.
///
/// # Safety
/// `samples` must point to `len` doubles; `out` must be valid for writing.
#[no_mangle]
pub unsafe extern "C" fn fmcw_measurement_from_samples(
    config: *const FmcwConfig,
    samples: *const f64,
    len: usize,
    sigma: f64,
    out: *mut *mut FmcwMeasurement,
) -> FmcwStatus {
    guard(|| {
        let cfg = &deref(config, "config")?.0;
        if samples.is_null() {
            return Err(null("samples"));
        }
        if len % 2 != 0 {
            return Err(Fail(FmcwStatus::InvalidArgument, "sample buffer length must be even".into()));
        }
        let raw = std::slice::from_raw_parts(samples, len);
        let data: Vec<Complex64> = raw.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect();
        let z = MeasurementMatrix::from_parts(data, *cfg, sigma, None)?;
        write_out(out, Box::into_raw(Box::new(FmcwMeasurement(z))), "out")
    })
}

/// Rows (range samples) and columns (virtual elements).
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn fmcw_measurement_dims(
    z: *const FmcwMeasurement,
    rows: *mut usize,
    cols: *mut usize,
) -> FmcwStatus {
    guard(|| {
        let z = &deref(z, "measurement")?.0;
        write_out(rows, z.rows(), "rows")?;
        write_out(cols, z.cols(), "cols")
    })
}

/// Copies entry (n, m) as (re, im).
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn fmcw_measurement_get(
    z: *const FmcwMeasurement,
    n: usize,
    m: usize,
    re: *mut f64,
    im: *mut f64,
) -> FmcwStatus {
    guard(|| {
        let z = &deref(z, "measurement")?.0;
        if n >= z.rows() || m >= z.cols() {
            return Err(Fail(FmcwStatus::InvalidArgument, format!("index ({n}, {m}) out of bounds")));
        }
        let v = z.get(n, m);
        write_out(re, v.re, "re")?;
        write_out(im, v.im, "im")
    })
}

/// # Safety
/// `z` must come from this library and not be used afterwards. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn fmcw_measurement_free(z: *mut FmcwMeasurement) {
    if !z.is_null() {
        drop(Box::from_raw(z));
    }
}

/// Estimates `k` targets. `oversample` is the fine-grid factor of the
/// grid-based algorithms; the ML estimator ignores it. `out` receives up to `out_len` estimates
/// and `written` their count; fewer than `k` slots give
/// `FMCW_STATUS_BUFFER_TOO_SMALL` with `written` set to `k`.
///
/// # Safety
/// `out` must point to `out_len` writable elements; `written` must be valid.
#[no_mangle]
pub unsafe extern "C" fn fmcw_estimate(
    z: *const FmcwMeasurement,
    algorithm: FmcwAlgorithm,
    k: usize,
    oversample: u32,
    out: *mut FmcwEstimate,
    out_len: usize,
    written: *mut usize,
) -> FmcwStatus {
    guard(|| {
        let z = &deref(z, "measurement")?.0;
        if written.is_null() {
            return Err(null("written"));
        }
        if out_len < k {
            written.write(k);
            return Err(Fail(FmcwStatus::BufferTooSmall, format!("{k} slots needed, {out_len} given")));
        }
        if out.is_null() && k > 0 {
            return Err(null("out"));
        }
        let opts = EstimatorOptions {
            grid: GridSpec::uniform(oversample as usize),
            ..EstimatorOptions::default()
        };
        let est = estimate_targets(algorithm.into(), z, k, &opts)?;
        let dst = std::slice::from_raw_parts_mut(out, est.estimates.len());
        for (d, e) in dst.iter_mut().zip(&est.estimates) {
            *d = FmcwEstimate {
                a: e.a,
                psi: e.psi,
                r: e.r,
                theta: e.theta,
            };
        }
        written.write(est.estimates.len());
        Ok(())
    })
}

/// Cramér–Rao standard deviations of range (m) and angle (rad) for one
/// target at `snr_db`.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn fmcw_crb(
    config: *const FmcwConfig,
    target: *const FmcwTarget,
    snr_db: f64,
    sigma_r: *mut f64,
    sigma_theta: *mut f64,
) -> FmcwStatus {
    guard(|| {
        let cfg = &deref(config, "config")?.0;
        let t = deref(target, "target")?;
        let c = crb_at_snr(cfg, &Target::new(t.a, t.phi, t.r, t.theta), snr_db)?;
        write_out(sigma_r, c.sigma_r, "sigma_r")?;
        write_out(sigma_theta, c.sigma_theta, "sigma_theta")
    })
}

/// Predicted 2D-FFT range (m) and angle (rad) bias for a target at `theta` rad.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn fmcw_bias(
    config: *const FmcwConfig,
    theta: f64,
    range_bias: *mut f64,
    angle_bias: *mut f64,
) -> FmcwStatus {
    guard(|| {
        let cfg = &deref(config, "config")?.0;
        let (r, t) = bias_prediction(cfg, theta)?;
        write_out(range_bias, r, "range_bias")?;
        write_out(angle_bias, t, "angle_bias")
    })
}
