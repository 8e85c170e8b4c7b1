//! C ABI for the prvbem phase retrieval library.
//!
//! Complex arrays cross the boundary as interleaved `(re, im)` pairs of
//! `double`; matrices are column-major. Every entry point returns a
//! [`PrvbemStatus`] and never unwinds into the caller. On failure a message
//! is kept per thread and can be read with [`prvbem_last_error_message`].

#![deny(unsafe_op_in_unsafe_fn)]

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use prvbem::gs::{gs_solve, GsInit};
use prvbem::metrics::recovery_correlation;
use prvbem::synth::{gen_matrix, gen_observations, gen_signal};
use prvbem::{
    bessel, CMatrix, Complex64, Error, MeasurementEnsemble, ModelParams, SolverConfig,
};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrvbemStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    RankDeficient = 4,
    Io = 5,
    Panic = 6,
}

/// Measurement matrix and modulus observations. Create with
/// [`prvbem_ensemble_new`], release with [`prvbem_ensemble_free`].
pub struct PrvbemEnsemble {
    inner: MeasurementEnsemble,
}

/// Solver settings. Obtain defaults from [`prvbem_solve_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PrvbemSolveOptions {
    pub max_iters: usize,
    /// Stop once the free energy drops by less than this.
    pub kl_tol: f64,
    /// Noise variance floor, relative to `max(1, y^H y / M)`.
    pub sigma_n2_floor: f64,
    pub restarts: usize,
    pub seed: u64,
    /// Also run the prior-variance M-step.
    pub estimate_signal_var: bool,
}

/// Summary of a prVBEM run.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct PrvbemSolveInfo {
    pub iterations: usize,
    pub converged: bool,
    pub free_energy: f64,
    pub sigma_n2_hat: f64,
    pub sigma_x2: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_last_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(err: &Error) -> PrvbemStatus {
    match err {
        Error::InvalidArgument(_) | Error::Parse { .. } => PrvbemStatus::InvalidArgument,
        Error::DimensionMismatch(_) => PrvbemStatus::DimensionMismatch,
        Error::RankDeficient { .. } => PrvbemStatus::RankDeficient,
        Error::Io { .. } | Error::Csv { .. } => PrvbemStatus::Io,
    }
}

struct Failure(PrvbemStatus, String);

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        Failure(status_of(&err), err.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(PrvbemStatus::NullPointer, format!("{what} is null"))
}

fn invalid(message: String) -> Failure {
    Failure(PrvbemStatus::InvalidArgument, message)
}

fn guard<F>(f: F) -> PrvbemStatus
where
    F: FnOnce() -> Result<(), Failure>,
{
    clear_last_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PrvbemStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_last_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".to_string());
            set_last_error(format!("panic: {message}"));
            PrvbemStatus::Panic
        }
    }
}

unsafe fn read_slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    // SAFETY: the caller guarantees `len` readable elements at `p`.
    Ok(unsafe { slice::from_raw_parts(p, len) })
}

unsafe fn write_slice<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    // SAFETY: the caller guarantees `len` writable elements at `p`.
    Ok(unsafe { slice::from_raw_parts_mut(p, len) })
}

unsafe fn ensemble_ref<'a>(e: *const PrvbemEnsemble) -> Result<&'a MeasurementEnsemble, Failure> {
    if e.is_null() {
        return Err(null("ensemble"));
    }
    // SAFETY: non-null handles come from `prvbem_ensemble_new`.
    Ok(unsafe { &(*e).inner })
}

fn complex_len(n: usize, what: &str) -> Result<usize, Failure> {
    n.checked_mul(2)
        .ok_or_else(|| invalid(format!("{what}: length {n} overflows")))
}

fn to_complex(pairs: &[f64]) -> Vec<Complex64> {
    pairs.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect()
}

fn store_complex(values: &[Complex64], out: &mut [f64]) {
    for (v, pair) in values.iter().zip(out.chunks_exact_mut(2)) {
        pair[0] = v.re;
        pair[1] = v.im;
    }
}

fn check_out_len(got: usize, want: usize, what: &str) -> Result<(), Failure> {
    if got != want {
        return Err(Failure(
            PrvbemStatus::DimensionMismatch,
            format!("{what} has {got} entries, expected {want}"),
        ));
    }
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn prvbem_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread, or NULL. Valid until the
/// next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn prvbem_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Short description of a status code as a static string. Unknown codes
/// map to "unknown status".
#[no_mangle]
pub extern "C" fn prvbem_status_str(status: c_int) -> *const c_char {
    let s: &'static CStr = match status {
        0 => c"ok",
        1 => c"null pointer",
        2 => c"invalid argument",
        3 => c"dimension mismatch",
        4 => c"rank deficient",
        5 => c"i/o error",
        6 => c"internal panic",
        _ => c"unknown status",
    };
    s.as_ptr()
}

/// Builds an ensemble from a column-major `rows x cols` complex matrix
/// (`2 * rows * cols` doubles) and `rows` nonnegative moduli.
///
/// # Safety
/// `d` and `y` must point to that many readable doubles and `out` must be
/// writable. The handle written to `out` must be released with
/// [`prvbem_ensemble_free`].
#[no_mangle]
pub unsafe extern "C" fn prvbem_ensemble_new(
    rows: usize,
    cols: usize,
    d: *const f64,
    y: *const f64,
    out: *mut *mut PrvbemEnsemble,
) -> PrvbemStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let entries = rows
            .checked_mul(cols)
            .ok_or_else(|| invalid(format!("{rows}x{cols} overflows")))?;
        // SAFETY: lengths are the caller's contract.
        let d = unsafe { read_slice(d, complex_len(entries, "d")?, "d")? };
        let y = unsafe { read_slice(y, rows, "y")? };
        let matrix = CMatrix::from_vec(rows, cols, to_complex(d));
        let inner = MeasurementEnsemble::new(matrix, y.to_vec())?;
        let handle = Box::into_raw(Box::new(PrvbemEnsemble { inner }));
        // SAFETY: `out` checked non-null above.
        unsafe { *out = handle };
        Ok(())
    })
}

/// Releases an ensemble. NULL is ignored.
///
/// # Safety
/// `ensemble` must be NULL or a handle from [`prvbem_ensemble_new`] that has
/// not been freed.
#[no_mangle]
pub unsafe extern "C" fn prvbem_ensemble_free(ensemble: *mut PrvbemEnsemble) {
    if !ensemble.is_null() {
        // SAFETY: ownership returns to Rust exactly once.
        drop(unsafe { Box::from_raw(ensemble) });
    }
}

/// Number of measurements `M`, or 0 for NULL.
///
/// # Safety
/// `ensemble` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn prvbem_ensemble_rows(ensemble: *const PrvbemEnsemble) -> usize {
    // SAFETY: the caller's contract.
    unsafe { ensemble_ref(ensemble) }.map_or(0, |e| e.rows())
}

/// Signal length `N`, or 0 for NULL.
///
/// # Safety
/// `ensemble` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn prvbem_ensemble_cols(ensemble: *const PrvbemEnsemble) -> usize {
    // SAFETY: the caller's contract.
    unsafe { ensemble_ref(ensemble) }.map_or(0, |e| e.cols())
}

/// Default solver settings.
#[no_mangle]
pub extern "C" fn prvbem_solve_options_default() -> PrvbemSolveOptions {
    let c = SolverConfig::default();
    PrvbemSolveOptions {
        max_iters: c.max_iters,
        kl_tol: c.kl_tol,
        sigma_n2_floor: c.sigma_n2_floor,
        restarts: c.restarts,
        seed: c.seed,
        estimate_signal_var: false,
    }
}

/// Runs prVBEM with both variances unknown and writes the `N` posterior
/// means to `x_out` as `2 * x_len` doubles.
///
/// # Safety
/// `options` and `info` may be NULL (defaults are used, no summary is
/// written); otherwise they must be valid. `x_out` must hold `2 * x_len`
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn prvbem_solve(
    ensemble: *const PrvbemEnsemble,
    options: *const PrvbemSolveOptions,
    x_out: *mut f64,
    x_len: usize,
    info: *mut PrvbemSolveInfo,
) -> PrvbemStatus {
    guard(|| {
        // SAFETY: the caller's contract.
        let ens = unsafe { ensemble_ref(ensemble)? };
        let opts = if options.is_null() {
            prvbem_solve_options_default()
        } else {
            // SAFETY: non-null options are readable.
            unsafe { *options }
        };
        check_out_len(x_len, ens.cols(), "x_out")?;
        let out = unsafe { write_slice(x_out, complex_len(x_len, "x_out")?, "x_out")? };
        let config = SolverConfig {
            max_iters: opts.max_iters,
            kl_tol: opts.kl_tol,
            sigma_n2_floor: opts.sigma_n2_floor,
            restarts: opts.restarts,
            seed: opts.seed,
            ..SolverConfig::default()
        };
        let params = ModelParams::blind(ens).with_signal_var_estimation(opts.estimate_signal_var);
        let sol = prvbem::solve(ens, &params, &config)?;
        store_complex(&sol.x_hat, out);
        if !info.is_null() {
            let summary = PrvbemSolveInfo {
                iterations: sol.iterations,
                converged: sol.converged,
                free_energy: sol.state.free_energy,
                sigma_n2_hat: sol.state.sigma_n2_hat,
                sigma_x2: sol.state.sigma_x2,
            };
            // SAFETY: non-null `info` is writable.
            unsafe { *info = summary };
        }
        Ok(())
    })
}

/// Runs `iters` Gerchberg-Saxton iterations from a seeded random start and
/// writes the estimate to `x_out` as `2 * x_len` doubles.
///
/// # Safety
/// `ensemble` must be a live handle and `x_out` must hold `2 * x_len`
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn prvbem_gs_solve(
    ensemble: *const PrvbemEnsemble,
    iters: usize,
    seed: u64,
    x_out: *mut f64,
    x_len: usize,
) -> PrvbemStatus {
    guard(|| {
        // SAFETY: the caller's contract.
        let ens = unsafe { ensemble_ref(ensemble)? };
        check_out_len(x_len, ens.cols(), "x_out")?;
        let out = unsafe { write_slice(x_out, complex_len(x_len, "x_out")?, "x_out")? };
        let (x_hat, _) = gs_solve(ens, iters, GsInit::Random, seed)?;
        store_complex(&x_hat, out);
        Ok(())
    })
}

/// Phase-invariant correlation between two complex vectors of length `n`.
///
/// # Safety
/// `x_hat` and `x_true` must hold `2 * n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn prvbem_recovery_correlation(
    x_hat: *const f64,
    x_true: *const f64,
    n: usize,
    out: *mut f64,
) -> PrvbemStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let len = complex_len(n, "n")?;
        // SAFETY: the caller's contract.
        let a = unsafe { read_slice(x_hat, len, "x_hat")? };
        let b = unsafe { read_slice(x_true, len, "x_true")? };
        let r = recovery_correlation(&to_complex(a), &to_complex(b))?;
        // SAFETY: checked non-null.
        unsafe { *out = r };
        Ok(())
    })
}

fn concentration(kappa: f64) -> Result<bessel::Concentration, Failure> {
    Ok(bessel::Concentration::new(kappa)?)
}

/// `I1(kappa) / I0(kappa)` for `kappa >= 0`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn prvbem_bessel_ratio(kappa: f64, out: *mut f64) -> PrvbemStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let r = bessel::bessel_ratio(concentration(kappa)?);
        // SAFETY: checked non-null.
        unsafe { *out = r };
        Ok(())
    })
}

/// `ln I0(kappa)` for `kappa >= 0`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn prvbem_log_bessel_i0(kappa: f64, out: *mut f64) -> PrvbemStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let r = bessel::log_bessel_i0(concentration(kappa)?);
        // SAFETY: checked non-null.
        unsafe { *out = r };
        Ok(())
    })
}

/// Draws a synthetic instance: `D` with `CN(0, 1/rows)` entries
/// (column-major, `2 * rows * cols` doubles), `x ~ CN(0, sigma_x2)`
/// (`2 * cols` doubles) and `y = |D x + n|` (`rows` doubles). `x_out` may be
/// NULL.
///
/// # Safety
/// Non-null buffers must have the sizes above.
#[no_mangle]
pub unsafe extern "C" fn prvbem_synth_instance(
    rows: usize,
    cols: usize,
    sigma_x2: f64,
    sigma_n2: f64,
    seed: u64,
    d_out: *mut f64,
    y_out: *mut f64,
    x_out: *mut f64,
) -> PrvbemStatus {
    guard(|| {
        use prvbem::rng::{derive_seed, stream};
        let entries = rows
            .checked_mul(cols)
            .ok_or_else(|| invalid(format!("{rows}x{cols} overflows")))?;
        let d = gen_matrix(rows, cols, derive_seed(seed, &[stream::MATRIX]))?;
        let x = gen_signal(cols, sigma_x2, derive_seed(seed, &[stream::SIGNAL]))?;
        let (y, _) = gen_observations(&d, &x, sigma_n2, derive_seed(seed, &[stream::NOISE]))?;
        // SAFETY: the caller's contract.
        let d_buf = unsafe { write_slice(d_out, complex_len(entries, "d_out")?, "d_out")? };
        let y_buf = unsafe { write_slice(y_out, rows, "y_out")? };
        store_complex(d.as_slice(), d_buf);
        y_buf.copy_from_slice(&y);
        if !x_out.is_null() {
            let x_buf = unsafe { write_slice(x_out, complex_len(cols, "x_out")?, "x_out")? };
            store_complex(&x, x_buf);
        }
        Ok(())
    })
}
