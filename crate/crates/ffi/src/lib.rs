//! C ABI for the rosdos denoiser.
//!
//! Matrices cross the boundary as opaque [`RosdosMatrix`] handles. A
//! matrix has `rows` features and `cols` samples, so each sample is a
//! column; buffers passed in or out are row-major (`rows × cols`).
//!
//! Every fallible call returns a [`RosdosStatus`]. On failure the message is
//! available from [`rosdos_last_error_message`] on the same thread. Panics
//! never unwind into C; they are reported as `ROSDOS_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use rosdos::diffusion::Bandwidth;
use rosdos::synth::{ManifoldKind, NoiseKind};
use rosdos::{DataMatrix, Error, GlobalMode, PipelineConfig};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RosdosStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NonFinite = 3,
    DimensionMismatch = 4,
    Numerical = 5,
    Io = 6,
    Panic = 7,
}

/// Step-1 metric of the denoiser.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RosdosMode {
    Roseland = 0,
    GlobalShrink = 1,
    ShrinkOnly = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RosdosManifold {
    M1 = 0,
    M3 = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RosdosNoise {
    Gaussian = 0,
    Separable = 1,
}

/// Denoiser settings. Start from [`rosdos_config_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct RosdosConfig {
    pub mode: RosdosMode,
    /// Kernel bandwidth; zero or negative selects the median heuristic.
    pub bandwidth: f64,
    /// Landmark exponent: `round(n^gamma)` landmarks.
    pub gamma: f64,
    pub embed_dim: usize,
    pub diffusion_time: f64,
    /// `K`, candidate neighbors.
    pub global_neighbors: usize,
    /// `k`, neighbors whose median replaces each point.
    pub local_neighbors: usize,
    pub imputation_count: usize,
    pub center: bool,
    pub seed: u64,
}

impl From<&RosdosConfig> for PipelineConfig {
    fn from(c: &RosdosConfig) -> Self {
        PipelineConfig {
            global_mode: match c.mode {
                RosdosMode::Roseland => GlobalMode::Roseland,
                RosdosMode::GlobalShrink => GlobalMode::GlobalShrink,
                RosdosMode::ShrinkOnly => GlobalMode::ShrinkOnly,
            },
            bandwidth: if c.bandwidth > 0.0 {
                Bandwidth::Fixed(c.bandwidth)
            } else {
                Bandwidth::Auto
            },
            gamma: c.gamma,
            embed_dim: c.embed_dim,
            diffusion_time: c.diffusion_time,
            global_neighbors: c.global_neighbors,
            local_neighbors: c.local_neighbors,
            imputation_count: c.imputation_count,
            center: c.center,
            seed: c.seed,
        }
    }
}

/// Opaque matrix handle.
pub struct RosdosMatrix {
    inner: DataMatrix,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(RosdosStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::InvalidArgument(_) | Error::SpectrumTooShort { .. } => {
                RosdosStatus::InvalidArgument
            }
            Error::NonFinite { .. } => RosdosStatus::NonFinite,
            Error::DimensionMismatch(_) => RosdosStatus::DimensionMismatch,
            Error::DegenerateShrinkage { .. } | Error::Numerical(_) => RosdosStatus::Numerical,
            Error::Io(_) | Error::Json(_) | Error::Parse(_) => RosdosStatus::Io,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(RosdosStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> RosdosStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RosdosStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(&format!("panic: {msg}"));
            RosdosStatus::Panic
        }
    }
}

unsafe fn matrix_ref<'a>(m: *const RosdosMatrix, what: &str) -> Result<&'a DataMatrix, Failure> {
    // SAFETY: the caller passes a handle obtained from this library or null.
    unsafe { m.as_ref() }
        .map(|m| &m.inner)
        .ok_or_else(|| null(what))
}

unsafe fn put_matrix(out: *mut *mut RosdosMatrix, m: DataMatrix) {
    // SAFETY: `out` was checked non-null by the caller.
    unsafe { *out = Box::into_raw(Box::new(RosdosMatrix { inner: m })) };
}

/// Message of the last failed call on this thread, or null if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn rosdos_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Copies `rows * cols` row-major values into a new matrix.
///
/// # Safety
/// `data` must point to `rows * cols` readable doubles and `out` to a
/// writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn rosdos_matrix_new(
    rows: usize,
    cols: usize,
    data: *const f64,
    out: *mut *mut RosdosMatrix,
) -> RosdosStatus {
    guard(|| {
        if data.is_null() {
            return Err(null("data"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let len = rows.checked_mul(cols).ok_or_else(|| {
            Failure(
                RosdosStatus::InvalidArgument,
                "rows * cols overflows".into(),
            )
        })?;
        // SAFETY: the caller guarantees `len` readable values.
        let values = unsafe { std::slice::from_raw_parts(data, len) };
        let m = DataMatrix::from_row_major(rows, cols, values)?;
        unsafe { put_matrix(out, m) };
        Ok(())
    })
}

/// Number of rows (features); 0 for a null handle.
///
/// # Safety
/// `m` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rosdos_matrix_rows(m: *const RosdosMatrix) -> usize {
    unsafe { m.as_ref() }.map_or(0, |m| m.inner.rows())
}

/// Number of columns (samples); 0 for a null handle.
///
/// # Safety
/// `m` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rosdos_matrix_cols(m: *const RosdosMatrix) -> usize {
    unsafe { m.as_ref() }.map_or(0, |m| m.inner.cols())
}

/// Writes the matrix row-major into `out`, which holds `len` doubles.
///
/// # Safety
/// `m` must be a live handle and `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn rosdos_matrix_copy(
    m: *const RosdosMatrix,
    out: *mut f64,
    len: usize,
) -> RosdosStatus {
    guard(|| {
        let m = unsafe { matrix_ref(m, "matrix") }?;
        if out.is_null() {
            return Err(null("out"));
        }
        let values = m.to_row_major();
        if len != values.len() {
            return Err(Failure(
                RosdosStatus::DimensionMismatch,
                format!("buffer holds {len} values, matrix has {}", values.len()),
            ));
        }
        // SAFETY: the caller guarantees `len` writable values.
        unsafe { std::slice::from_raw_parts_mut(out, len) }.copy_from_slice(&values);
        Ok(())
    })
}

/// Releases a matrix. Null is ignored.
///
/// # Safety
/// `m` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rosdos_matrix_free(m: *mut RosdosMatrix) {
    if !m.is_null() {
        // SAFETY: the handle came from Box::into_raw in this library.
        drop(unsafe { Box::from_raw(m) });
    }
}

/// Default denoiser settings.
#[no_mangle]
pub extern "C" fn rosdos_config_default() -> RosdosConfig {
    let d = PipelineConfig::default();
    RosdosConfig {
        mode: RosdosMode::Roseland,
        bandwidth: 0.0,
        gamma: d.gamma,
        embed_dim: d.embed_dim,
        diffusion_time: d.diffusion_time,
        global_neighbors: d.global_neighbors,
        local_neighbors: d.local_neighbors,
        imputation_count: d.imputation_count,
        center: d.center,
        seed: d.seed,
    }
}

/// Shrinks the singular values of `x` with `k` imputed noise eigenvalues.
/// `effective_rank` may be null.
///
/// # Safety
/// `x` must be a live handle, `out` a writable handle slot and
/// `effective_rank` null or writable.
#[no_mangle]
pub unsafe extern "C" fn rosdos_eoptshrink(
    x: *const RosdosMatrix,
    k: usize,
    center: bool,
    out: *mut *mut RosdosMatrix,
    effective_rank: *mut usize,
) -> RosdosStatus {
    guard(|| {
        let x = unsafe { matrix_ref(x, "x") }?;
        if out.is_null() {
            return Err(null("out"));
        }
        let res = rosdos::eoptshrink(x, k, center)?;
        if !effective_rank.is_null() {
            unsafe { *effective_rank = res.effective_rank };
        }
        unsafe { put_matrix(out, res.denoised) };
        Ok(())
    })
}

/// Denoises the columns of `x`. `config` may be null for the defaults.
///
/// # Safety
/// `x` must be a live handle, `config` null or valid, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rosdos_denoise(
    x: *const RosdosMatrix,
    config: *const RosdosConfig,
    out: *mut *mut RosdosMatrix,
) -> RosdosStatus {
    guard(|| {
        let x = unsafe { matrix_ref(x, "x") }?;
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = match unsafe { config.as_ref() } {
            Some(c) => PipelineConfig::from(c),
            None => PipelineConfig::default(),
        };
        let res = rosdos::rosdos(x, &cfg)?;
        unsafe { put_matrix(out, res.denoised) };
        Ok(())
    })
}

/// Samples a noisy synthetic data set exactly as `rosdos simulate` does for
/// the same arguments. `msnr_db` may be null.
///
/// # Safety
/// `clean` and `noisy` must be writable handle slots; `msnr_db` null or
/// writable.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn rosdos_simulate(
    manifold: RosdosManifold,
    noise: RosdosNoise,
    p: usize,
    n: usize,
    alpha: f64,
    seed: u64,
    clean: *mut *mut RosdosMatrix,
    noisy: *mut *mut RosdosMatrix,
    msnr_db: *mut f64,
) -> RosdosStatus {
    guard(|| {
        if clean.is_null() {
            return Err(null("clean"));
        }
        if noisy.is_null() {
            return Err(null("noisy"));
        }
        let kind = match manifold {
            RosdosManifold::M1 => ManifoldKind::M1,
            RosdosManifold::M3 => ManifoldKind::M3,
        };
        let nk = match noise {
            RosdosNoise::Gaussian => NoiseKind::Gaussian,
            RosdosNoise::Separable => NoiseKind::Separable,
        };
        let (ms, ns) = rosdos::cli::simulation_specs(kind, nk, p, n, alpha, seed);
        let data = rosdos::synth::make_dataset(&ms, &ns)?;
        if !msnr_db.is_null() {
            unsafe { *msnr_db = data.msnr_db };
        }
        unsafe {
            put_matrix(clean, data.clean);
            put_matrix(noisy, data.noisy);
        }
        Ok(())
    })
}

/// Per-sample normalized error of `estimate` against `clean`, written to
/// `out` (`len` must equal the sample count). `median` may be null.
///
/// # Safety
/// Handles must be live, `out` must point to `len` writable doubles and
/// `median` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn rosdos_nrmse(
    clean: *const RosdosMatrix,
    estimate: *const RosdosMatrix,
    out: *mut f64,
    len: usize,
    median: *mut f64,
) -> RosdosStatus {
    guard(|| {
        let clean = unsafe { matrix_ref(clean, "clean") }?;
        let estimate = unsafe { matrix_ref(estimate, "estimate") }?;
        let errs = rosdos::eval::nrmse(clean, estimate)?;
        if !out.is_null() {
            if len != errs.len() {
                return Err(Failure(
                    RosdosStatus::DimensionMismatch,
                    format!(
                        "buffer holds {len} values, there are {} samples",
                        errs.len()
                    ),
                ));
            }
            unsafe { std::slice::from_raw_parts_mut(out, len) }.copy_from_slice(&errs);
        }
        if !median.is_null() {
            unsafe { *median = rosdos::numerics::median(&errs)? };
        }
        Ok(())
    })
}
