//! C ABI over the optosqueeze library.
//!
//! Objects cross the boundary as opaque handles created by `osq_*_new` or
//! returned through out-pointers, and released with the matching
//! `osq_*_free`. Every fallible call returns an [`OsqStatus`]; the message of
//! the most recent failure on the calling thread is available from
//! [`osq_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use optosqueeze::analytic::{analytic_series, AnalyticModel, MeanFieldMode};
use optosqueeze::classical::ensemble_variance;
use optosqueeze::cli::config::ExperimentConfig;
use optosqueeze::hybrid::{ensemble_average, HybridOptions, InitMode};
use optosqueeze::{Error, PhysicalParams, QuadratureSeries, RandomSource};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OsqStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    Config = 3,
    Numerical = 4,
    OutOfWindow = 5,
    Io = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OsqModel {
    Quantum = 0,
    Classical = 1,
    Sc1 = 2,
    Sc2 = 3,
    Sc3 = 4,
    Kerr = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OsqColumn {
    Time = 0,
    VarMin = 1,
    ThetaStar = 2,
    VarTheta0 = 3,
    /// Zero-filled for analytic series.
    Stderr = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OsqInit {
    Zero = 0,
    ThermalMatched = 1,
}

/// Physical parameters.
pub struct OsqParams {
    inner: PhysicalParams,
}

/// A time series of the angle-minimized variance.
pub struct OsqSeries {
    inner: QuadratureSeries,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> OsqStatus {
    match e {
        Error::InvalidParameter { .. } => OsqStatus::InvalidParameter,
        Error::OutOfWindow { .. } => OsqStatus::OutOfWindow,
        Error::Config(_) | Error::Json(_) => OsqStatus::Config,
        Error::Io(_) => OsqStatus::Io,
        _ if e.is_numerical() => OsqStatus::Numerical,
        _ => OsqStatus::Config,
    }
}

/// Run `f`, translating errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), (OsqStatus, String)>) -> OsqStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => OsqStatus::Ok,
        Ok(Err((s, msg))) => {
            set_error(msg);
            s
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            OsqStatus::Panic
        }
    }
}

fn lib(e: Error) -> (OsqStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (OsqStatus, String) {
    (OsqStatus::NullPointer, format!("{what} is null"))
}

unsafe fn params_ref<'a>(p: *const OsqParams) -> Result<&'a PhysicalParams, (OsqStatus, String)> {
    p.as_ref().map(|p| &p.inner).ok_or_else(|| null("params"))
}

unsafe fn slice<'a>(data: *const f64, len: usize) -> Result<&'a [f64], (OsqStatus, String)> {
    if len == 0 {
        return Err((OsqStatus::InvalidParameter, "empty time grid".into()));
    }
    if data.is_null() {
        return Err(null("times"));
    }
    Ok(std::slice::from_raw_parts(data, len))
}

fn analytic(m: OsqModel) -> AnalyticModel {
    match m {
        OsqModel::Quantum => AnalyticModel::Quantum,
        OsqModel::Classical => AnalyticModel::Classical,
        OsqModel::Sc1 => AnalyticModel::MeanField(MeanFieldMode::Constant),
        OsqModel::Sc2 => AnalyticModel::MeanField(MeanFieldMode::Poisson),
        OsqModel::Sc3 => AnalyticModel::MeanField(MeanFieldMode::Gaussian),
        OsqModel::Kerr => AnalyticModel::Kerr,
    }
}

fn boxed_series(s: QuadratureSeries) -> *mut OsqSeries {
    Box::into_raw(Box::new(OsqSeries { inner: s }))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn osq_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copy the last error message of this thread into `buf` (NUL terminated,
/// truncated to `len`). Returns the full message length without the NUL.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn osq_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let bytes = e.as_ref().map(|c| c.as_bytes()).unwrap_or(b"");
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Defaults (`omega = 1`, `Gamma = 0.01`, no dissipation) with the given
/// amplitude and coupling.
///
/// # Safety
/// `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn osq_params_new(alpha: f64, k: f64, out: *mut *mut OsqParams) -> OsqStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let p = PhysicalParams {
            alpha,
            k,
            ..PhysicalParams::default()
        };
        p.validate().map_err(lib)?;
        *out = Box::into_raw(Box::new(OsqParams { inner: p }));
        Ok(())
    })
}

/// Set a field by its configuration name (`alpha`, `k`, `omega`, `nbar_q`,
/// `sigma2_cl`, `Gamma`, `kappa`, `gamma_m`, `nbar_bath`). The handle is
/// unchanged when the result would be invalid.
///
/// # Safety
/// `params` must be a live handle and `name` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn osq_params_set(params: *mut OsqParams, name: *const c_char, value: f64) -> OsqStatus {
    guard(|| {
        let p = params.as_mut().ok_or_else(|| null("params"))?;
        if name.is_null() {
            return Err(null("name"));
        }
        let name = CStr::from_ptr(name).to_str().map_err(|e| (OsqStatus::InvalidParameter, e.to_string()))?;
        let mut q = p.inner;
        let slot = match name {
            "alpha" => &mut q.alpha,
            "k" => &mut q.k,
            "omega" => &mut q.omega,
            "nbar_q" => &mut q.nbar_q,
            "sigma2_cl" => &mut q.sigma2_cl,
            "Gamma" => &mut q.gamma_meas,
            "kappa" => &mut q.kappa,
            "gamma_m" => &mut q.gamma_m,
            "nbar_bath" => &mut q.nbar_bath,
            other => return Err((OsqStatus::InvalidParameter, format!("unknown parameter `{other}`"))),
        };
        *slot = value;
        q.validate().map_err(lib)?;
        p.inner = q;
        Ok(())
    })
}

/// # Safety
/// `params` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn osq_params_get(params: *const OsqParams, name: *const c_char, out: *mut f64) -> OsqStatus {
    guard(|| {
        let p = params_ref(params)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        if name.is_null() {
            return Err(null("name"));
        }
        let name = CStr::from_ptr(name).to_str().map_err(|e| (OsqStatus::InvalidParameter, e.to_string()))?;
        *out = match name {
            "alpha" => p.alpha,
            "k" => p.k,
            "omega" => p.omega,
            "nbar_q" => p.nbar_q,
            "sigma2_cl" => p.sigma2_cl,
            "Gamma" => p.gamma_meas,
            "kappa" => p.kappa,
            "gamma_m" => p.gamma_m,
            "nbar_bath" => p.nbar_bath,
            "g0" => p.g0(),
            "tau" => p.tau(),
            other => return Err((OsqStatus::InvalidParameter, format!("unknown parameter `{other}`"))),
        };
        Ok(())
    })
}

/// # Safety
/// `params` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn osq_params_free(params: *mut OsqParams) {
    if !params.is_null() {
        drop(Box::from_raw(params));
    }
}

/// `Var_theta` of a closed-form model at `t_over_tau` mechanical periods.
///
/// # Safety
/// `params` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn osq_variance(params: *const OsqParams, model: OsqModel, theta: f64, t_over_tau: f64, out: *mut f64) -> OsqStatus {
    guard(|| {
        let p = params_ref(params)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = analytic(model).variance(theta, p.time_from_periods(t_over_tau), p).map_err(lib)?;
        Ok(())
    })
}

/// Closed-form series at `n_times` times (in periods), minimized over a grid
/// of `theta_grid` angles.
///
/// # Safety
/// `times` must point to `n_times` doubles; `params` live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn osq_analytic_series(
    params: *const OsqParams,
    model: OsqModel,
    times: *const f64,
    n_times: usize,
    theta_grid: usize,
    out: *mut *mut OsqSeries,
) -> OsqStatus {
    guard(|| {
        let p = params_ref(params)?;
        let t = slice(times, n_times)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let s = analytic_series(analytic(model), p, t, theta_grid, 0.0).map_err(lib)?;
        *out = boxed_series(s);
        Ok(())
    })
}

/// Monte Carlo estimate of the classical description with `n_samples`
/// phase-space samples drawn from stream `stream` of `seed`.
///
/// # Safety
/// As [`osq_analytic_series`].
#[no_mangle]
pub unsafe extern "C" fn osq_classical_ensemble(
    params: *const OsqParams,
    n_samples: usize,
    times: *const f64,
    n_times: usize,
    theta_grid: usize,
    seed: u64,
    stream: u64,
    out: *mut *mut OsqSeries,
) -> OsqStatus {
    guard(|| {
        let p = params_ref(params)?;
        let t = slice(times, n_times)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let e = ensemble_variance(p, n_samples, t, theta_grid, RandomSource::new(seed, stream)).map_err(lib)?;
        *out = boxed_series(e.series);
        Ok(())
    })
}

/// Hybrid measurement ensemble of `n_traj` trajectories on `[0, t_final]`
/// (periods) with step `dt_over_tau` and samples every `stride` periods.
/// `out_conditional` receives the mean conditional variance and
/// `out_state` the variance of the averaged state; either may be null.
///
/// # Safety
/// `params` live; non-null out-pointers writable.
#[no_mangle]
pub unsafe extern "C" fn osq_hybrid_ensemble(
    params: *const OsqParams,
    n_traj: usize,
    t_final: f64,
    dt_over_tau: f64,
    stride: f64,
    init: OsqInit,
    cavity_decay: bool,
    theta_grid: usize,
    seed: u64,
    stream: u64,
    out_conditional: *mut *mut OsqSeries,
    out_state: *mut *mut OsqSeries,
) -> OsqStatus {
    guard(|| {
        let p = params_ref(params)?;
        let opts = HybridOptions {
            dt_over_tau,
            sample_stride: stride,
            include_cavity_decay: cavity_decay,
            ..HybridOptions::default()
        };
        let init = match init {
            OsqInit::Zero => InitMode::Zero,
            OsqInit::ThermalMatched => InitMode::ThermalMatched,
        };
        let e = ensemble_average(p, n_traj, t_final, &opts, init, theta_grid, RandomSource::new(seed, stream)).map_err(lib)?;
        if let Some(o) = out_conditional.as_mut() {
            *o = boxed_series(e.conditional);
        }
        if let Some(o) = out_state.as_mut() {
            *o = boxed_series(e.mixture);
        }
        Ok(())
    })
}

/// Number of samples, 0 for a null handle.
///
/// # Safety
/// `series` must be null or live.
#[no_mangle]
pub unsafe extern "C" fn osq_series_len(series: *const OsqSeries) -> usize {
    series.as_ref().map_or(0, |s| s.inner.len())
}

/// Copy one column into `buf`, which must hold at least `osq_series_len` values.
///
/// # Safety
/// `series` live; `buf` writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn osq_series_column(series: *const OsqSeries, column: OsqColumn, buf: *mut f64, len: usize) -> OsqStatus {
    guard(|| {
        let s = &series.as_ref().ok_or_else(|| null("series"))?.inner;
        if buf.is_null() {
            return Err(null("buf"));
        }
        let n = s.len();
        if len < n {
            return Err((OsqStatus::BufferTooSmall, format!("need {n} values, buffer holds {len}")));
        }
        let out = std::slice::from_raw_parts_mut(buf, n);
        match column {
            OsqColumn::Time => out.copy_from_slice(&s.times),
            OsqColumn::VarMin => out.copy_from_slice(&s.var_min),
            OsqColumn::ThetaStar => out.copy_from_slice(&s.theta_star),
            OsqColumn::VarTheta0 => out.copy_from_slice(&s.var_fixed_theta),
            OsqColumn::Stderr => match &s.stderr {
                Some(e) => out.copy_from_slice(e),
                None => out.fill(0.0),
            },
        }
        Ok(())
    })
}

/// Write the series as CSV to `path`.
///
/// # Safety
/// `series` live; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn osq_series_write_csv(series: *const OsqSeries, path: *const c_char) -> OsqStatus {
    guard(|| {
        let s = &series.as_ref().ok_or_else(|| null("series"))?.inner;
        if path.is_null() {
            return Err(null("path"));
        }
        let path = CStr::from_ptr(path).to_string_lossy().into_owned();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).map_err(|e| lib(e.into()))?;
        optosqueeze::cli::runner::write_atomic(Path::new(&path), &buf).map_err(lib)
    })
}

/// # Safety
/// `series` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn osq_series_free(series: *mut OsqSeries) {
    if !series.is_null() {
        drop(Box::from_raw(series));
    }
}

/// Run a JSON experiment configuration (as accepted by the command-line
/// tool) and write its outputs into `out_dir`, or into the directory the
/// configuration names when `out_dir` is null.
///
/// # Safety
/// `config_json` must be a NUL-terminated string; `out_dir` null or one.
#[no_mangle]
pub unsafe extern "C" fn osq_run_config(config_json: *const c_char, out_dir: *const c_char) -> OsqStatus {
    guard(|| {
        if config_json.is_null() {
            return Err(null("config_json"));
        }
        let text = CStr::from_ptr(config_json).to_string_lossy();
        let doc = serde_json::from_str(&text).map_err(|e| (OsqStatus::Config, e.to_string()))?;
        let cfg: ExperimentConfig = optosqueeze::cli::resolve(None, Some(doc), &[]).map_err(lib)?;
        let dir = if out_dir.is_null() {
            optosqueeze::cli::output_dir(&cfg)
        } else {
            CStr::from_ptr(out_dir).to_string_lossy().into_owned().into()
        };
        optosqueeze::cli::run(&cfg, &dir).map_err(lib)?;
        Ok(())
    })
}
