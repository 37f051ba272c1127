//! Executes an expanded configuration and writes its outputs.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::analytic::{analytic_series, minimize_over_theta, quantum_variance, sweep_variance_at_tau, SweepMatrix};
use crate::classical::ensemble_variance;
use crate::error::{Error, Result};
use crate::hilbert::{default_np, evolve_closed, evolve_lindblad, FieldState, LindbladOptions, Truncation};
use crate::hybrid::{ensemble_average, HybridOptions};
use crate::params::PhysicalParams;
use crate::rng::RandomSource;
use crate::series::{format_f64, QuadraturePoint, QuadratureSeries};

use super::config::{CurveSpec, ExperimentConfig, Model, SweepSettings};

pub const OUT_ENV: &str = "OPTOSQUEEZE_OUT";
pub const DEFAULT_OUT: &str = "out";

/// Largest tolerated deviation of a master-equation trace from one.
const TRACE_CHECK: f64 = 1e-6;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Check {
            name: name.to_string(),
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputEntry {
    pub label: String,
    pub file: String,
    pub kind: String,
    pub points: usize,
    pub params: Option<PhysicalParams>,
    pub stream_index: Option<u64>,
    pub runtime_s: f64,
    pub checks: Vec<Check>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub preset: String,
    pub master_seed: u64,
    pub params: PhysicalParams,
    pub config_file: String,
    pub outputs: Vec<OutputEntry>,
    pub invariants_passed: bool,
    pub runtime_s: f64,
}

/// Directory from the config, else the environment, else `out`.
pub fn output_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.output_dir
        .clone()
        .or_else(|| std::env::var(OUT_ENV).ok().filter(|s| !s.is_empty()))
        .unwrap_or_else(|| DEFAULT_OUT.to_string())
        .into()
}

/// Write through a temporary sibling and rename into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::Config(format!("not a file path: {}", path.display())))?
        .to_string_lossy();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn series_csv(s: &QuadratureSeries) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    s.write_csv(&mut buf)?;
    Ok(buf)
}

fn json_bytes<T: Serialize>(v: &T) -> Result<Vec<u8>> {
    let mut b = serde_json::to_vec_pretty(v)?;
    b.push(b'\n');
    Ok(b)
}

/// Run every curve and the sweep of `cfg`, writing into `out`.
///
/// The manifest is written even when an invariant check fails; the failure
/// is then returned as [`Error::Invariant`].
pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<Manifest> {
    cfg.validate()?;
    let start = Instant::now();
    fs::create_dir_all(out)?;
    write_atomic(&out.join("config.json"), &json_bytes(cfg)?)?;

    let mut outputs = Vec::new();
    for (i, spec) in cfg.curves.iter().enumerate() {
        outputs.extend(run_curve(cfg, i, spec, out)?);
    }
    if let Some(sw) = &cfg.sweep {
        outputs.extend(run_sweep(sw, out)?);
    }

    let passed = outputs.iter().all(|o| o.checks.iter().all(|c| c.passed));
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        preset: cfg.preset.name().to_string(),
        master_seed: cfg.master_seed,
        params: cfg.params,
        config_file: "config.json".into(),
        outputs,
        invariants_passed: passed,
        runtime_s: start.elapsed().as_secs_f64(),
    };
    write_atomic(&out.join("manifest.json"), &json_bytes(&manifest)?)?;
    if !passed {
        let failed: Vec<String> = manifest
            .outputs
            .iter()
            .flat_map(|o| o.checks.iter().filter(|c| !c.passed).map(move |c| format!("{}: {} ({})", o.label, c.name, c.detail)))
            .collect();
        return Err(Error::Invariant(failed.join("; ")));
    }
    Ok(manifest)
}

fn series_checks(s: &QuadratureSeries) -> Vec<Check> {
    let valid = s.validate();
    let bound = s.var_min.iter().all(|&v| v > 0.0);
    vec![
        Check::new("series_valid", valid.is_ok(), valid.err().map(|e| e.to_string()).unwrap_or_default()),
        Check::new("variance_positive", bound, "var_min > 0 at every sample"),
    ]
}

/// Stream index of curve `i`; curves never share random numbers.
pub fn curve_stream(i: usize) -> u64 {
    (i as u64) << 32
}

fn entry(label: &str, kind: &str, s: &QuadratureSeries, stream: Option<u64>, runtime: f64, extra: Vec<Check>) -> OutputEntry {
    let mut checks = series_checks(s);
    checks.extend(extra);
    OutputEntry {
        label: label.to_string(),
        file: format!("{label}.csv"),
        kind: kind.to_string(),
        points: s.len(),
        params: Some(s.params),
        stream_index: stream,
        runtime_s: runtime,
        checks,
        warnings: Vec::new(),
    }
}

fn model_kind(m: &Model) -> String {
    serde_json::to_value(m)
        .ok()
        .and_then(|v| v.get("kind").and_then(|k| k.as_str()).map(str::to_string))
        .unwrap_or_default()
}

fn run_curve(cfg: &ExperimentConfig, index: usize, spec: &CurveSpec, out: &Path) -> Result<Vec<OutputEntry>> {
    let started = Instant::now();
    let p = spec.params.unwrap_or(cfg.params);
    let times = spec.times.as_ref().unwrap_or(&cfg.times).expand()?;
    let grid = cfg.theta_grid;
    let kind = model_kind(&spec.model);
    let stream = curve_stream(index);
    let source = RandomSource::new(cfg.master_seed, stream);

    let mut written = Vec::new();
    let mut emit = |label: String, mut s: QuadratureSeries, stream: Option<u64>, extra: Vec<Check>, warnings: Vec<String>| -> Result<()> {
        s.label = label.clone();
        write_atomic(&out.join(format!("{label}.csv")), &series_csv(&s)?)?;
        let mut e = entry(&label, &kind, &s, stream, started.elapsed().as_secs_f64(), extra);
        e.warnings = warnings;
        written.push(e);
        Ok(())
    };

    if let Some(am) = spec.model.analytic() {
        let s = analytic_series(am, &p, &times, grid, 0.0)?;
        emit(spec.label.clone(), s, None, Vec::new(), Vec::new())?;
        return Ok(written);
    }
    match spec.model {
        Model::ClassicalMc => {
            let e = ensemble_variance(&p, cfg.ensemble.n_samples, &times, grid, source)?;
            emit(spec.label.clone(), e.series, Some(stream), Vec::new(), e.warnings)?;
        }
        Model::FockClosed => {
            let np = cfg.master_equation.np.unwrap_or_else(|| default_np(p.alpha));
            let trunc = Truncation::default();
            let mut s = QuadratureSeries::new(&spec.label, p, 0.0);
            for &tt in &times {
                let st = evolve_closed(&p, p.time_from_periods(tt), np, cfg.master_equation.nm, &trunc)?;
                let m = st.field_moments()?;
                let best = minimize_over_theta(|th| Ok(m.variance(th)), grid)?;
                s.push(QuadraturePoint {
                    t_over_tau: tt,
                    var_min: best.var_min,
                    theta_star: best.theta_star,
                    var_fixed_theta: m.variance(0.0),
                    stderr: None,
                });
            }
            emit(spec.label.clone(), s, None, Vec::new(), Vec::new())?;
        }
        Model::MasterEquation => {
            let me = &cfg.master_equation;
            let opts = LindbladOptions {
                dt: me.dt,
                step_fraction: me.step_fraction,
                verify_step: me.verify_step,
                np: me.np,
                nm: me.nm,
                ..LindbladOptions::default()
            };
            let r = evolve_lindblad(&p, &times, &opts)?;
            let drift = r.traces.iter().map(|t| (t - 1.0).abs()).fold(0.0, f64::max);
            let checks = vec![
                Check::new("trace_preserved", drift <= TRACE_CHECK, format!("max |tr - 1| = {drift:e}")),
                Check::new(
                    "step_halving",
                    !me.verify_step || r.step_difference <= opts.step_tolerance,
                    format!("difference {:e}", r.step_difference),
                ),
            ];
            let s = r.series(&spec.label, &p, grid, 0.0)?;
            emit(spec.label.clone(), s, None, checks, Vec::new())?;
        }
        Model::Hybrid { init, cavity_decay } => {
            let t_final = times.last().copied().unwrap_or(0.0);
            let opts = HybridOptions {
                dt_over_tau: cfg.ensemble.dt_over_tau,
                sample_stride: cfg.ensemble.sample_stride,
                include_cavity_decay: cavity_decay,
                np: cfg.ensemble.np,
                ..HybridOptions::default()
            };
            let e = ensemble_average(&p, cfg.ensemble.n_traj, t_final, &opts, init, grid, source)?;
            let squeezed = e.squeezed.iter().filter(|&&b| b).count();
            let info = vec![
                Check::new(
                    "trajectories_completed",
                    true,
                    format!("{} completed, {} aborted", e.n_completed, e.n_aborted),
                ),
                Check::new("squeezed_trajectories", true, format!("{squeezed} of {}", e.n_completed)),
            ];
            emit(format!("{}-cond", spec.label), e.conditional, Some(stream), info.clone(), e.abort_reasons.clone())?;
            emit(format!("{}-state", spec.label), e.mixture, Some(stream), info, Vec::new())?;
        }
        _ => unreachable!("analytic models handled above"),
    }
    Ok(written)
}

/// `alpha\k` header row of k values, then one row per alpha.
pub fn sweep_csv(m: &SweepMatrix) -> String {
    let mut s = String::from("alpha\\k");
    for k in &m.k_grid {
        s.push(',');
        s.push_str(&format_f64(*k));
    }
    s.push('\n');
    for (a, row) in m.alpha_grid.iter().zip(&m.values) {
        s.push_str(&format_f64(*a));
        for v in row {
            s.push(',');
            s.push_str(&format_f64(*v));
        }
        s.push('\n');
    }
    s
}

fn run_sweep(sw: &SweepSettings, out: &Path) -> Result<Vec<OutputEntry>> {
    let started = Instant::now();
    let m = sweep_variance_at_tau(&sw.alpha_grid, &sw.k_grid, sw.theta)?;
    write_atomic(&out.join("sweep.csv"), sweep_csv(&m).as_bytes())?;
    let finite = m.values.iter().flatten().all(|v| v.is_finite());

    let mut r = String::from("alpha,k,log10_var\n");
    for &(alpha, k) in &sw.reference_points {
        let p = PhysicalParams::closed(alpha, k);
        p.validate()?;
        let v = quantum_variance(sw.theta, p.tau(), &p)?.log10();
        r.push_str(&format!("{},{},{}\n", format_f64(alpha), format_f64(k), format_f64(v)));
    }
    write_atomic(&out.join("sweep_reference.csv"), r.as_bytes())?;

    let runtime_s = started.elapsed().as_secs_f64();
    Ok(vec![
        OutputEntry {
            label: "sweep".into(),
            file: "sweep.csv".into(),
            kind: "sweep".into(),
            points: sw.alpha_grid.len() * sw.k_grid.len(),
            params: None,
            stream_index: None,
            runtime_s,
            checks: vec![Check::new("values_finite", finite, "every log10 Var is finite")],
            warnings: Vec::new(),
        },
        OutputEntry {
            label: "sweep_reference".into(),
            file: "sweep_reference.csv".into(),
            kind: "sweep_reference".into(),
            points: sw.reference_points.len(),
            params: None,
            stream_index: None,
            runtime_s,
            checks: Vec::new(),
            warnings: Vec::new(),
        },
    ])
}
