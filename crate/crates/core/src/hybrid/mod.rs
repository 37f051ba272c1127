//! Hybrid model in which a classical oscillator continuously measures the
//! photon number of a quantum field.
//!
//! The field density operator follows the diffusive stochastic master
//! equation
//!
//! `d rho = i g0 x dt [n, rho] - Gamma dt [n, [n, rho]]
//!          + sqrt(2 Gamma) ({n, rho} - 2 <n> rho) dW`
//!
//! and the oscillator obeys `dx = omega p dt`,
//! `dp = -omega x dt + g0 <n> dt + g0 / (2 sqrt(2 Gamma)) dW` with the same
//! Wiener increment. Photon loss at rate `kappa` can be added to the field.

mod ensemble;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::analytic::minimize_over_theta;
use crate::error::{Error, Result};
use crate::hilbert::fock::coherent_amplitudes;
use crate::hilbert::{default_np, DensityOperator, Truncation};
use crate::params::PhysicalParams;
use crate::rng::{RandomSource, StreamRng};
use crate::series::FieldMoments;

pub use ensemble::{ensemble_average, HybridEnsemble, InitMode};

/// Largest allowed `Gamma dt` and `omega dt`.
pub const MAX_RATE_STEP: f64 = 1e-2;
/// A step that leaves less trace than this before renormalization aborts.
const COLLAPSE_TRACE: f64 = 0.5;
/// A sample counts as squeezed when `var_min < 1 - SQUEEZE_MARGIN`; the
/// margin absorbs rounding in states that are exactly coherent.
pub const SQUEEZE_MARGIN: f64 = 1e-9;
/// Steps between tail-mass checks.
const TAIL_CHECK_STRIDE: usize = 100;

/// One realization: conditional field state, oscillator phase-space point
/// and the random stream that drives it.
#[derive(Debug)]
pub struct HybridTrajectoryState {
    pub rho_field: DensityOperator,
    pub x: f64,
    pub p: f64,
    /// Time in units of `1/omega`.
    pub t: f64,
    pub rng_stream: StreamRng,
}

impl HybridTrajectoryState {
    /// Truncated coherent field `|alpha>` with the oscillator at `(x0, p0)`.
    pub fn coherent(params: &PhysicalParams, np: usize, x0: f64, p0: f64, source: RandomSource) -> Self {
        let c = coherent_amplitudes(params.alpha, np);
        let norm: f64 = c.iter().map(|v| v * v).sum();
        let amps: Vec<Complex64> = c.iter().map(|&v| Complex64::new(v / norm.sqrt(), 0.0)).collect();
        HybridTrajectoryState {
            rho_field: DensityOperator::pure(&amps),
            x: x0,
            p: p0,
            t: 0.0,
            rng_stream: source.stream(),
        }
    }

    fn dim(&self) -> usize {
        self.rho_field.dim()
    }

    pub fn mean_n(&self) -> f64 {
        let r = &self.rho_field.matrix;
        (0..self.dim()).map(|j| j as f64 * r[(j, j)].re).sum()
    }

    pub fn number_variance(&self) -> f64 {
        let r = &self.rho_field.matrix;
        let m = self.mean_n();
        (0..self.dim()).map(|j| (j as f64 - m).powi(2) * r[(j, j)].re).sum()
    }

    pub fn field_moments(&self) -> FieldMoments {
        self.rho_field.field_moments().expect("field-only operator")
    }

    /// Populations of the number states.
    pub fn populations(&self) -> Vec<f64> {
        (0..self.dim()).map(|j| self.rho_field.matrix[(j, j)].re).collect()
    }

    fn tail_mass(&self) -> f64 {
        let d = self.dim();
        let top = ((0.1 * d as f64).ceil() as usize).max(1);
        (d - top..d).map(|j| self.rho_field.matrix[(j, j)].re).sum()
    }
}

fn check_step(params: &PhysicalParams, dt: f64) -> Result<()> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::param("dt", "must be positive"));
    }
    if params.gamma_meas * dt > MAX_RATE_STEP * (1.0 + 1e-12) || params.omega * dt > MAX_RATE_STEP * (1.0 + 1e-12) {
        return Err(Error::param("dt", format!("Gamma dt and omega dt must not exceed {MAX_RATE_STEP}")));
    }
    if params.gamma_meas == 0.0 && params.k != 0.0 {
        return Err(Error::param("Gamma", "back-action noise g0 / (2 sqrt(2 Gamma)) diverges at Gamma = 0"));
    }
    Ok(())
}

/// Update rule for the field state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HybridScheme {
    /// Measurement back-action as the multiplicative factor
    /// `M_j = exp(c_j dy - c_j^2 dt)` with `c_j = sqrt(2 Gamma) j` and record
    /// `dy = dW + 2 sqrt(2 Gamma) <n> dt`, applied as `M rho M`. Agrees with
    /// Euler-Maruyama to first order and keeps the state positive.
    #[default]
    Exponential,
    /// Additive Euler-Maruyama innovation and dephasing. Loses positivity
    /// when `sqrt(2 Gamma dt) n` approaches 1 for populated or tail levels.
    EulerMaruyama,
}

/// One step of the default scheme with a random increment `dW ~ Normal(0, dt)`
/// drawn from the state's own stream.
pub fn sde_step(state: &mut HybridTrajectoryState, dt: f64, params: &PhysicalParams, include_cavity_decay: bool) -> Result<()> {
    check_step(params, dt)?;
    let dw = state.rng_stream.normal() * dt.sqrt();
    step_with_increment(state, dt, dw, params, include_cavity_decay, HybridScheme::default())
}

/// One step with a given Wiener increment.
///
/// The rotation `i g0 x dt [n, rho]` is applied as its exact one-step phase.
/// Photon loss is an Euler term for [`HybridScheme::EulerMaruyama`] and a
/// first-order Kraus map otherwise. The oscillator receives the force impulse
/// and then rotates freely by `omega dt`.
pub fn sde_step_with_increment(
    state: &mut HybridTrajectoryState,
    dt: f64,
    dw: f64,
    params: &PhysicalParams,
    include_cavity_decay: bool,
    scheme: HybridScheme,
) -> Result<()> {
    check_step(params, dt)?;
    if !dw.is_finite() {
        return Err(Error::non_finite("Wiener increment"));
    }
    step_with_increment(state, dt, dw, params, include_cavity_decay, scheme)
}

fn step_with_increment(
    state: &mut HybridTrajectoryState,
    dt: f64,
    dw: f64,
    params: &PhysicalParams,
    include_cavity_decay: bool,
    scheme: HybridScheme,
) -> Result<()> {
    let d = state.dim();
    let g0 = params.g0();
    let gamma = params.gamma_meas;
    let n_mean = state.mean_n();
    let s = (2.0 * gamma).sqrt() * dw;
    let em = scheme == HybridScheme::EulerMaruyama;
    // Phase (and for Euler-Maruyama the dephasing) depends on l - j only.
    let w = Complex64::from_polar(1.0, -g0 * state.x * dt);
    let mut factor = Vec::with_capacity(d);
    let mut phase = Complex64::new(1.0, 0.0);
    for m in 0..d {
        let mf = m as f64;
        factor.push(if em { phase * (-gamma * mf * mf * dt).exp() } else { phase });
        phase *= w;
    }
    let meas: Vec<f64> = if em {
        Vec::new()
    } else {
        let e: Vec<f64> = (0..d)
            .map(|j| {
                let jf = j as f64;
                s * jf - 2.0 * gamma * dt * (jf * jf - 2.0 * jf * n_mean)
            })
            .collect();
        let r = &state.rho_field.matrix;
        let shift = (0..d).filter(|&j| r[(j, j)].re > 0.0).map(|j| e[j]).fold(f64::NEG_INFINITY, f64::max);
        let shift = if shift.is_finite() { shift } else { 0.0 };
        e.iter().map(|&v| (v - shift).exp()).collect()
    };
    let loss = if include_cavity_decay { params.kappa * dt } else { 0.0 };

    // Upper triangle in place, columns ascending, so the loss feeder
    // (j + 1, l + 1) is still the old value when (j, l) is updated.
    let r = state.rho_field.matrix.as_mut_slice();
    for l in 0..d {
        for j in 0..=l {
            let old = r[j + l * d];
            let feeder = if loss > 0.0 && l + 1 < d {
                r[(j + 1) + (l + 1) * d] * (((j + 1) * (l + 1)) as f64).sqrt() * loss
            } else {
                Complex64::new(0.0, 0.0)
            };
            r[j + l * d] = if em {
                old * (factor[l - j] + s * ((j + l) as f64 - 2.0 * n_mean) - 0.5 * loss * (j + l) as f64) + feeder
            } else {
                // Kraus form M U (K0 rho K0 + K1 rho K1^dag) U^dag M with
                // K0 = e^{-kappa dt n / 2}, K1 = sqrt(kappa dt) a.
                let keep = (-0.5 * loss * (j + l) as f64).exp();
                (old * keep + feeder) * factor[l - j] * (meas[j] * meas[l])
            };
        }
    }
    let mut tr = 0.0;
    for l in 0..d {
        r[l + l * d].im = 0.0;
        tr += r[l + l * d].re;
        for j in l + 1..d {
            r[j + l * d] = r[l + j * d].conj();
        }
    }
    // Only the additive scheme can lose trace; the multiplicative one is
    // shifted, so its raw trace is merely checked for being positive.
    let collapsed = if em { tr < COLLAPSE_TRACE } else { tr <= 0.0 };
    if !tr.is_finite() || collapsed {
        return Err(Error::TraceCollapse { trace: tr, t: state.t + dt });
    }
    let inv = 1.0 / tr;
    for z in r.iter_mut() {
        *z *= inv;
    }

    let kick = g0 * n_mean * dt + if gamma > 0.0 { g0 / (2.0 * (2.0 * gamma).sqrt()) * dw } else { 0.0 };
    let p = state.p + kick;
    let (sn, cs) = (params.omega * dt).sin_cos();
    let x = state.x * cs + p * sn;
    state.p = -state.x * sn + p * cs;
    state.x = x;
    if !(state.x.is_finite() && state.p.is_finite()) {
        return Err(Error::non_finite("oscillator phase-space point"));
    }
    state.t += dt;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HybridOptions {
    /// Step in units of `tau`.
    pub dt_over_tau: f64,
    /// Spacing of recorded samples in units of `tau`.
    pub sample_stride: f64,
    pub include_cavity_decay: bool,
    pub scheme: HybridScheme,
    /// Photon cutoff; `None` uses `ceil(alpha^2 + 8 alpha + 10)`.
    pub np: Option<usize>,
    pub truncation: Truncation,
}

impl Default for HybridOptions {
    fn default() -> Self {
        HybridOptions {
            dt_over_tau: 1e-3,
            sample_stride: 0.1,
            include_cavity_decay: false,
            scheme: HybridScheme::default(),
            np: None,
            truncation: Truncation::default(),
        }
    }
}

impl HybridOptions {
    /// `(steps per sample, number of samples after t = 0)` for a run to `t_final` (in `tau`).
    fn schedule(&self, t_final: f64) -> Result<(usize, usize)> {
        let per = self.sample_stride / self.dt_over_tau;
        let per_r = per.round();
        if !(per_r >= 1.0 && (per - per_r).abs() < 1e-9 * per_r) {
            return Err(Error::param("sample_stride", "must be a whole number of steps"));
        }
        let count = t_final / self.sample_stride;
        let count_r = count.round();
        if !(t_final.is_finite() && t_final >= 0.0 && (count - count_r).abs() < 1e-9 * count_r.max(1.0)) {
            return Err(Error::param("t_final", "must be a non-negative whole number of sample strides"));
        }
        Ok((per_r as usize, count_r as usize))
    }
}

/// Samples of one trajectory. Times are in units of `tau`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub moments: Vec<FieldMoments>,
    pub var_min: Vec<f64>,
    pub theta_star: Vec<f64>,
    pub mean_n: Vec<f64>,
    pub number_variance: Vec<f64>,
    pub purity: Vec<f64>,
    pub x: Vec<f64>,
    pub p: Vec<f64>,
    /// Field state at the final time.
    pub final_rho: DensityOperator,
}

impl TrajectoryRecord {
    /// Number-state populations at the final time.
    pub fn final_populations(&self) -> Vec<f64> {
        (0..self.final_rho.dim()).map(|j| self.final_rho.matrix[(j, j)].re).collect()
    }

    /// `Var_theta` at sample `i` on a uniform grid of `n` angles in `[0, pi)`.
    pub fn var_theta_grid(&self, i: usize, n: usize) -> Vec<f64> {
        (0..n)
            .map(|j| self.moments[i].variance(std::f64::consts::PI * j as f64 / n as f64))
            .collect()
    }

    fn push(&mut self, s: &HybridTrajectoryState, params: &PhysicalParams) -> Result<()> {
        let m = s.field_moments();
        let min = minimize_over_theta(|th| Ok(m.variance(th)), crate::analytic::DEFAULT_THETA_GRID)?;
        self.times.push(s.t / params.tau());
        self.moments.push(m);
        self.var_min.push(min.var_min);
        self.theta_star.push(min.theta_star);
        self.mean_n.push(s.mean_n());
        self.number_variance.push(s.number_variance());
        self.purity.push(s.rho_field.purity());
        self.x.push(s.x);
        self.p.push(s.p);
        Ok(())
    }
}

/// Integrate one trajectory from `|alpha>` and `(x0, p0)` up to `t_final`
/// (in `tau`), recording every `opts.sample_stride`.
pub fn run_trajectory(params: &PhysicalParams, t_final: f64, opts: &HybridOptions, x0: f64, p0: f64, source: RandomSource) -> Result<TrajectoryRecord> {
    params.validate()?;
    let dt = opts.dt_over_tau * params.tau();
    check_step(params, dt)?;
    let (per, count) = opts.schedule(t_final)?;
    let np = opts.np.unwrap_or_else(|| default_np(params.alpha));
    let state = HybridTrajectoryState::coherent(params, np, x0, p0, source);
    run_from(state, params, dt, per, count, opts)
}

pub(crate) fn run_from(
    mut state: HybridTrajectoryState,
    params: &PhysicalParams,
    dt: f64,
    per: usize,
    count: usize,
    opts: &HybridOptions,
) -> Result<TrajectoryRecord> {
    let mut rec = TrajectoryRecord {
        times: Vec::with_capacity(count + 1),
        moments: Vec::with_capacity(count + 1),
        var_min: Vec::with_capacity(count + 1),
        theta_star: Vec::with_capacity(count + 1),
        mean_n: Vec::with_capacity(count + 1),
        number_variance: Vec::with_capacity(count + 1),
        purity: Vec::with_capacity(count + 1),
        x: Vec::with_capacity(count + 1),
        p: Vec::with_capacity(count + 1),
        final_rho: DensityOperator::pure(&[Complex64::new(1.0, 0.0)]),
    };
    opts.truncation.check(state.tail_mass(), "hybrid field state")?;
    rec.push(&state, params)?;
    let t0 = state.t;
    let mut step = 0usize;
    for sample in 1..=count {
        for _ in 0..per {
            let dw = state.rng_stream.normal() * dt.sqrt();
            step_with_increment(&mut state, dt, dw, params, opts.include_cavity_decay, opts.scheme)?;
            step += 1;
            if step % TAIL_CHECK_STRIDE == 0 {
                opts.truncation.check(state.tail_mass(), "hybrid field state")?;
            }
        }
        // Pin the clock to the sample grid.
        state.t = t0 + (sample * per) as f64 * dt;
        rec.push(&state, params)?;
    }
    rec.final_rho = state.rho_field;
    Ok(rec)
}

/// Summary of how a trajectory collapses towards a number state.
#[derive(Debug, Clone, PartialEq)]
pub struct CollapseSummary {
    /// Most populated number state at the final time and its population.
    pub dominant_fock: usize,
    pub dominant_population: f64,
    /// First recorded time (in `tau`) at which the purity reaches 0.9.
    pub time_to_purity_90: Option<f64>,
    /// First and last recorded times with `var_min < 1 - SQUEEZE_MARGIN`.
    pub squeeze_window: Option<(f64, f64)>,
}

pub fn collapse_diagnostics(rec: &TrajectoryRecord) -> CollapseSummary {
    let (dominant_fock, dominant_population) = rec
        .final_populations()
        .into_iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (j, p)| if p > best.1 { (j, p) } else { best });
    let time_to_purity_90 = rec.times.iter().zip(&rec.purity).find(|(_, &p)| p >= 0.9).map(|(&t, _)| t);
    let squeezed: Vec<f64> = rec
        .times
        .iter()
        .zip(&rec.var_min)
        .filter(|(_, &v)| v < 1.0 - SQUEEZE_MARGIN)
        .map(|(&t, _)| t)
        .collect();
    let squeeze_window = match (squeezed.first(), squeezed.last()) {
        (Some(&a), Some(&b)) => Some((a, b)),
        _ => None,
    };
    CollapseSummary {
        dominant_fock,
        dominant_population: dominant_population.max(0.0),
        time_to_purity_90,
        squeeze_window,
    }
}
