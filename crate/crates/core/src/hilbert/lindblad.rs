//! Master-equation runs on the block representation with step-halving
//! verification.

use crate::analytic::minimize_over_theta;
use crate::error::{Error, Result};
use crate::params::PhysicalParams;
use crate::series::{FieldMoments, QuadraturePoint, QuadratureSeries};

use super::blocks::{BlockState, ChainSet, Integrator};
use super::{default_np, default_nm_displaced, MechanicalInit, Truncation};

/// Angles on which two step sizes are compared.
const COMPARE_ANGLES: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct LindbladOptions {
    /// Largest step in units of `1/omega`.
    pub dt: f64,
    /// Steps are further limited to `step_fraction / rate`, with `rate` the
    /// fastest decay among populated blocks.
    pub step_fraction: f64,
    /// Repeat the run at `dt / 2` and require agreement.
    pub verify_step: bool,
    /// Largest allowed change of any quadrature variance under step halving.
    pub step_tolerance: f64,
    /// Largest allowed drift of the total trace.
    pub trace_tolerance: f64,
    pub chain_set: ChainSet,
    /// Defaults to vacuum or thermal according to `nbar_q`.
    pub mech_init: Option<MechanicalInit>,
    pub np: Option<usize>,
    pub nm: Option<usize>,
    pub truncation: Truncation,
}

impl Default for LindbladOptions {
    fn default() -> Self {
        LindbladOptions {
            dt: 0.05,
            step_fraction: 0.5,
            verify_step: true,
            step_tolerance: 1e-6,
            trace_tolerance: 1e-6,
            chain_set: ChainSet::Moments,
            mech_init: None,
            np: None,
            nm: None,
            truncation: Truncation::default(),
        }
    }
}

/// Samples of one master-equation run.
#[derive(Debug, Clone)]
pub struct LindbladRun {
    pub times_over_tau: Vec<f64>,
    pub moments: Vec<FieldMoments>,
    pub traces: Vec<f64>,
    pub mechanical_number: Vec<f64>,
    /// Largest variance change under step halving (0 when not verified).
    pub step_difference: f64,
    /// State at the last sample time.
    pub state: BlockState,
}

impl LindbladRun {
    pub fn series(&self, label: &str, params: &PhysicalParams, grid_n: usize, fixed_theta: f64) -> Result<QuadratureSeries> {
        let mut s = QuadratureSeries::new(label, *params, fixed_theta);
        for (&tt, m) in self.times_over_tau.iter().zip(&self.moments) {
            let min = minimize_over_theta(|th| Ok(m.variance(th)), grid_n)?;
            s.push(QuadraturePoint {
                t_over_tau: tt,
                var_min: min.var_min,
                theta_star: min.theta_star,
                var_fixed_theta: m.variance(fixed_theta),
                stderr: None,
            });
        }
        s.validate()?;
        Ok(s)
    }
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::Config("empty time grid".into()));
    }
    let mut prev = 0.0;
    for &t in times {
        if !(t.is_finite() && t >= prev) {
            return Err(Error::param("times", "must be finite, non-negative and nondecreasing"));
        }
        prev = t;
    }
    Ok(())
}

struct Samples {
    moments: Vec<FieldMoments>,
    traces: Vec<f64>,
    mech: Vec<f64>,
    state: BlockState,
}

/// Stability limit of classical RK4 on the negative real axis, with margin.
const STABILITY: f64 = 2.5;
/// Time between refreshes of the step bound, in units of `1/omega`.
const CHUNK: f64 = 2.0;

fn integrate(params: &PhysicalParams, mut state: BlockState, times: &[f64], scale: f64, opts: &LindbladOptions) -> Result<Samples> {
    let mut integ = Integrator::new(params, &state);
    let mut out = Samples {
        moments: Vec::with_capacity(times.len()),
        traces: Vec::with_capacity(times.len()),
        mech: Vec::with_capacity(times.len()),
        state: state.clone(),
    };
    for &tt in times {
        let target = params.time_from_periods(tt);
        if integ.is_closed() {
            let span = target - state.t;
            if span > 0.0 {
                state.advance_closed(span)?;
                state.t = target;
            }
        }
        while state.t < target {
            let (accuracy, stability) = integ.rates(&state);
            let mut dt = opts.dt;
            if accuracy > 0.0 {
                dt = dt.min(opts.step_fraction / accuracy);
            }
            if stability > 0.0 {
                dt = dt.min(STABILITY / stability);
            }
            dt *= scale;
            // Rates only fall as blocks empty, so they are refreshed per chunk.
            let span = (target - state.t).min(CHUNK.max(dt));
            let steps = (span / dt - 1e-9).ceil().max(1.0) as usize;
            let end = state.t + span;
            integ.advance(&mut state, span / steps as f64, steps);
            state.t = if target - end < 1e-12 * target.max(1.0) { target } else { end };
            state.prune();
        }
        let tr = state.trace();
        if !tr.is_finite() {
            return Err(Error::non_finite(format!("trace at t = {tt} tau")));
        }
        if (tr - 1.0).abs() > opts.trace_tolerance {
            return Err(Error::Invariant(format!("trace drifted to {tr} at t = {tt} tau")));
        }
        state.check_truncation(&opts.truncation)?;
        out.moments.push(state.field_moments());
        out.traces.push(tr);
        out.mech.push(state.mechanical_number());
    }
    out.state = state;
    Ok(out)
}

/// Integrate the master equation with every term in `params` (mechanical
/// damping at `gamma_m`, `nbar_bath` and photon loss at `kappa`) from the
/// given initial state.
pub fn evolve_lindblad_from(params: &PhysicalParams, state: BlockState, times_over_tau: &[f64], opts: &LindbladOptions) -> Result<LindbladRun> {
    params.validate()?;
    check_times(times_over_tau)?;
    if !(opts.dt.is_finite() && opts.dt > 0.0) {
        return Err(Error::param("dt", "must be positive"));
    }
    if !(opts.step_fraction.is_finite() && opts.step_fraction > 0.0) {
        return Err(Error::param("step_fraction", "must be positive"));
    }
    if state.t != 0.0 && params.time_from_periods(times_over_tau[0]) < state.t {
        return Err(Error::param("times", "first sample precedes the state time"));
    }
    state.check_truncation(&opts.truncation)?;
    let coarse = integrate(params, state.clone(), times_over_tau, 1.0, opts)?;
    let (result, diff) = if opts.verify_step {
        let fine = integrate(params, state, times_over_tau, 0.5, opts)?;
        let mut diff: f64 = 0.0;
        for (a, b) in coarse.moments.iter().zip(&fine.moments) {
            for i in 0..COMPARE_ANGLES {
                let th = std::f64::consts::PI * i as f64 / COMPARE_ANGLES as f64;
                diff = diff.max((a.variance(th) - b.variance(th)).abs());
            }
        }
        if diff > opts.step_tolerance {
            return Err(Error::Convergence {
                context: format!("master equation with dt = {}, step fraction {}", opts.dt, opts.step_fraction),
                difference: diff,
                tolerance: opts.step_tolerance,
            });
        }
        (fine, diff)
    } else {
        (coarse, 0.0)
    };
    Ok(LindbladRun {
        times_over_tau: times_over_tau.to_vec(),
        moments: result.moments,
        traces: result.traces,
        mechanical_number: result.mech,
        step_difference: diff,
        state: result.state,
    })
}

/// Coherent field with the oscillator as selected in `opts`, evolved with
/// every dissipative term in `params`.
pub fn evolve_lindblad(params: &PhysicalParams, times_over_tau: &[f64], opts: &LindbladOptions) -> Result<LindbladRun> {
    params.validate()?;
    let mech = opts.mech_init.unwrap_or_else(|| MechanicalInit::from_params(params));
    let np = opts.np.unwrap_or_else(|| default_np(params.alpha));
    let nm = match opts.nm {
        Some(n) => n,
        None => default_nm_displaced(params, np, mech)?,
    };
    let state = BlockState::initial(params, np, nm, mech, opts.chain_set)?;
    evolve_lindblad_from(params, state, times_over_tau, opts)
}

/// Mechanical damping only; `kappa` is ignored.
pub fn evolve_lindblad_mech(params: &PhysicalParams, times_over_tau: &[f64], opts: &LindbladOptions) -> Result<LindbladRun> {
    let p = PhysicalParams { kappa: 0.0, ..*params };
    evolve_lindblad(&p, times_over_tau, opts)
}

/// Photon loss at `kappa` on top of the closed or mechanically damped dynamics.
pub fn evolve_lindblad_cavity(params: &PhysicalParams, times_over_tau: &[f64], opts: &LindbladOptions) -> Result<LindbladRun> {
    evolve_lindblad(params, times_over_tau, opts)
}
