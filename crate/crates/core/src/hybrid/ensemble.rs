use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::minimize_over_theta;
use crate::error::{Error, Result};
use crate::hilbert::default_np;
use crate::numeric::{CompensatedComplexSum, CompensatedSum};
use crate::params::PhysicalParams;
use crate::rng::RandomSource;
use crate::series::{FieldMoments, QuadraturePoint, QuadratureSeries};

use super::{check_step, run_from, HybridOptions, HybridTrajectoryState, TrajectoryRecord};

/// Initial condition of the classical oscillator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMode {
    /// `x0 = p0 = 0`.
    Zero,
    /// `x0, p0` independent Gaussians of variance 1/2, mimicking the ground state.
    ThermalMatched,
}

/// Largest tolerated fraction of aborted trajectories.
const MAX_ABORT_FRACTION: f64 = 0.01;

/// Ensemble statistics of the hybrid model.
#[derive(Debug, Clone)]
pub struct HybridEnsemble {
    /// Variance of the ensemble-averaged field state, with jackknife errors.
    pub mixture: QuadratureSeries,
    /// Ensemble mean of the conditional (per-trajectory) variance `Var_theta`,
    /// minimized over `theta`; errors are standard errors of that mean.
    pub conditional: QuadratureSeries,
    /// Mean and standard deviation over trajectories of each trajectory's own `var_min`.
    pub traj_var_min_mean: Vec<f64>,
    pub traj_var_min_std: Vec<f64>,
    pub mean_n: Vec<f64>,
    pub mean_n_stderr: Vec<f64>,
    /// Per trajectory: did its `var_min` drop below `1 - SQUEEZE_MARGIN` at any sample after `t = 0`.
    pub squeezed: Vec<bool>,
    /// Per trajectory: most populated number state at the final time.
    pub final_fock: Vec<usize>,
    /// Ensemble-averaged field density matrix at the final time.
    pub mean_final_rho: DMatrix<Complex64>,
    pub n_completed: usize,
    pub n_aborted: usize,
    /// Messages of the aborted trajectories.
    pub abort_reasons: Vec<String>,
}

fn stats(values: impl Iterator<Item = f64> + Clone, n: f64) -> (f64, f64) {
    let mean = values.clone().collect::<CompensatedSum>().value() / n;
    let ss = values.map(|v| (v - mean).powi(2)).collect::<CompensatedSum>().value();
    (mean, (ss / (n - 1.0).max(1.0)).sqrt())
}

/// Run `n_traj` independent trajectories to `t_final` (in `tau`) and
/// average them.
///
/// Trajectory `i` draws its initial oscillator point and its Wiener
/// increments from stream `source.stream_index + i`. Trajectories run in
/// parallel and are reduced in index order, so the result does not depend
/// on the number of worker threads.
pub fn ensemble_average(
    params: &PhysicalParams,
    n_traj: usize,
    t_final: f64,
    opts: &HybridOptions,
    init_mode: InitMode,
    grid_n: usize,
    source: RandomSource,
) -> Result<HybridEnsemble> {
    params.validate()?;
    if n_traj < 2 {
        return Err(Error::param("n_traj", "need at least two trajectories"));
    }
    let dt = opts.dt_over_tau * params.tau();
    check_step(params, dt)?;
    let (per, count) = opts.schedule(t_final)?;
    let np = opts.np.unwrap_or_else(|| default_np(params.alpha));

    let runs: Vec<Result<TrajectoryRecord>> = (0..n_traj)
        .into_par_iter()
        .map(|i| {
            let src = source.with_stream(source.stream_index + i as u64);
            let mut state = HybridTrajectoryState::coherent(params, np, 0.0, 0.0, src);
            if init_mode == InitMode::ThermalMatched {
                let s = std::f64::consts::FRAC_1_SQRT_2;
                state.x = s * state.rng_stream.normal();
                state.p = s * state.rng_stream.normal();
            }
            run_from(state, params, dt, per, count, opts)
        })
        .collect();

    let mut records = Vec::with_capacity(n_traj);
    let mut abort_reasons = Vec::new();
    for r in runs {
        match r {
            Ok(rec) => records.push(rec),
            Err(e) if e.is_numerical() => abort_reasons.push(e.to_string()),
            Err(e) => return Err(e),
        }
    }
    let n_aborted = abort_reasons.len();
    if n_aborted as f64 > MAX_ABORT_FRACTION * n_traj as f64 {
        return Err(Error::Invariant(format!(
            "{n_aborted} of {n_traj} hybrid trajectories aborted (limit {}%); first: {}",
            100.0 * MAX_ABORT_FRACTION,
            abort_reasons[0]
        )));
    }
    let nc = records.len();
    let n = nc as f64;
    let ns = count + 1;

    let mut mixture = QuadratureSeries::new("HM-state", *params, 0.0);
    let mut conditional = QuadratureSeries::new("HM-cond", *params, 0.0);
    let mut traj_var_min_mean = Vec::with_capacity(ns);
    let mut traj_var_min_std = Vec::with_capacity(ns);
    let mut mean_n = Vec::with_capacity(ns);
    let mut mean_n_stderr = Vec::with_capacity(ns);

    for s in 0..ns {
        let t = records[0].times[s];
        let mut a = CompensatedComplexSum::default();
        let mut a2 = CompensatedComplexSum::default();
        let mut nn = CompensatedSum::new();
        let mut excess_a2 = CompensatedComplexSum::default();
        let mut excess_n = CompensatedSum::new();
        for r in &records {
            let m = &r.moments[s];
            a.add(m.mean_a);
            a2.add(m.mean_a2);
            nn.add(m.mean_n);
            excess_a2.add(m.mean_a2 - m.mean_a * m.mean_a);
            excess_n.add(m.mean_n - m.mean_a.norm_sqr());
        }
        let mix = FieldMoments {
            mean_a: a.value() / n,
            mean_a2: a2.value() / n,
            mean_n: nn.value() / n,
        };
        // Var_theta is affine in (<a^2> - <a>^2, <n> - |<a>|^2), so the mean
        // conditional variance is the variance of these averaged excess moments.
        let cond = FieldMoments {
            mean_a: Complex64::new(0.0, 0.0),
            mean_a2: excess_a2.value() / n,
            mean_n: excess_n.value() / n,
        };

        let best = minimize_over_theta(|th| Ok(mix.variance(th)), grid_n)?;
        let mut loo = CompensatedSum::new();
        let loo_vals: Vec<f64> = records
            .iter()
            .map(|r| {
                let m = &r.moments[s];
                let without = FieldMoments {
                    mean_a: (mix.mean_a * n - m.mean_a) / (n - 1.0),
                    mean_a2: (mix.mean_a2 * n - m.mean_a2) / (n - 1.0),
                    mean_n: (mix.mean_n * n - m.mean_n) / (n - 1.0),
                };
                let v = without.variance(best.theta_star);
                loo.add(v);
                v
            })
            .collect();
        let loo_mean = loo.value() / n;
        let jk = ((n - 1.0) / n * loo_vals.iter().map(|v| (v - loo_mean).powi(2)).sum::<f64>()).sqrt();
        mixture.push(QuadraturePoint {
            t_over_tau: t,
            var_min: best.var_min,
            theta_star: best.theta_star,
            var_fixed_theta: mix.variance(0.0),
            stderr: Some(jk),
        });

        let cbest = minimize_over_theta(|th| Ok(cond.variance(th)), grid_n)?;
        let (_, csd) = stats(records.iter().map(|r| r.moments[s].variance(cbest.theta_star)), n);
        conditional.push(QuadraturePoint {
            t_over_tau: t,
            var_min: cbest.var_min,
            theta_star: cbest.theta_star,
            var_fixed_theta: cond.variance(0.0),
            stderr: Some(csd / n.sqrt()),
        });

        let (vm, vsd) = stats(records.iter().map(|r| r.var_min[s]), n);
        traj_var_min_mean.push(vm);
        traj_var_min_std.push(vsd);
        let (nm, nsd) = stats(records.iter().map(|r| r.mean_n[s]), n);
        mean_n.push(nm);
        mean_n_stderr.push(nsd / n.sqrt());
    }
    mixture.validate()?;
    conditional.validate()?;

    let d = records[0].final_rho.dim();
    let mut mean_final_rho = DMatrix::<Complex64>::zeros(d, d);
    for j in 0..d {
        for l in 0..d {
            let mut acc = CompensatedComplexSum::default();
            for r in &records {
                acc.add(r.final_rho.matrix[(j, l)]);
            }
            mean_final_rho[(j, l)] = acc.value() / n;
        }
    }

    let squeezed = records.iter().map(|r| r.var_min.iter().skip(1).any(|&v| v < 1.0 - super::SQUEEZE_MARGIN)).collect();
    let final_fock = records.iter().map(|r| super::collapse_diagnostics(r).dominant_fock).collect();

    Ok(HybridEnsemble {
        mixture,
        conditional,
        traj_var_min_mean,
        traj_var_min_std,
        mean_n,
        mean_n_stderr,
        squeezed,
        final_fock,
        mean_final_rho,
        n_completed: nc,
        n_aborted,
        abort_reasons,
    })
}
