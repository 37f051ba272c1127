//! Quick invariant suite behind `optosqueeze validate`.

use std::time::Instant;

use serde::Serialize;

use crate::analytic::{minimize_over_theta, sweep_variance_at_tau, AnalyticModel, MeanFieldMode};
use crate::classical::ensemble_variance;
use crate::error::Result;
use crate::hilbert::{default_np, evolve_closed, FieldState, Truncation};
use crate::hybrid::{ensemble_average, HybridOptions, InitMode};
use crate::params::PhysicalParams;
use crate::rng::RandomSource;

use super::runner::Check;

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub tool: &'static str,
    pub version: &'static str,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub runtime_s: f64,
}

fn check(name: &str, r: Result<(bool, String)>) -> Check {
    match r {
        Ok((passed, detail)) => Check {
            name: name.into(),
            passed,
            detail,
        },
        Err(e) => Check {
            name: name.into(),
            passed: false,
            detail: e.to_string(),
        },
    }
}

fn coherent_start() -> Result<(bool, String)> {
    let p = PhysicalParams::closed(20.0, 0.01);
    let models = [
        AnalyticModel::Quantum,
        AnalyticModel::Classical,
        AnalyticModel::MeanField(MeanFieldMode::Constant),
        AnalyticModel::MeanField(MeanFieldMode::Poisson),
        AnalyticModel::MeanField(MeanFieldMode::Gaussian),
        AnalyticModel::Kerr,
    ];
    let mut worst: f64 = 0.0;
    for m in models {
        for i in 0..8 {
            let th = std::f64::consts::PI * i as f64 / 8.0;
            worst = worst.max((m.variance(th, 0.0, &p)? - 1.0).abs());
        }
    }
    Ok((worst < 1e-12, format!("max |Var(0) - 1| = {worst:e}")))
}

fn fock_vs_closed_form() -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for nbar in [0.0, 1.0] {
        let p = PhysicalParams {
            nbar_q: nbar,
            ..PhysicalParams::closed(2.0, 0.1)
        };
        for tt in [0.3, 1.0, 2.7] {
            let t = p.time_from_periods(tt);
            let st = evolve_closed(&p, t, default_np(p.alpha), None, &Truncation::default())?;
            for i in 0..4 {
                let th = std::f64::consts::PI * i as f64 / 4.0;
                let a = AnalyticModel::Quantum.variance(th, t, &p)?;
                worst = worst.max((st.field_variance(th)? - a).abs() / a);
            }
        }
    }
    Ok((worst < 1e-6, format!("max relative error {worst:e}")))
}

fn thermal_recombination() -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for tt in [1.0, 2.0, 3.0] {
        let base = PhysicalParams::closed(20.0, 0.01);
        let v0 = AnalyticModel::Quantum.variance(0.0, base.time_from_periods(tt), &base)?;
        for nbar in [1.0, 10.0, 100.0] {
            let p = PhysicalParams { nbar_q: nbar, ..base };
            let v = AnalyticModel::Quantum.variance(0.0, p.time_from_periods(tt), &p)?;
            worst = worst.max((v - v0).abs() / v0);
        }
    }
    Ok((worst < 1e-9, format!("max relative spread {worst:e}")))
}

fn meanfield_floor() -> Result<(bool, String)> {
    let p = PhysicalParams::closed(20.0, 0.01);
    let mut lowest = f64::INFINITY;
    for mode in [MeanFieldMode::Constant, MeanFieldMode::Poisson, MeanFieldMode::Gaussian] {
        let m = AnalyticModel::MeanField(mode);
        for i in 0..=40 {
            let t = p.time_from_periods(0.5 * i as f64);
            lowest = lowest.min(minimize_over_theta(|th| m.variance(th, t, &p), 64)?.var_min);
        }
    }
    Ok((lowest >= 1.0 - 1e-9, format!("smallest variance {lowest}")))
}

fn sweep_k_zero() -> Result<(bool, String)> {
    let m = sweep_variance_at_tau(&[1.0, 20.0], &[0.0], 0.0)?;
    let worst = m.values.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
    Ok((worst < 1e-12, format!("max |log10 Var| at k = 0: {worst:e}")))
}

fn classical_start() -> Result<(bool, String)> {
    let p = PhysicalParams::closed(2.0, 0.1);
    let e = ensemble_variance(&p, 4000, &[0.0, 1.0], 64, RandomSource::new(1, 0))?;
    let s = &e.series;
    let err = s.stderr.as_ref().map(|v| v[0]).unwrap_or(0.0);
    let dev = (s.var_fixed_theta[0] - 1.0).abs();
    let ok = dev <= 4.0 * err.max(1e-12);
    Ok((ok, format!("Var_0(0) = {} +- {}", s.var_fixed_theta[0], err)))
}

fn hybrid_photon_number() -> Result<(bool, String)> {
    let p = PhysicalParams {
        gamma_meas: 0.01,
        ..PhysicalParams::closed(2.0, 0.1)
    };
    let opts = HybridOptions::default();
    let e = ensemble_average(&p, 24, 1.0, &opts, InitMode::Zero, 64, RandomSource::new(1, 0))?;
    let z = e
        .mean_n
        .iter()
        .zip(&e.mean_n_stderr)
        .skip(1)
        .map(|(m, s)| (m - 4.0).abs() / s.max(1e-12))
        .fold(0.0, f64::max);
    Ok((z < 4.0 && e.n_aborted == 0, format!("max |<n> - 4| / SE = {z:.3}, {} aborted", e.n_aborted)))
}

/// Run the suite; never fails, failures are reported per check.
pub fn validate() -> ValidationReport {
    let start = Instant::now();
    let checks = vec![
        check("coherent_start", coherent_start()),
        check("fock_matches_closed_form", fock_vs_closed_form()),
        check("thermal_recombination", thermal_recombination()),
        check("meanfield_no_squeezing", meanfield_floor()),
        check("sweep_k_zero", sweep_k_zero()),
        check("classical_start", classical_start()),
        check("hybrid_photon_number", hybrid_photon_number()),
    ];
    ValidationReport {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        passed: checks.iter().all(|c| c.passed),
        checks,
        runtime_s: start.elapsed().as_secs_f64(),
    }
}
