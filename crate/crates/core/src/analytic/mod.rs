//! Closed-form quadrature variances for every description of the cavity, the
//! angle minimizer and the `(alpha, k)` sweep.
//!
//! All formulas are evaluated in a rearranged but algebraically identical
//! form: each `1 + e^{-E} cos(phi)` pair is split into `-expm1(-E)` plus
//! `2 e^{-E} cos^2(phi/2)`, so terms that are non-negative analytically stay
//! non-negative in floating point and large exponents underflow to zero
//! instead of producing `0 * inf`.

mod blockade;
mod classical;
mod meanfield;
mod minimize;
mod quantum;
mod revival;
mod sweep;

pub use blockade::{blockade_check, BlockadeReport};
pub use classical::{classical_envelope, classical_variance, ClassicalEnvelope};
pub use meanfield::{meanfield_variance, MeanFieldMode};
pub use minimize::{minimize_over_theta, ThetaMinimum, DEFAULT_THETA_GRID};
pub use quantum::{kerr_variance, quantum_variance};
pub use revival::{revival_approximation, revival_centers, Revival, DEFAULT_REVIVAL_HALF_WIDTH};
pub use sweep::{sweep_variance_at_tau, SweepMatrix};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::PhysicalParams;
use crate::series::{QuadraturePoint, QuadratureSeries};

/// Which closed form to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalyticModel {
    Quantum,
    Classical,
    MeanField(MeanFieldMode),
    /// Kerr medium with the optomechanical nonlinearity accumulated linearly in
    /// time; coincides with `Quantum` at integer multiples of the period.
    Kerr,
}

impl AnalyticModel {
    pub fn label(&self) -> &'static str {
        match self {
            AnalyticModel::Quantum => "Q",
            AnalyticModel::Classical => "C",
            AnalyticModel::MeanField(MeanFieldMode::Constant) => "SC1",
            AnalyticModel::MeanField(MeanFieldMode::Poisson) => "SC2",
            AnalyticModel::MeanField(MeanFieldMode::Gaussian) => "SC3",
            AnalyticModel::Kerr => "Kerr",
        }
    }

    pub fn variance(&self, theta: f64, t: f64, params: &PhysicalParams) -> Result<f64> {
        match self {
            AnalyticModel::Quantum => quantum_variance(theta, t, params),
            AnalyticModel::Classical => classical_variance(theta, t, params),
            AnalyticModel::MeanField(mode) => meanfield_variance(theta, t, params, *mode),
            AnalyticModel::Kerr => kerr_variance(theta, t, params),
        }
    }
}

pub(crate) fn check_point(theta: f64, t: f64, params: &PhysicalParams) -> Result<()> {
    params.validate()?;
    if !theta.is_finite() {
        return Err(Error::non_finite("quadrature angle"));
    }
    if !t.is_finite() {
        return Err(Error::non_finite("time"));
    }
    if t < 0.0 {
        return Err(Error::param("t", format!("must be non-negative, got {t}")));
    }
    Ok(())
}

/// Evaluate a model on a grid of times (in periods), minimizing over the
/// angle at every time and also recording the variance at `fixed_theta`.
pub fn analytic_series(
    model: AnalyticModel,
    params: &PhysicalParams,
    times_over_tau: &[f64],
    grid_n: usize,
    fixed_theta: f64,
) -> Result<QuadratureSeries> {
    params.validate()?;
    let mut series = QuadratureSeries::new(model.label(), *params, fixed_theta);
    for &tt in times_over_tau {
        let t = params.time_from_periods(tt);
        let min = minimize_over_theta(|th| model.variance(th, t, params), grid_n)?;
        series.push(QuadraturePoint {
            t_over_tau: tt,
            var_min: min.var_min,
            theta_star: min.theta_star,
            var_fixed_theta: model.variance(fixed_theta, t, params)?,
            stderr: None,
        });
    }
    series.validate()?;
    Ok(series)
}
