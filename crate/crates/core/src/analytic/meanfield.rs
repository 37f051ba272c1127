use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::params::{envelope_unchecked, one_minus_cos, PhysicalParams};

use super::check_point;

/// How the classical oscillator perceives the field intensity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanFieldMode {
    /// The mean photon number.
    Constant,
    /// A Poisson-distributed photon number.
    Poisson,
    /// A Gaussian intensity with the Poisson mean and variance.
    Gaussian,
}

pub fn meanfield_variance(
    theta: f64,
    t: f64,
    params: &PhysicalParams,
    mode: MeanFieldMode,
) -> Result<f64> {
    check_point(theta, t, params)?;
    let env = envelope_unchecked(t, params);
    let a2 = params.alpha * params.alpha;
    let a = env.a;
    let c = env.c;
    let v = match mode {
        MeanFieldMode::Constant => dephased(a2, c, 2.0 * a2 * a - 2.0 * theta),
        MeanFieldMode::Gaussian => dephased(a2, c + a2 * a * a, 2.0 * a2 * a - 2.0 * theta),
        MeanFieldMode::Poisson => {
            let e1 = a2 * one_minus_cos(2.0 * a) + 2.0 * c;
            let phi1 = a2 * (2.0 * a).sin() - 2.0 * theta;
            let e2 = 2.0 * a2 * one_minus_cos(a) + c;
            let phi2 = 2.0 * a2 * a.sin() - 2.0 * theta;
            let h1 = (0.5 * phi1).cos();
            let h2 = (0.5 * phi2).cos();
            let first = -(-e1).exp_m1() + 2.0 * (-e1).exp() * h1 * h1;
            let second = 2.0 * (-e2).exp() * h2 * h2;
            1.0 + 2.0 * a2 * (first - second)
        }
    };
    Ok(v)
}

/// `1 + 2 alpha^2 (1 - e^{-x}) (1 - cos(phi) e^{-x})`, the variance of a
/// coherent state whose phase carries Gaussian noise of variance `x`.
#[inline]
fn dephased(a2: f64, x: f64, phi: f64) -> f64 {
    let decay = (-x).exp();
    1.0 + 2.0 * a2 * (-(-x).exp_m1()) * (1.0 - phi.cos() * decay)
}
