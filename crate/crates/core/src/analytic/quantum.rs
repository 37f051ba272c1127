use crate::error::Result;
use crate::params::{envelope_unchecked, one_minus_cos, PhysicalParams};

use super::check_point;

/// Field quadrature variance of the fully quantum model, coherent field and
/// thermal (or ground-state) oscillator.
pub fn quantum_variance(theta: f64, t: f64, params: &PhysicalParams) -> Result<f64> {
    check_point(theta, t, params)?;
    let env = envelope_unchecked(t, params);
    Ok(quantum_from_envelope(params.alpha, theta, env.a, env.b))
}

/// Kerr-medium reference curve: the quantum expression with the nonlinear
/// phase growing as `2 k^2 omega t` and no mechanical noise. Equal to
/// [`quantum_variance`] whenever `t` is a whole number of periods.
pub fn kerr_variance(theta: f64, t: f64, params: &PhysicalParams) -> Result<f64> {
    check_point(theta, t, params)?;
    let a = 2.0 * params.k * params.k * params.omega * t;
    Ok(quantum_from_envelope(params.alpha, theta, a, 0.0))
}

#[inline]
pub(crate) fn quantum_from_envelope(alpha: f64, theta: f64, a: f64, b: f64) -> f64 {
    let a2 = alpha * alpha;
    let e1 = a2 * one_minus_cos(2.0 * a) + 2.0 * b;
    let phi1 = 2.0 * a + a2 * (2.0 * a).sin() - 2.0 * theta;
    let e2 = 2.0 * a2 * one_minus_cos(a) + b;
    let phi2 = a + 2.0 * a2 * a.sin() - 2.0 * theta;

    let c1 = (0.5 * phi1).cos();
    let c2 = (0.5 * phi2).cos();
    // 1 + e^{-e1} cos(phi1)
    let first = -(-e1).exp_m1() + 2.0 * (-e1).exp() * c1 * c1;
    // e^{-e2} (1 + cos(phi2))
    let second = 2.0 * (-e2).exp() * c2 * c2;
    1.0 + 2.0 * a2 * (first - second)
}
