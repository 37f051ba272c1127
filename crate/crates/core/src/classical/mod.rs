//! Fully classical description: Gaussian initial noise on the field amplitude
//! and on the oscillator, exact trajectory evolution and Monte Carlo estimates
//! of the quadrature variance.

mod ensemble;

pub use ensemble::{covariance_min_variance, ensemble_variance, ClassicalEnsemble, JACKKNIFE_BLOCKS};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{envelope_unchecked, PhysicalParams};
use crate::rng::StreamRng;

/// Phase-space point of the classical field and oscillator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassicalState {
    pub alpha_l: Complex64,
    pub x: f64,
    pub p: f64,
    pub t: f64,
}

/// Draw an initial state.
///
/// The field amplitude is `alpha + (dx + i dp) / sqrt(2)` with canonical
/// quadrature noise `dx, dp ~ N(0, 1/2)`, so the real and imaginary parts of
/// the amplitude each have variance 1/4 and `X_theta` starts with variance 1.
/// The oscillator quadratures have variance `sigma2_cl` each.
pub fn sample_initial_conditions(params: &PhysicalParams, rng: &mut StreamRng) -> ClassicalState {
    // sqrt(1/2) / sqrt(2)
    let s_field = 0.5;
    let s_osc = params.sigma2_cl.sqrt();
    let re = params.alpha + s_field * rng.normal();
    let im = s_field * rng.normal();
    let x = s_osc * rng.normal();
    let p = s_osc * rng.normal();
    ClassicalState {
        alpha_l: Complex64::new(re, im),
        x,
        p,
        t: 0.0,
    }
}

/// Exact solution of the classical equations of motion, advanced by `t`.
pub fn evolve_classical(state0: &ClassicalState, t: f64, params: &PhysicalParams) -> Result<ClassicalState> {
    params.validate()?;
    if !t.is_finite() || t < 0.0 {
        return Err(Error::param("t", format!("must be finite and non-negative, got {t}")));
    }
    Ok(evolve_unchecked(state0, t, params))
}

#[inline]
pub(crate) fn evolve_unchecked(s: &ClassicalState, t: f64, params: &PhysicalParams) -> ClassicalState {
    let wt = params.omega * t;
    let (sin, cos) = wt.sin_cos();
    let omc = crate::params::one_minus_cos(wt);
    let inten = s.alpha_l.norm_sqr();
    let a = envelope_unchecked(t, params).a;
    // static displacement g0 I / omega = sqrt(2) k I
    let shift = std::f64::consts::SQRT_2 * params.k * inten;
    let phase = a * inten + std::f64::consts::SQRT_2 * params.k * (s.x * sin + s.p * omc);
    ClassicalState {
        alpha_l: s.alpha_l * Complex64::from_polar(1.0, phase),
        x: s.x * cos + s.p * sin + shift * omc,
        p: -s.x * sin + s.p * cos + shift * sin,
        t: s.t + t,
    }
}

/// Fourth-order Runge-Kutta integration of the classical equations of motion,
/// repeated at half the step; fails if the two disagree by more than 1e-8.
pub fn hamilton_ode_oracle(state0: &ClassicalState, t: f64, params: &PhysicalParams, dt: f64) -> Result<ClassicalState> {
    params.validate()?;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::param("dt", "must be positive"));
    }
    if !t.is_finite() || t < 0.0 {
        return Err(Error::param("t", "must be finite and non-negative"));
    }
    let coarse = rk4(state0, t, params, dt);
    let fine = rk4(state0, t, params, 0.5 * dt);
    let diff = (coarse.alpha_l - fine.alpha_l)
        .norm()
        .max((coarse.x - fine.x).abs())
        .max((coarse.p - fine.p).abs());
    if diff > 1e-8 {
        return Err(Error::Convergence {
            context: format!("classical RK4 with dt = {dt}"),
            difference: diff,
            tolerance: 1e-8,
        });
    }
    Ok(fine)
}

fn rk4(s0: &ClassicalState, t: f64, params: &PhysicalParams, dt: f64) -> ClassicalState {
    let g0 = params.g0();
    let w = params.omega;
    let deriv = |x: f64, p: f64, a: Complex64| -> (f64, f64, Complex64) {
        (w * p, -w * x + g0 * a.norm_sqr(), Complex64::new(0.0, g0 * x) * a)
    };
    let steps = (t / dt).ceil().max(1.0) as usize;
    let h = t / steps as f64;
    let (mut x, mut p, mut a) = (s0.x, s0.p, s0.alpha_l);
    if t == 0.0 {
        return *s0;
    }
    for _ in 0..steps {
        let k1 = deriv(x, p, a);
        let k2 = deriv(x + 0.5 * h * k1.0, p + 0.5 * h * k1.1, a + k1.2 * (0.5 * h));
        let k3 = deriv(x + 0.5 * h * k2.0, p + 0.5 * h * k2.1, a + k2.2 * (0.5 * h));
        let k4 = deriv(x + h * k3.0, p + h * k3.1, a + k3.2 * h);
        x += h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
        p += h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
        a += (k1.2 + k2.2 * 2.0 + k3.2 * 2.0 + k4.2) * (h / 6.0);
    }
    ClassicalState {
        alpha_l: a,
        x,
        p,
        t: s0.t + t,
    }
}
