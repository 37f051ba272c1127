use crate::error::Result;
use crate::params::{envelope_unchecked, PhysicalParams};

use super::check_point;

/// The nine helper functions of the classical closed form, all functions of
/// the accumulated phase `A(t)` only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassicalEnvelope {
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    pub c1: f64,
    pub c2: f64,
    pub s1: f64,
    pub s2: f64,
    pub phi1: f64,
    pub phi2: f64,
}

impl ClassicalEnvelope {
    pub fn from_phase(a: f64) -> Self {
        let a2 = a * a;
        let p1 = 1.0 + a2;
        let p4 = 4.0 + a2;
        let p1_3 = p1 * p1 * p1;
        let p4_2 = p4 * p4;
        let p4_4 = p4_2 * p4_2;
        ClassicalEnvelope {
            d1: 2.0 * a2 / p1,
            d2: 2.0 * a2 / p4,
            d3: 16.0 / p4_2,
            c1: (1.0 - 3.0 * a2) / p1_3,
            c2: (256.0 - 384.0 * a2 + 16.0 * a2 * a2) / p4_4,
            s1: (3.0 * a - a2 * a) / p1_3,
            s2: (512.0 * a - 128.0 * a2 * a) / p4_4,
            phi1: 2.0 * a / p1,
            phi2: 4.0 * a / p4,
        }
    }
}

pub fn classical_envelope(t: f64, params: &PhysicalParams) -> Result<ClassicalEnvelope> {
    check_point(0.0, t, params)?;
    Ok(ClassicalEnvelope::from_phase(envelope_unchecked(t, params).a))
}

/// Field quadrature variance of the fully classical model with Gaussian
/// initial field and oscillator noise.
pub fn classical_variance(theta: f64, t: f64, params: &PhysicalParams) -> Result<f64> {
    check_point(theta, t, params)?;
    let env = envelope_unchecked(t, params);
    let h = ClassicalEnvelope::from_phase(env.a);
    let a2 = params.alpha * params.alpha;

    let e1 = a2 * h.d1 + 2.0 * env.c;
    let x1 = a2 * h.phi1 - 2.0 * theta;
    let e2 = 2.0 * a2 * h.d2 + env.c;
    let x2 = 2.0 * a2 * h.phi2 - 2.0 * theta;

    let osc1 = h.c1 * x1.cos() - h.s1 * x1.sin();
    let osc2 = h.c2 * x2.cos() - h.s2 * x2.sin();
    // 1 + e^{-e1} osc1 is non-negative because |c1 + i s1| <= 1, and
    // d3 + osc2 >= 0 because |c2 + i s2| = d3.
    let first = -(-e1).exp_m1() + (-e1).exp() * (1.0 + osc1);
    let second = (-e2).exp() * (h.d3 + osc2);
    Ok(1.0 + 2.0 * a2 * (first - second))
}
