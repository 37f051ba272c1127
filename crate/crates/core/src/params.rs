//! Model parameterization, unit conversions and the envelope functions shared
//! by every description of the cavity.
//!
//! All quantities are dimensionless. The mechanical frequency `omega` sets the
//! time unit; times handed to public functions are in units of `1/omega` unless
//! a name says otherwise (`t_over_tau` is in mechanical periods).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reduced Planck constant, J s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant, J/K.
pub const K_B: f64 = 1.380_649e-23;

/// All dimensionless model parameters.
///
/// `k = g0 / (sqrt(2) omega)` is the rescaled single-photon coupling; `g0` is
/// derived from it and never stored separately.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhysicalParams {
    /// Coherent amplitude of the initial field (real, non-negative).
    pub alpha: f64,
    /// Rescaled optomechanical coupling.
    pub k: f64,
    /// Mechanical angular frequency.
    pub omega: f64,
    /// Thermal occupation of the initial mechanical state (quantum description).
    pub nbar_q: f64,
    /// Per-quadrature variance of the classical oscillator's initial (x, p).
    pub sigma2_cl: f64,
    /// Rate at which the classical oscillator gains information about the intensity.
    #[serde(rename = "Gamma")]
    pub gamma_meas: f64,
    /// Cavity field decay rate.
    pub kappa: f64,
    /// Mechanical decay rate.
    pub gamma_m: f64,
    /// Occupation of the mechanical bath.
    pub nbar_bath: f64,
}

impl Default for PhysicalParams {
    fn default() -> Self {
        PhysicalParams {
            alpha: 20.0,
            k: 0.01,
            omega: 1.0,
            nbar_q: 0.0,
            sigma2_cl: 0.5,
            gamma_meas: 0.01,
            kappa: 0.0,
            gamma_m: 0.0,
            nbar_bath: 0.0,
        }
    }
}

impl PhysicalParams {
    /// Closed-system parameters with the oscillator initially in its ground state.
    pub fn closed(alpha: f64, k: f64) -> Self {
        PhysicalParams {
            alpha,
            k,
            ..Self::default()
        }
    }

    pub fn g0(&self) -> f64 {
        std::f64::consts::SQRT_2 * self.k * self.omega
    }

    /// Mechanical period.
    pub fn tau(&self) -> f64 {
        2.0 * PI / self.omega
    }

    /// Convert a time in mechanical periods into units of `1/omega`.
    pub fn time_from_periods(&self, t_over_tau: f64) -> f64 {
        t_over_tau * self.tau()
    }

    pub fn validate(&self) -> Result<()> {
        let fields: [(&'static str, f64); 9] = [
            ("alpha", self.alpha),
            ("k", self.k),
            ("omega", self.omega),
            ("nbar_q", self.nbar_q),
            ("sigma2_cl", self.sigma2_cl),
            ("Gamma", self.gamma_meas),
            ("kappa", self.kappa),
            ("gamma_m", self.gamma_m),
            ("nbar_bath", self.nbar_bath),
        ];
        for (name, value) in fields {
            if !value.is_finite() {
                return Err(Error::param(name, format!("must be finite, got {value}")));
            }
            if value < 0.0 {
                return Err(Error::param(name, format!("must be non-negative, got {value}")));
            }
        }
        if self.omega <= 0.0 {
            return Err(Error::param("omega", "must be strictly positive"));
        }
        Ok(())
    }
}

/// The three time-dependent envelopes entering the closed-form variances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Envelope {
    /// Accumulated Kerr-like phase `2k^2 (wt - sin wt)`.
    pub a: f64,
    /// Quantum mechanical-noise envelope, `2k^2 (2 nbar_q + 1)(1 - cos wt)`.
    pub b: f64,
    /// Classical mechanical-noise envelope, `4 sigma2_cl k^2 (1 - cos wt)`.
    pub c: f64,
}

/// `1 - cos x` without cancellation for small `x`.
#[inline]
pub(crate) fn one_minus_cos(x: f64) -> f64 {
    let s = (0.5 * x).sin();
    2.0 * s * s
}

pub fn envelope_functions(t: f64, params: &PhysicalParams) -> Result<Envelope> {
    if !t.is_finite() {
        return Err(Error::non_finite("envelope time"));
    }
    if t < 0.0 {
        return Err(Error::param("t", format!("must be non-negative, got {t}")));
    }
    Ok(envelope_unchecked(t, params))
}

#[inline]
pub(crate) fn envelope_unchecked(t: f64, params: &PhysicalParams) -> Envelope {
    let wt = params.omega * t;
    let k2 = params.k * params.k;
    let omc = one_minus_cos(wt);
    Envelope {
        a: 2.0 * k2 * (wt - wt.sin()),
        b: 2.0 * k2 * (2.0 * params.nbar_q + 1.0) * omc,
        c: 4.0 * params.sigma2_cl * k2 * omc,
    }
}

fn check_temperature(temperature: f64, omega_si: f64) -> Result<()> {
    if !temperature.is_finite() || !omega_si.is_finite() {
        return Err(Error::non_finite("thermal occupation inputs"));
    }
    if temperature < 0.0 {
        return Err(Error::param("T", "temperature must be non-negative"));
    }
    if omega_si <= 0.0 {
        return Err(Error::param("omega_SI", "angular frequency must be positive"));
    }
    Ok(())
}

/// Bose-Einstein occupation `1 / (exp(hbar w / kB T) - 1)`.
pub fn thermal_occupation_quantum(temperature: f64, omega_si: f64) -> Result<f64> {
    check_temperature(temperature, omega_si)?;
    if temperature == 0.0 {
        return Ok(0.0);
    }
    let x = HBAR * omega_si / (K_B * temperature);
    Ok(1.0 / x.exp_m1())
}

/// Equipartition occupation `kB T / (hbar w)`.
pub fn thermal_occupation_classical(temperature: f64, omega_si: f64) -> Result<f64> {
    check_temperature(temperature, omega_si)?;
    Ok(K_B * temperature / (HBAR * omega_si))
}

#[cfg(test)]
mod tests {
    use super::*;

    const OMEGA_30MHZ: f64 = 2.0 * PI * 30.0e6;

    #[test]
    fn zero_temperature_occupations_vanish() {
        assert_eq!(thermal_occupation_quantum(0.0, OMEGA_30MHZ).unwrap(), 0.0);
        assert_eq!(thermal_occupation_classical(0.0, OMEGA_30MHZ).unwrap(), 0.0);
    }

    #[test]
    fn preset_temperatures_give_stated_occupations() {
        let n1 = thermal_occupation_quantum(2.1e-3, OMEGA_30MHZ).unwrap();
        let n10 = thermal_occupation_quantum(15.1e-3, OMEGA_30MHZ).unwrap();
        let n100 = thermal_occupation_quantum(144.8e-3, OMEGA_30MHZ).unwrap();
        assert!((n1 - 1.0).abs() < 0.03, "{n1}");
        assert!((n10 - 10.0).abs() < 0.1, "{n10}");
        assert!((n100 - 100.0).abs() < 1.0, "{n100}");
        // Classical occupation at the highest temperature sits half a quantum above.
        let ncl = thermal_occupation_classical(144.8e-3, OMEGA_30MHZ).unwrap();
        assert!((ncl - (n100 + 0.5)).abs() / ncl < 0.01, "{ncl} vs {n100}");
    }

    #[test]
    fn unit_ratio_occupations() {
        // hbar w / kB T = 1
        let t = HBAR * OMEGA_30MHZ / K_B;
        let ncl = thermal_occupation_classical(t, OMEGA_30MHZ).unwrap();
        let nq = thermal_occupation_quantum(t, OMEGA_30MHZ).unwrap();
        assert!((ncl - 1.0).abs() < 1e-12);
        assert!((nq - 1.0 / (std::f64::consts::E - 1.0)).abs() < 1e-12);
        assert!((nq - 0.581_976_706_869_326_4).abs() < 1e-12);
    }

    #[test]
    fn high_temperature_offset_is_one_half() {
        let t = 1.0e3 * HBAR * OMEGA_30MHZ / K_B;
        let diff = thermal_occupation_classical(t, OMEGA_30MHZ).unwrap()
            - thermal_occupation_quantum(t, OMEGA_30MHZ).unwrap();
        assert!((diff - 0.5).abs() < 1e-4, "{diff}");
        // Laurent series of 1/x - 1/(e^x - 1) at x = 1e-3.
        let x = 1e-3;
        let series = 0.5 - x / 12.0 + x * x * x / 720.0;
        assert!((diff - series).abs() < 1e-9, "{diff} vs {series}");
    }

    #[test]
    fn non_finite_inputs_rejected() {
        assert!(thermal_occupation_quantum(f64::NAN, OMEGA_30MHZ).is_err());
        assert!(thermal_occupation_classical(1.0, f64::INFINITY).is_err());
        assert!(thermal_occupation_classical(-1.0, OMEGA_30MHZ).is_err());
    }

    #[test]
    fn envelope_values_at_special_times() {
        let p = PhysicalParams::closed(20.0, 0.01);
        let e0 = envelope_functions(0.0, &p).unwrap();
        assert_eq!((e0.a, e0.b, e0.c), (0.0, 0.0, 0.0));
        for m in 1..5 {
            let e = envelope_functions(p.time_from_periods(m as f64), &p).unwrap();
            let expected_a = 4.0 * PI * m as f64 * p.k * p.k;
            assert!((e.a - expected_a).abs() < 1e-15 * (1.0 + m as f64));
            assert!(e.b.abs() < 1e-25 && e.c.abs() < 1e-25);
        }
    }

    #[test]
    fn vacuum_matched_classical_envelope_equals_quantum() {
        let p = PhysicalParams {
            sigma2_cl: 0.5,
            nbar_q: 0.0,
            ..PhysicalParams::closed(3.0, 0.2)
        };
        for i in 0..100 {
            let e = envelope_functions(0.137 * i as f64, &p).unwrap();
            assert_eq!(e.b, e.c);
        }
    }

    #[test]
    fn envelope_shape() {
        let p = PhysicalParams {
            nbar_q: 2.0,
            sigma2_cl: 1.5,
            ..PhysicalParams::closed(3.0, 0.2)
        };
        let mut prev = envelope_functions(0.0, &p).unwrap();
        for i in 1..2000 {
            let t = 0.01 * i as f64;
            let e = envelope_functions(t, &p).unwrap();
            assert!(e.a >= prev.a);
            let later = envelope_functions(t + p.tau(), &p).unwrap();
            assert!((later.b - e.b).abs() < 1e-12 && (later.c - e.c).abs() < 1e-12);
            prev = e;
        }
    }

    #[test]
    fn validation() {
        assert!(PhysicalParams::default().validate().is_ok());
        let bad = PhysicalParams {
            k: -0.1,
            ..PhysicalParams::default()
        };
        assert!(bad.validate().is_err());
        let bad = PhysicalParams {
            omega: 0.0,
            ..PhysicalParams::default()
        };
        assert!(bad.validate().is_err());
        let bad = PhysicalParams {
            alpha: f64::NAN,
            ..PhysicalParams::default()
        };
        assert!(bad.validate().is_err());
        let p = PhysicalParams::closed(2.0, 0.1);
        assert!((p.g0() - 0.1 * 2f64.sqrt()).abs() < 1e-15);
    }
}
