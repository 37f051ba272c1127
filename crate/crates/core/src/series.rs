//! Quadrature moments and the time-resolved variance series every description
//! produces.

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::PhysicalParams;

/// First and second moments of the field annihilation operator.
///
/// With `X_theta = a e^{-i theta} + a^dag e^{i theta}` the quadrature variance is
/// `2 Re(<a^2> e^{-2i theta}) + 2<a^dag a> + 1 - (2 Re(<a> e^{-i theta}))^2`,
/// so a coherent state has variance 1 at every angle.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FieldMoments {
    pub mean_a: Complex64,
    pub mean_a2: Complex64,
    pub mean_n: f64,
}

impl FieldMoments {
    pub fn coherent(alpha: Complex64) -> Self {
        FieldMoments {
            mean_a: alpha,
            mean_a2: alpha * alpha,
            mean_n: alpha.norm_sqr(),
        }
    }

    #[inline]
    pub fn variance(&self, theta: f64) -> f64 {
        let rot = Complex64::from_polar(1.0, -theta);
        let x_mean = 2.0 * (self.mean_a * rot).re;
        2.0 * (self.mean_a2 * rot * rot).re + 2.0 * self.mean_n + 1.0 - x_mean * x_mean
    }

    /// Convex combination with weight `w` on `self`.
    pub fn mix(&self, other: &FieldMoments, w: f64) -> FieldMoments {
        FieldMoments {
            mean_a: self.mean_a * w + other.mean_a * (1.0 - w),
            mean_a2: self.mean_a2 * w + other.mean_a2 * (1.0 - w),
            mean_n: self.mean_n * w + other.mean_n * (1.0 - w),
        }
    }
}

/// One sample of a variance series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraturePoint {
    pub t_over_tau: f64,
    pub var_min: f64,
    pub theta_star: f64,
    pub var_fixed_theta: f64,
    pub stderr: Option<f64>,
}

/// Time-resolved, angle-minimized quadrature variance of one description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSeries {
    pub label: String,
    pub params: PhysicalParams,
    /// The angle used for `var_fixed_theta`.
    pub fixed_theta: f64,
    /// Sample times in mechanical periods.
    pub times: Vec<f64>,
    pub var_min: Vec<f64>,
    pub theta_star: Vec<f64>,
    pub var_fixed_theta: Vec<f64>,
    pub stderr: Option<Vec<f64>>,
}

pub const CSV_HEADER: &str = "t_over_tau,var_min,theta_star,var_theta0,stderr";

/// Round-trip exact decimal rendering: 17 significant digits.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

impl QuadratureSeries {
    pub fn new(label: impl Into<String>, params: PhysicalParams, fixed_theta: f64) -> Self {
        QuadratureSeries {
            label: label.into(),
            params,
            fixed_theta,
            times: Vec::new(),
            var_min: Vec::new(),
            theta_star: Vec::new(),
            var_fixed_theta: Vec::new(),
            stderr: None,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn push(&mut self, point: QuadraturePoint) {
        match (point.stderr, &mut self.stderr) {
            (Some(e), Some(v)) => v.push(e),
            (Some(e), None) if self.times.is_empty() => self.stderr = Some(vec![e]),
            (None, None) => {}
            _ => panic!("stderr must be present for all points or for none"),
        }
        self.times.push(point.t_over_tau);
        self.var_min.push(point.var_min);
        self.theta_star.push(point.theta_star);
        self.var_fixed_theta.push(point.var_fixed_theta);
    }

    pub fn point(&self, i: usize) -> QuadraturePoint {
        QuadraturePoint {
            t_over_tau: self.times[i],
            var_min: self.var_min[i],
            theta_star: self.theta_star[i],
            var_fixed_theta: self.var_fixed_theta[i],
            stderr: self.stderr.as_ref().map(|s| s[i]),
        }
    }

    /// Smallest minimum-variance value and the time it occurs.
    pub fn deepest(&self) -> Option<(f64, f64)> {
        self.var_min
            .iter()
            .zip(&self.times)
            .fold(None, |best: Option<(f64, f64)>, (&v, &t)| match best {
                Some((bv, _)) if bv <= v => best,
                _ => Some((v, t)),
            })
    }

    /// Check the series invariants: equal lengths, strictly increasing times,
    /// positive finite variances, angles in `[0, pi)`.
    pub fn validate(&self) -> Result<()> {
        let n = self.times.len();
        if self.var_min.len() != n
            || self.theta_star.len() != n
            || self.var_fixed_theta.len() != n
            || self.stderr.as_ref().is_some_and(|s| s.len() != n)
        {
            return Err(Error::Invariant(format!("{}: column lengths differ", self.label)));
        }
        if self.times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Invariant(format!(
                "{}: times not strictly increasing",
                self.label
            )));
        }
        for (i, (&v, &vf)) in self.var_min.iter().zip(&self.var_fixed_theta).enumerate() {
            if !(v.is_finite() && vf.is_finite() && v > 0.0 && vf > 0.0) {
                return Err(Error::Invariant(format!(
                    "{}: non-positive variance at t/tau = {}",
                    self.label, self.times[i]
                )));
            }
        }
        if self
            .theta_star
            .iter()
            .any(|&th| !(0.0..std::f64::consts::PI).contains(&th))
        {
            return Err(Error::Invariant(format!("{}: theta* outside [0, pi)", self.label)));
        }
        if let Some(s) = &self.stderr {
            if s.iter().any(|&e| !(e >= 0.0)) {
                return Err(Error::Invariant(format!("{}: negative stderr", self.label)));
            }
        }
        Ok(())
    }

    /// Canonical CSV: `t_over_tau,var_min,theta_star,var_theta0,stderr`, LF endings,
    /// empty stderr cells for deterministic curves.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{CSV_HEADER}")?;
        for i in 0..self.len() {
            let err = match &self.stderr {
                Some(s) => format_f64(s[i]),
                None => String::new(),
            };
            writeln!(
                out,
                "{},{},{},{},{}",
                format_f64(self.times[i]),
                format_f64(self.var_min[i]),
                format_f64(self.theta_star[i]),
                format_f64(self.var_fixed_theta[i]),
                err
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coherent_moments_have_unit_variance() {
        let m = FieldMoments::coherent(Complex64::new(2.0, -0.7));
        for i in 0..32 {
            let th = i as f64 * 0.1;
            assert!((m.variance(th) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn fock_and_poisson_mixture() {
        let fock = FieldMoments {
            mean_n: 3.0,
            ..Default::default()
        };
        assert_eq!(fock.variance(0.4), 7.0);
    }

    #[test]
    fn csv_layout() {
        let mut s = QuadratureSeries::new("Q", PhysicalParams::default(), 0.0);
        s.push(QuadraturePoint {
            t_over_tau: 0.0,
            var_min: 1.0,
            theta_star: 0.0,
            var_fixed_theta: 1.0,
            stderr: None,
        });
        s.push(QuadraturePoint {
            t_over_tau: 0.05,
            var_min: 0.5,
            theta_star: 3.0,
            var_fixed_theta: 0.75,
            stderr: None,
        });
        s.validate().unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.split('\n').collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(
            lines[2],
            "5.0000000000000003e-2,5.0000000000000000e-1,3.0000000000000000e0,7.5000000000000000e-1,"
        );
        assert!(!text.contains('\r'));
        let parsed: f64 = lines[2].split(',').next().unwrap().parse().unwrap();
        assert_eq!(parsed, 0.05);
    }

    #[test]
    fn validation_catches_bad_series() {
        let mut s = QuadratureSeries::new("bad", PhysicalParams::default(), 0.0);
        for t in [0.0, 0.0] {
            s.push(QuadraturePoint {
                t_over_tau: t,
                var_min: 1.0,
                theta_star: 0.0,
                var_fixed_theta: 1.0,
                stderr: None,
            });
        }
        assert!(s.validate().is_err());
    }
}
