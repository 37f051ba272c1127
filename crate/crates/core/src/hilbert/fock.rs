//! Fock-basis building blocks: coherent and thermal weights and real
//! displacement operators.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Fock amplitudes `<n|alpha>` for `n = 0..=n_max`, real `alpha >= 0`.
///
/// The amplitude at the most likely photon number is evaluated in log space
/// without cancellation, and the rest follow by recursion outward from it, so
/// `alpha = 50` neither underflows nor loses digits.
pub fn coherent_amplitudes(alpha: f64, n_max: usize) -> Vec<f64> {
    let mut out = vec![0.0; n_max + 1];
    if alpha == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let x = alpha * alpha;
    let n0 = x.floor() as usize;
    let top = n_max.max(n0);
    let mut c = vec![0.0; top + 1];
    c[n0] = (0.5 * ln_poisson(x, n0)).exp();
    for n in n0..top {
        c[n + 1] = c[n] * alpha / ((n + 1) as f64).sqrt();
    }
    for n in (1..=n0).rev() {
        c[n - 1] = c[n] * (n as f64).sqrt() / alpha;
    }
    out.copy_from_slice(&c[..=n_max]);
    out
}

/// `ln(e^{-x} x^n / n!)`.
fn ln_poisson(x: f64, n: usize) -> f64 {
    if n < 10 {
        let ln_fact: f64 = (2..=n).map(|j| (j as f64).ln()).sum();
        return -x + n as f64 * x.ln() - ln_fact;
    }
    // Stirling series for ln n!, with the large terms cancelled analytically.
    let nf = n as f64;
    let series = 1.0 / (12.0 * nf) - 1.0 / (360.0 * nf.powi(3)) + 1.0 / (1260.0 * nf.powi(5)) - 1.0 / (1680.0 * nf.powi(7));
    (nf - x) + nf * ((x - nf) / nf).ln_1p() - 0.5 * (2.0 * std::f64::consts::PI * nf).ln() - series
}

/// Fock amplitudes of a complex coherent state.
pub fn coherent_amplitudes_complex(beta: Complex64, n_max: usize) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(n_max + 1);
    let mut c = Complex64::new((-0.5 * beta.norm_sqr()).exp(), 0.0);
    out.push(c);
    for n in 1..=n_max {
        c = c * beta / (n as f64).sqrt();
        out.push(c);
    }
    out
}

/// Geometric occupation weights of a thermal state, cut where the cumulative
/// weight first exceeds `1 - 1e-10`, then renormalized.
pub fn thermal_weights(nbar: f64) -> Result<Vec<f64>> {
    if !(nbar.is_finite() && nbar >= 0.0) {
        return Err(Error::param("nbar", "must be finite and non-negative"));
    }
    if nbar == 0.0 {
        return Ok(vec![1.0]);
    }
    let q = nbar / (nbar + 1.0);
    let mut w = Vec::new();
    let mut p = 1.0 / (nbar + 1.0);
    let mut cum = 0.0;
    loop {
        w.push(p);
        cum += p;
        if cum > 1.0 - 1e-10 {
            break;
        }
        p *= q;
    }
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= s);
    Ok(w)
}

/// Extra basis states used when building displacement operators, so that the
/// kept `dim x dim` corner is unaffected by the truncation of the generator.
fn padding(r_max: f64) -> usize {
    (r_max * r_max + 10.0 * r_max + 40.0).ceil() as usize
}

fn generator(dim: usize) -> DMatrix<f64> {
    // b^dag - b
    let mut g = DMatrix::zeros(dim, dim);
    for j in 0..dim - 1 {
        let s = ((j + 1) as f64).sqrt();
        g[(j + 1, j)] = s;
        g[(j, j + 1)] = -s;
    }
    g
}

/// `D(beta) = exp(beta (b^dag - b))` for real `beta`, restricted to the first
/// `dim` Fock states.
pub fn displacement_matrix(beta: f64, dim: usize) -> DMatrix<f64> {
    let big = dim + padding(beta.abs());
    let d = (generator(big) * beta).exp();
    d.view((0, 0), (dim, dim)).into_owned()
}

/// `D(j * step)` for `j = 0..=count`, restricted to `dim` Fock states. Built by
/// repeated multiplication on a padded space.
pub fn displacement_ladder(step: f64, count: usize, dim: usize) -> Vec<DMatrix<f64>> {
    let big = dim + padding(step.abs() * count as f64);
    let d1 = (generator(big) * step).exp();
    let mut cur = DMatrix::<f64>::identity(big, big);
    let mut out = Vec::with_capacity(count + 1);
    for j in 0..=count {
        if j > 0 {
            cur = &d1 * &cur;
        }
        out.push(cur.view((0, 0), (dim, dim)).into_owned());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coherent_norm_and_large_amplitude() {
        let c = coherent_amplitudes(2.0, 40);
        let norm: f64 = c.iter().map(|x| x * x).sum();
        assert!((norm - 1.0).abs() < 1e-14);
        let big = coherent_amplitudes(50.0, 3000);
        let norm: f64 = big.iter().map(|x| x * x).sum();
        assert!((norm - 1.0).abs() < 1e-12);
        let z = coherent_amplitudes_complex(Complex64::new(2.0, 0.0), 40);
        for (a, b) in c.iter().zip(&z) {
            assert!((a - b.re).abs() < 1e-15);
        }
    }

    #[test]
    fn thermal_cutoff() {
        let w = thermal_weights(1.0).unwrap();
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(w.len() > 30 && w.len() < 40);
        let mean: f64 = w.iter().enumerate().map(|(j, p)| j as f64 * p).sum();
        assert!((mean - 1.0).abs() < 1e-8);
        assert_eq!(thermal_weights(0.0).unwrap(), vec![1.0]);
    }

    #[test]
    fn displacement_of_vacuum_is_coherent() {
        let d = displacement_matrix(1.3, 30);
        let c = coherent_amplitudes(1.3, 29);
        for m in 0..30 {
            assert!((d[(m, 0)] - c[m]).abs() < 1e-13, "{m}");
        }
        let ladder = displacement_ladder(0.1, 30, 40);
        let direct = displacement_matrix(2.3, 40);
        assert!((&ladder[23] - &direct).amax() < 1e-12);
        let fwd = displacement_matrix(2.3, 70);
        let inv = displacement_matrix(-2.3, 70);
        let prod = &fwd.view((0, 0), (15, 70)) * &inv.view((0, 0), (70, 15));
        assert!((prod - DMatrix::<f64>::identity(15, 15)).amax() < 1e-12);
    }
}
