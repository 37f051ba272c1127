use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::params::PhysicalParams;
use crate::series::FieldMoments;

use super::fock::{coherent_amplitudes, coherent_amplitudes_complex};
use super::{check_time, top_count, Truncation, NORM_TOLERANCE};

/// Pure joint state on `(Np + 1) x (Nm + 1)` Fock states, photon index major.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedJointState {
    pub np: usize,
    pub nm: usize,
    pub t: f64,
    amps: Vec<Complex64>,
    /// Probability in the top 10% of photon and phonon indices.
    pub tail_field: f64,
    pub tail_mech: f64,
    /// Norm before the final renormalization.
    pub raw_norm: f64,
}

impl TruncatedJointState {
    fn from_amplitudes(np: usize, nm: usize, t: f64, mut amps: Vec<Complex64>, trunc: &Truncation) -> Result<Self> {
        let norm: f64 = amps.iter().map(|z| z.norm_sqr()).sum();
        if !norm.is_finite() {
            return Err(Error::non_finite("joint state norm"));
        }
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::Truncation {
                tail_mass: (1.0 - norm).abs(),
                threshold: NORM_TOLERANCE,
                context: format!("joint state norm {norm} with Np = {np}, Nm = {nm}"),
            });
        }
        let s = norm.sqrt().recip();
        amps.iter_mut().for_each(|z| *z *= s);
        let w = nm + 1;
        let fn0 = np + 1 - top_count(np + 1);
        let fm0 = nm + 1 - top_count(nm + 1);
        let mut tail_field = 0.0;
        let mut tail_mech = 0.0;
        for n in 0..=np {
            for m in 0..=nm {
                let p = amps[n * w + m].norm_sqr();
                if n >= fn0 {
                    tail_field += p;
                }
                if m >= fm0 {
                    tail_mech += p;
                }
            }
        }
        let state = TruncatedJointState {
            np,
            nm,
            t,
            amps,
            tail_field,
            tail_mech,
            raw_norm: norm,
        };
        trunc.check(state.tail_field.max(state.tail_mech), "pure joint state")?;
        Ok(state)
    }

    #[inline]
    pub fn amplitude(&self, n: usize, m: usize) -> Complex64 {
        self.amps[n * (self.nm + 1) + m]
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum()
    }

    fn row(&self, n: usize) -> &[Complex64] {
        let w = self.nm + 1;
        &self.amps[n * w..(n + 1) * w]
    }

    pub fn field_moments(&self) -> FieldMoments {
        let mut mean_a = Complex64::new(0.0, 0.0);
        let mut mean_a2 = Complex64::new(0.0, 0.0);
        let mut mean_n = 0.0;
        let inner = |x: &[Complex64], y: &[Complex64]| -> Complex64 {
            x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
        };
        for n in 0..=self.np {
            let r = self.row(n);
            mean_n += n as f64 * r.iter().map(|z| z.norm_sqr()).sum::<f64>();
            if n < self.np {
                mean_a += inner(r, self.row(n + 1)) * ((n + 1) as f64).sqrt();
            }
            if n + 1 < self.np {
                mean_a2 += inner(r, self.row(n + 2)) * (((n + 1) * (n + 2)) as f64).sqrt();
            }
        }
        FieldMoments {
            mean_a,
            mean_a2,
            mean_n,
        }
    }

    /// `Tr(rho_field^2)`.
    pub fn field_purity(&self) -> f64 {
        // rho_field = Psi Psi^dag, purity = sum |<row_n|row_n'>|^2
        let mut s = 0.0;
        for n in 0..=self.np {
            for n2 in 0..=self.np {
                let z: Complex64 = self.row(n).iter().zip(self.row(n2)).map(|(a, b)| a * b.conj()).sum();
                s += z.norm_sqr();
            }
        }
        s
    }
}

/// Exact closed evolution of `|alpha> (x) |0>`: in photon-number block `n` the
/// oscillator is the coherent state `k n (1 - e^{-i omega t})` and the block
/// picks up the phase `A(t) n^2 / 2`.
pub fn evolve_closed_pure(params: &PhysicalParams, t: f64, np: usize, nm: usize, trunc: &Truncation) -> Result<TruncatedJointState> {
    params.validate()?;
    check_time(t)?;
    if params.nbar_q != 0.0 {
        return Err(Error::param("nbar_q", "pure-state evolution needs the oscillator ground state"));
    }
    let c = coherent_amplitudes(params.alpha, np);
    let a = crate::params::envelope_unchecked(t, params).a;
    let rot = Complex64::new(1.0, 0.0) - Complex64::from_polar(1.0, -params.omega * t);
    let mut amps = Vec::with_capacity((np + 1) * (nm + 1));
    for (n, &cn) in c.iter().enumerate() {
        let nf = n as f64;
        let phase = Complex64::from_polar(cn, 0.5 * a * nf * nf);
        let beta = rot * (params.k * nf);
        for z in coherent_amplitudes_complex(beta, nm) {
            amps.push(phase * z);
        }
    }
    TruncatedJointState::from_amplitudes(np, nm, t, amps, trunc)
}

/// Independent oracle: fourth-order Runge-Kutta on each photon-number block
/// with `H_n = omega b^dag b - k omega n (b + b^dag)`, repeated at half the step.
///
/// Returns the half-step state and the largest amplitude difference between
/// the two runs.
pub fn evolve_closed_pure_stepper(
    params: &PhysicalParams,
    t: f64,
    np: usize,
    nm: usize,
    dt: f64,
    trunc: &Truncation,
) -> Result<(TruncatedJointState, f64)> {
    params.validate()?;
    check_time(t)?;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::param("dt", "must be positive"));
    }
    if params.nbar_q != 0.0 {
        return Err(Error::param("nbar_q", "pure-state evolution needs the oscillator ground state"));
    }
    let c = coherent_amplitudes(params.alpha, np);
    let run = |h: f64| -> Vec<Vec<Complex64>> {
        (0..=np)
            .into_par_iter()
            .map(|n| {
                let mut psi = vec![Complex64::new(0.0, 0.0); nm + 1];
                psi[0] = Complex64::new(c[n], 0.0);
                rk4_block(&mut psi, params.omega, params.k * params.omega * n as f64, t, h);
                psi
            })
            .collect()
    };
    let coarse = run(dt);
    let fine = run(0.5 * dt);
    let diff = coarse
        .iter()
        .flatten()
        .zip(fine.iter().flatten())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    let amps = fine.into_iter().flatten().collect();
    Ok((TruncatedJointState::from_amplitudes(np, nm, t, amps, trunc)?, diff))
}

fn rk4_block(psi: &mut [Complex64], omega: f64, drive: f64, t: f64, dt: f64) {
    let d = psi.len();
    let steps = (t / dt).ceil() as usize;
    if steps == 0 {
        return;
    }
    let h = t / steps as f64;
    let sq: Vec<f64> = (0..d).map(|j| (j as f64).sqrt()).collect();
    // -i H psi
    let apply = |x: &[Complex64], out: &mut [Complex64]| {
        for j in 0..d {
            let mut hx = x[j] * (omega * j as f64);
            let mut coup = Complex64::new(0.0, 0.0);
            if j + 1 < d {
                coup += x[j + 1] * sq[j + 1];
            }
            if j > 0 {
                coup += x[j - 1] * sq[j];
            }
            hx -= coup * drive;
            out[j] = Complex64::new(hx.im, -hx.re);
        }
    };
    let mut k1 = vec![Complex64::new(0.0, 0.0); d];
    let mut k2 = k1.clone();
    let mut k3 = k1.clone();
    let mut k4 = k1.clone();
    let mut tmp = k1.clone();
    for _ in 0..steps {
        apply(psi, &mut k1);
        for j in 0..d {
            tmp[j] = psi[j] + k1[j] * (0.5 * h);
        }
        apply(&tmp, &mut k2);
        for j in 0..d {
            tmp[j] = psi[j] + k2[j] * (0.5 * h);
        }
        apply(&tmp, &mut k3);
        for j in 0..d {
            tmp[j] = psi[j] + k3[j] * h;
        }
        apply(&tmp, &mut k4);
        for j in 0..d {
            psi[j] += (k1[j] + (k2[j] + k3[j]) * 2.0 + k4[j]) * (h / 6.0);
        }
    }
}
