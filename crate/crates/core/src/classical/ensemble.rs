use rayon::prelude::*;

use crate::analytic::minimize_over_theta;
use crate::error::{Error, Result};
use crate::numeric::CompensatedSum;
use crate::params::PhysicalParams;
use crate::rng::RandomSource;
use crate::series::{QuadraturePoint, QuadratureSeries};

use super::{evolve_unchecked, sample_initial_conditions};

/// Number of leave-one-block-out jackknife blocks.
pub const JACKKNIFE_BLOCKS: usize = 100;

/// Relative standard error above which the estimate is flagged as imprecise.
const PRECISION_WARNING: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalEnsemble {
    pub series: QuadratureSeries,
    /// Smallest eigenvalue of the quadrature covariance at each time, the
    /// closed-form minimum over all angles.
    pub covariance_min: Vec<f64>,
    /// Non-fatal diagnostics, e.g. an ensemble too small for the requested precision.
    pub warnings: Vec<String>,
}

/// Sums of the centred field components `u = Re(a) - alpha`, `v = Im(a)`.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: f64,
    u: CompensatedSum,
    v: CompensatedSum,
    uu: CompensatedSum,
    vv: CompensatedSum,
    uv: CompensatedSum,
}

impl Moments {
    fn add(&mut self, u: f64, v: f64) {
        self.n += 1.0;
        self.u.add(u);
        self.v.add(v);
        self.uu.add(u * u);
        self.vv.add(v * v);
        self.uv.add(u * v);
    }

    fn merge(&mut self, o: &Moments) {
        self.n += o.n;
        self.u.merge(&o.u);
        self.v.merge(&o.v);
        self.uu.merge(&o.uu);
        self.vv.merge(&o.vv);
        self.uv.merge(&o.uv);
    }

    fn minus(&self, o: &Moments) -> Moments {
        let d = |a: &CompensatedSum, b: &CompensatedSum| -> CompensatedSum {
            [a.value(), -b.value()].into_iter().collect()
        };
        Moments {
            n: self.n - o.n,
            u: d(&self.u, &o.u),
            v: d(&self.v, &o.v),
            uu: d(&self.uu, &o.uu),
            vv: d(&self.vv, &o.vv),
            uv: d(&self.uv, &o.uv),
        }
    }

    /// Unbiased sample covariance `(c_uu, c_uv, c_vv)`.
    fn covariance(&self) -> (f64, f64, f64) {
        let n = self.n;
        let (su, sv) = (self.u.value(), self.v.value());
        let c_uu = (self.uu.value() - su * su / n) / (n - 1.0);
        let c_vv = (self.vv.value() - sv * sv / n) / (n - 1.0);
        let c_uv = (self.uv.value() - su * sv / n) / (n - 1.0);
        (c_uu, c_uv, c_vv)
    }
}

/// Variance of `X_theta = 2 Re(a e^{-i theta})` from the covariance of `(Re a, Im a)`.
#[inline]
fn quadrature_variance(cov: (f64, f64, f64), theta: f64) -> f64 {
    let (s, c) = theta.sin_cos();
    4.0 * (c * c * cov.0 + 2.0 * s * c * cov.1 + s * s * cov.2)
}

/// Smallest eigenvalue of `4 * [[c_uu, c_uv], [c_uv, c_vv]]`.
pub fn covariance_min_variance(c_uu: f64, c_uv: f64, c_vv: f64) -> f64 {
    let mean = 0.5 * (c_uu + c_vv);
    let r = (0.25 * (c_uu - c_vv).powi(2) + c_uv * c_uv).sqrt();
    4.0 * (mean - r)
}

/// Monte Carlo estimate of the classical quadrature variance.
///
/// Sample `i` draws from stream `source.stream_index + i`; samples are split
/// into [`JACKKNIFE_BLOCKS`] contiguous blocks that are processed in parallel
/// and reduced in block order, so the result does not depend on the number
/// of worker threads.
pub fn ensemble_variance(
    params: &PhysicalParams,
    n_samples: usize,
    times_over_tau: &[f64],
    theta_grid_n: usize,
    source: RandomSource,
) -> Result<ClassicalEnsemble> {
    params.validate()?;
    if n_samples < 1000 {
        return Err(Error::param("n_samples", format!("need at least 1000, got {n_samples}")));
    }
    if times_over_tau.is_empty() {
        return Err(Error::param("times", "empty time grid"));
    }
    if times_over_tau.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(Error::param("times", "times must be finite and non-negative"));
    }
    let times: Vec<f64> = times_over_tau.iter().map(|&t| params.time_from_periods(t)).collect();
    let nt = times.len();
    let blocks = JACKKNIFE_BLOCKS;
    let base = n_samples / blocks;
    let extra = n_samples % blocks;
    let start_of = |b: usize| b * base + b.min(extra);

    let per_block: Vec<Vec<Moments>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut acc = vec![Moments::default(); nt];
            for i in start_of(b)..start_of(b + 1) {
                let mut rng = source.with_stream(source.stream_index + i as u64).stream();
                let s0 = sample_initial_conditions(params, &mut rng);
                for (m, &t) in acc.iter_mut().zip(&times) {
                    let s = evolve_unchecked(&s0, t, params);
                    m.add(s.alpha_l.re - params.alpha, s.alpha_l.im);
                }
            }
            acc
        })
        .collect();

    let mut total = vec![Moments::default(); nt];
    for block in &per_block {
        for (t, m) in total.iter_mut().zip(block) {
            t.merge(m);
        }
    }

    let fixed_theta = 0.0;
    let mut series = QuadratureSeries::new("C-MC", *params, fixed_theta);
    let mut covariance_min = Vec::with_capacity(nt);
    let mut warnings = Vec::new();
    for j in 0..nt {
        let cov = total[j].covariance();
        let best = minimize_over_theta(|th| Ok(quadrature_variance(cov, th)), theta_grid_n)?;
        let loo: Vec<f64> = per_block
            .iter()
            .map(|block| {
                let c = total[j].minus(&block[j]).covariance();
                minimize_over_theta(|th| Ok(quadrature_variance(c, th)), theta_grid_n).map(|m| m.var_min)
            })
            .collect::<Result<_>>()?;
        let mean = loo.iter().sum::<f64>() / blocks as f64;
        let ss: f64 = loo.iter().map(|v| (v - mean).powi(2)).sum();
        let se = ((blocks - 1) as f64 / blocks as f64 * ss).sqrt();
        if se > PRECISION_WARNING * best.var_min {
            warnings.push(format!(
                "t/tau = {}: relative standard error {:.3} exceeds {PRECISION_WARNING}; increase n_samples",
                times_over_tau[j],
                se / best.var_min
            ));
        }
        covariance_min.push(covariance_min_variance(cov.0, cov.1, cov.2));
        series.push(QuadraturePoint {
            t_over_tau: times_over_tau[j],
            var_min: best.var_min,
            theta_star: best.theta_star,
            var_fixed_theta: quadrature_variance(cov, fixed_theta),
            stderr: Some(se),
        });
    }
    series.validate()?;
    Ok(ClassicalEnsemble {
        series,
        covariance_min,
        warnings,
    })
}
