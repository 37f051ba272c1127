use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::numeric::canonical_angle;

pub const DEFAULT_THETA_GRID: usize = 256;

const REFINE_TOL: f64 = 1e-7;
/// Values closer than this (relative) count as ties, so rounding noise on a
/// flat curve cannot move the reported angle.
const TIE_TOL: f64 = 1e-12;

fn tie(v: f64) -> f64 {
    TIE_TOL * v.abs().max(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaMinimum {
    pub var_min: f64,
    /// Minimizing angle in `[0, pi)`.
    pub theta_star: f64,
}

/// Minimize a period-pi function of the quadrature angle.
///
/// A uniform grid of `grid_n` points on `[0, pi)` locates the basin (ties go
/// to the smaller angle, with values within a relative `1e-12` treated as
/// equal), then golden-section search refines within one grid step on either
/// side. The refined point replaces the grid point only when it is lower by
/// more than that tie tolerance.
pub fn minimize_over_theta<F>(mut f: F, grid_n: usize) -> Result<ThetaMinimum>
where
    F: FnMut(f64) -> Result<f64>,
{
    if grid_n < 16 {
        return Err(Error::param("grid_n", format!("must be at least 16, got {grid_n}")));
    }
    let step = PI / grid_n as f64;
    let mut eval = |th: f64| -> Result<f64> {
        let v = f(th)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::non_finite(format!("variance at theta = {th}")))
        }
    };

    let mut best_i = 0;
    let mut best_v = f64::INFINITY;
    for i in 0..grid_n {
        let v = eval(i as f64 * step)?;
        if i == 0 || v < best_v - tie(best_v) {
            best_v = v;
            best_i = i;
        }
    }
    let grid_theta = best_i as f64 * step;

    // Golden-section search on [grid_theta - step, grid_theta + step].
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut lo = grid_theta - step;
    let mut hi = grid_theta + step;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = eval(x1)?;
    let mut f2 = eval(x2)?;
    while hi - lo > REFINE_TOL {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = eval(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = eval(x2)?;
        }
    }
    let (ref_theta, ref_v) = if f1 <= f2 { (x1, f1) } else { (x2, f2) };

    if ref_v < best_v - tie(best_v) {
        Ok(ThetaMinimum {
            var_min: ref_v,
            theta_star: canonical_angle(ref_theta),
        })
    } else {
        Ok(ThetaMinimum {
            var_min: best_v,
            theta_star: grid_theta,
        })
    }
}
