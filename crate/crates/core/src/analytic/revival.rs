use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{envelope_unchecked, PhysicalParams};

use super::check_point;

/// Default half-width of a revival window, in mechanical periods.
pub const DEFAULT_REVIVAL_HALF_WIDTH: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Revival {
    /// Near `omega t = N pi / (2 k^2)`, `N` odd: variance returns to about 1.
    First,
    /// Near `omega t = N pi / k^2`, `N >= 1`: the squeezing revival.
    Second,
}

impl Revival {
    fn name(self) -> &'static str {
        match self {
            Revival::First => "first",
            Revival::Second => "second",
        }
    }

    /// Spacing of consecutive centers in units of `omega t`, and the first center.
    fn lattice(self, k: f64) -> (f64, f64) {
        let k2 = k * k;
        match self {
            Revival::First => (PI / k2, PI / (2.0 * k2)),
            Revival::Second => (PI / k2, PI / k2),
        }
    }
}

/// The first `count` revival centers, as times in units of `1/omega`.
pub fn revival_centers(params: &PhysicalParams, which: Revival, count: usize) -> Result<Vec<f64>> {
    params.validate()?;
    if params.k == 0.0 {
        return Err(Error::param("k", "no revivals without coupling"));
    }
    let (spacing, first) = which.lattice(params.k);
    Ok((0..count)
        .map(|j| (first + j as f64 * spacing) / params.omega)
        .collect())
}

/// Large-amplitude approximation of the quantum variance near a revival.
///
/// `half_width` is the window half-width in mechanical periods; times outside
/// every window of the requested kind are rejected.
pub fn revival_approximation(
    theta: f64,
    t: f64,
    params: &PhysicalParams,
    which: Revival,
    half_width: f64,
) -> Result<f64> {
    check_point(theta, t, params)?;
    if !(half_width.is_finite() && half_width >= 0.0) {
        return Err(Error::param("half_width", "must be finite and non-negative"));
    }
    if params.k == 0.0 {
        return Err(Error::param("k", "no revivals without coupling"));
    }
    let wt = params.omega * t;
    let (spacing, first) = which.lattice(params.k);
    let j = ((wt - first) / spacing).round().max(0.0);
    let center = first + j * spacing;
    if (wt - center).abs() > 2.0 * PI * half_width {
        return Err(Error::OutOfWindow {
            which: which.name(),
            t,
            nearest_center: center / params.omega,
            half_width: half_width * params.tau(),
        });
    }

    let a = envelope_unchecked(t, params).a;
    let a2 = params.alpha * params.alpha;
    let h1 = (0.5 * (2.0 * a + a2 * (2.0 * a).sin() - 2.0 * theta)).cos();
    let v = match which {
        // 2 alpha^2 (1 + cos phi1) + 1
        Revival::First => 1.0 + 4.0 * a2 * h1 * h1,
        Revival::Second => {
            let h2 = (0.5 * (a + 2.0 * a2 * a.sin() - 2.0 * theta)).cos();
            1.0 + 4.0 * a2 * (h1 * h1 - h2 * h2)
        }
    };
    Ok(v)
}
