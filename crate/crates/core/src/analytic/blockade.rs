use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockadeReport {
    /// `g0^2 / (omega kappa)`.
    pub blockade_ratio: f64,
    /// `2 g0^2 / (kappa gamma)`.
    pub cooperativity: f64,
    pub in_blockade: bool,
    pub strong_cooperativity: bool,
}

pub fn blockade_check(g0: f64, omega: f64, kappa: f64, gamma_m: f64) -> Result<BlockadeReport> {
    for (name, v) in [("g0", g0), ("omega", omega), ("kappa", kappa), ("gamma_m", gamma_m)] {
        if !v.is_finite() && !(name == "kappa" && v == f64::INFINITY) {
            return Err(Error::non_finite(name));
        }
    }
    if g0 < 0.0 {
        return Err(Error::param("g0", "must be non-negative"));
    }
    if omega <= 0.0 {
        return Err(Error::param("omega", "must be positive"));
    }
    if kappa <= 0.0 {
        return Err(Error::param("kappa", "must be positive"));
    }
    if gamma_m <= 0.0 {
        return Err(Error::param("gamma_m", "must be positive"));
    }
    let g2 = g0 * g0;
    let blockade_ratio = g2 / (omega * kappa);
    let cooperativity = 2.0 * g2 / (kappa * gamma_m);
    Ok(BlockadeReport {
        blockade_ratio,
        cooperativity,
        in_blockade: blockade_ratio > 1.0,
        strong_cooperativity: cooperativity > 1.0,
    })
}
