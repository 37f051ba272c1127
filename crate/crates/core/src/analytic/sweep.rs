use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::PhysicalParams;

use super::quantum_variance;

/// `log10` of the quantum variance after one mechanical period.
///
/// `values[i][j]` belongs to `alpha_grid[i]` and `k_grid[j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepMatrix {
    pub alpha_grid: Vec<f64>,
    pub k_grid: Vec<f64>,
    pub theta: f64,
    pub values: Vec<Vec<f64>>,
}

impl SweepMatrix {
    pub fn get(&self, alpha: f64, k: f64) -> Option<f64> {
        let i = self.alpha_grid.iter().position(|&a| a == alpha)?;
        let j = self.k_grid.iter().position(|&x| x == k)?;
        Some(self.values[i][j])
    }
}

pub fn sweep_variance_at_tau(alpha_grid: &[f64], k_grid: &[f64], theta: f64) -> Result<SweepMatrix> {
    if alpha_grid.is_empty() || k_grid.is_empty() {
        return Err(Error::param("grid", "sweep grids must be nonempty"));
    }
    let values = alpha_grid
        .iter()
        .map(|&alpha| {
            k_grid
                .iter()
                .map(|&k| {
                    let p = PhysicalParams::closed(alpha, k);
                    let v = quantum_variance(theta, p.tau(), &p)?;
                    Ok(v.log10())
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepMatrix {
        alpha_grid: alpha_grid.to_vec(),
        k_grid: k_grid.to_vec(),
        theta,
        values,
    })
}
