//! Truncated Fock-space machinery: exact closed evolution of the joint
//! field-oscillator state, Lindblad evolution with mechanical damping and
//! photon loss, and field-variance extraction.

pub mod blocks;
pub mod density;
pub mod fock;
pub mod lindblad;
pub mod pure;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::params::PhysicalParams;
use crate::series::FieldMoments;

pub use blocks::{BlockState, ChainSet};
pub use density::DensityOperator;
pub use lindblad::{evolve_lindblad, evolve_lindblad_cavity, evolve_lindblad_mech, LindbladOptions, LindbladRun};
pub use pure::{evolve_closed_pure, evolve_closed_pure_stepper, TruncatedJointState};

/// Largest allowed deviation of a pure state's norm from one.
pub const NORM_TOLERANCE: f64 = 1e-10;

/// Tail-mass policy: probability in the top 10% of either index must stay
/// below `threshold`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Truncation {
    pub threshold: f64,
}

impl Default for Truncation {
    fn default() -> Self {
        Truncation { threshold: 1e-8 }
    }
}

impl Truncation {
    pub fn check(&self, tail: f64, context: &str) -> Result<()> {
        if !tail.is_finite() {
            return Err(Error::non_finite(format!("tail mass of {context}")));
        }
        if tail > self.threshold {
            return Err(Error::Truncation {
                tail_mass: tail,
                threshold: self.threshold,
                context: context.to_string(),
            });
        }
        Ok(())
    }
}

/// Initial state of the mechanical oscillator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MechanicalInit {
    Vacuum,
    Thermal(f64),
    Coherent(Complex64),
}

impl MechanicalInit {
    /// Vacuum or thermal state according to `params.nbar_q`.
    pub fn from_params(params: &PhysicalParams) -> Self {
        if params.nbar_q > 0.0 {
            MechanicalInit::Thermal(params.nbar_q)
        } else {
            MechanicalInit::Vacuum
        }
    }
}

/// Number of indices in the top 10% of a range of `n` values.
pub(crate) fn top_count(n: usize) -> usize {
    ((0.1 * n as f64).ceil() as usize).max(1)
}

pub(crate) fn check_time(t: f64) -> Result<()> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::param("t", format!("must be finite and non-negative, got {t}")));
    }
    Ok(())
}

fn padded_size(r: f64) -> usize {
    (r * r + 8.0 * r + 10.0).ceil() as usize
}

/// Photon cutoff `ceil(alpha^2 + 8 alpha + 10)`.
pub fn default_np(alpha: f64) -> usize {
    padded_size(alpha)
}

/// Phonon cutoff for the laboratory-frame pure state, sized to the largest
/// displacement `2 k Np`.
pub fn default_nm_lab(params: &PhysicalParams, np: usize) -> usize {
    padded_size(2.0 * params.k * np as f64).max(20)
}

/// Phonon cutoff for the displaced-frame block representation. The frame
/// removes the static displacement, leaving excursions of order `k n` for
/// the photon numbers `n` that carry weight above `1e-10`, plus room for the
/// initial thermal or coherent state. The tail-mass check validates the choice.
pub fn default_nm_displaced(params: &PhysicalParams, np: usize, mech: MechanicalInit) -> Result<usize> {
    let c = fock::coherent_amplitudes(params.alpha, np);
    let n_w = (0..=np).rev().find(|&n| c[n] * c[n] >= 1e-10).unwrap_or(0);
    let r = params.k * n_w as f64;
    let extra = match mech {
        MechanicalInit::Vacuum => 0,
        MechanicalInit::Thermal(nbar) => fock::thermal_weights(nbar)?.len(),
        MechanicalInit::Coherent(beta) => padded_size(beta.norm()),
    };
    Ok(padded_size(r).max(20) + extra)
}

/// Anything from which the reduced field moments can be read.
pub trait FieldState {
    fn field_moments(&self) -> Result<FieldMoments>;

    /// Variance of `a e^{-i theta} + a^dag e^{i theta}`.
    fn field_variance(&self, theta: f64) -> Result<f64> {
        let v = self.field_moments()?.variance(theta);
        if !v.is_finite() {
            return Err(Error::non_finite("field variance"));
        }
        Ok(v)
    }
}

impl FieldState for TruncatedJointState {
    fn field_moments(&self) -> Result<FieldMoments> {
        Ok(TruncatedJointState::field_moments(self))
    }
}

impl FieldState for DensityOperator {
    fn field_moments(&self) -> Result<FieldMoments> {
        DensityOperator::field_moments(self)
    }
}

impl FieldState for BlockState {
    fn field_moments(&self) -> Result<FieldMoments> {
        Ok(BlockState::field_moments(self))
    }
}

/// Variance of the field quadrature at angle `theta`.
pub fn field_variance_from_state<S: FieldState + ?Sized>(state: &S, theta: f64) -> Result<f64> {
    state.field_variance(theta)
}

/// Result of [`evolve_closed`]: a pure state when the oscillator starts in
/// its ground state, a block density operator otherwise.
#[derive(Debug, Clone)]
pub enum ClosedState {
    Pure(TruncatedJointState),
    Mixed(BlockState),
}

impl FieldState for ClosedState {
    fn field_moments(&self) -> Result<FieldMoments> {
        match self {
            ClosedState::Pure(s) => Ok(s.field_moments()),
            ClosedState::Mixed(s) => Ok(s.field_moments()),
        }
    }
}

/// Exact closed evolution of `|alpha>` with the oscillator in its ground
/// state (pure path) or in a thermal state with `params.nbar_q` (mixed path).
/// `nm = None` picks the matching default cutoff.
pub fn evolve_closed(params: &PhysicalParams, t: f64, np: usize, nm: Option<usize>, trunc: &Truncation) -> Result<ClosedState> {
    check_time(t)?;
    let mech = MechanicalInit::from_params(params);
    if mech == MechanicalInit::Vacuum {
        let nm = nm.unwrap_or_else(|| default_nm_lab(params, np));
        return Ok(ClosedState::Pure(evolve_closed_pure(params, t, np, nm, trunc)?));
    }
    let nm = match nm {
        Some(n) => n,
        None => default_nm_displaced(params, np, mech)?,
    };
    let mut s = BlockState::initial(params, np, nm, mech, ChainSet::Moments)?;
    s.check_truncation(trunc)?;
    s.advance_closed(t)?;
    Ok(ClosedState::Mixed(s))
}
