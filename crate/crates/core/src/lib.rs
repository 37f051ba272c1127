//! Simulation of a single-mode optomechanical cavity under several rival
//! descriptions (quantum, classical, mean-field hybrids and a continuous
//! measurement hybrid), producing the time-resolved, angle-minimized optical
//! quadrature variance.

pub mod analytic;
pub mod cli;
pub mod classical;
pub mod error;
pub mod hilbert;
pub mod hybrid;
pub mod numeric;
pub mod params;
pub mod rng;
pub mod series;

pub use error::{Error, Result};
pub use params::PhysicalParams;
pub use rng::RandomSource;
pub use series::{FieldMoments, QuadraturePoint, QuadratureSeries};
