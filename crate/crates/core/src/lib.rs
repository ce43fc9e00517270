//! Stability theory and simulation of a two-station polling system with an
//! exhaustive policy at station 2 and an adaptive limited policy at station 1.
//!
//! * [`analysis`]: closed-form saturated service rate and stability predicates.
//! * [`simulator`]: event-driven simulation of the full and saturated systems.
//! * [`experiments`]: harness comparing the two and the matched-moments demo.

pub mod analysis;
pub mod distributions;
pub mod error;
pub mod experiments;
pub mod quadrature;
pub mod simulator;
pub mod stats;
pub mod streams;

pub use analysis::{AuxiliaryChainQuantities, StabilityVerdict, SystemParams, TransitionProbs};
pub use distributions::{match_two_point, Branch, MomentMatchSpec, ServiceDistribution};
pub use error::{Error, Result};
