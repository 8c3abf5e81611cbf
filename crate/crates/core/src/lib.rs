//! Exact two-photon state-vector simulator for polarization-entangled
//! linear-optics experiments, set up for the quantum delayed-choice
//! experiment with a quantum beam-splitter.
//!
//! The math is generic over [`Real`] (`f32` or `f64`); the aliases at the
//! bottom of this file fix it to `f64`, which is what the tolerances in the
//! checks assume.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod checkpoints;
pub mod error;
pub mod experiment;
pub mod montecarlo;
pub mod optics;
#[cfg(test)]
mod properties;
pub mod scalar;
pub mod spacetime;
pub mod state;
pub mod surface;

pub use error::{Error, Result};
pub use experiment::{
    AnalysisBasis, CoincidenceCategory, CorroborativeDetector, DetectorId, ExperimentSettings, InputKind, TestGroup,
};
pub use scalar::{Amplitude, Real};
pub use state::{Mode, PathLabel, Polarization, PolarizationState};

pub type State = state::TwoPhotonState<f64>;
pub type Mixture = state::MixedState<f64>;
pub type Element = optics::OpticalElement<f64>;
pub type Circuit = optics::Circuit<f64>;
pub type QdcState = experiment::QdcState<f64>;
pub type Complex64 = num_complex::Complex<f64>;
