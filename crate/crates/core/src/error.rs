use thiserror::Error;

use crate::state::{Mode, PathLabel};

#[derive(Debug, Error)]
pub enum Error {
    #[error("state has no entries")]
    EmptyState,
    #[error("all amplitudes are zero; refusing to normalize a degenerate state")]
    DegenerateState,
    #[error("non-finite amplitude encountered")]
    NonFinite,
    #[error("mode {mode} cannot belong to the {side} photon")]
    WrongSide { mode: Mode, side: &'static str },

    #[error("mixture has no components")]
    EmptyMixture,
    #[error("negative mixture weight {0}")]
    NegativeWeight(f64),
    #[error("mixture weights sum to {0}, expected 1")]
    WeightSum(f64),

    #[error("path label {0} repeated in element ports")]
    RepeatedPath(PathLabel),
    #[error("mode {0} listed twice")]
    RepeatedMode(Mode),
    #[error("element `{name}` is not unitary (max deviation {deviation:e})")]
    NotUnitary { name: String, deviation: f64 },
    #[error("element `{element}` does not declare input mode {mode}")]
    UndeclaredMode { element: String, mode: Mode },
    #[error("element `{0}` mixes corroborative and test modes")]
    MixedSides(String),
    #[error("matrix has {got} entries, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("circuit mode mismatch: {0}")]
    ModeMismatch(String),
    #[error("angle {0}° outside the accepted range")]
    AngleOutOfRange(f64),

    #[error("number of shots must be positive")]
    ZeroShots,
    #[error("{name} = {value} is not a probability")]
    InvalidProbability { name: &'static str, value: f64 },
    #[error("no conditioned counts; estimate undefined")]
    NoConditionedCounts,

    #[error("invalid theta scan: {0}")]
    InvalidScan(String),
    #[error("visibility fit is singular (phases do not span a full period)")]
    SingularFit,
    #[error("fitted mean {0} is not positive")]
    NonPositiveMean(f64),
    #[error("visibility {value} exceeds 1 by more than 3σ (σ = {uncertainty})")]
    UnphysicalVisibility { value: f64, uncertainty: f64 },
    #[error("uncertainty must be positive, got {0}")]
    NonPositiveUncertainty(f64),
    #[error("fiber length must be non-negative, got {0}")]
    NegativeLength(f64),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("surface inputs disagree: {0}")]
    SurfaceMismatch(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("thread pool: {0}")]
    ThreadPool(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
