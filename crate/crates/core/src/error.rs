use thiserror::Error;

use crate::rcs::RelativePoint;

/// Errors shared by the planning and simulation layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("point {point} lies outside a {lanes}-lane x {slots}-slot grid")]
    OutOfGrid {
        point: RelativePoint,
        lanes: u32,
        slots: u32,
    },
    #[error("invalid input: {0}")]
    Domain(String),
    #[error("size mismatch: expected {expected}, got {actual}")]
    SizeMismatch { expected: usize, actual: usize },
    #[error("no assignment satisfies every vehicle's lane preference")]
    PreferenceInfeasible,
    #[error("no conflict-free path set found: {0}")]
    Unsolvable(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("simulation aborted: {0}")]
    SimulationAborted(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
