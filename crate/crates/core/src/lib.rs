//! Formation control with lane preference for automated vehicles.
//!
//! Vehicles of a formation live on a relative grid that moves with the
//! formation. Lane sorting is planned there as coupled target assignment
//! ([`assignment`]) and conflict-based multi-vehicle path search ([`cbs`],
//! [`tappa`]) over the conflict taxonomy in [`conflict`]. The [`sim`] module
//! runs a three-segment lane-sorting road with the planner and with a
//! rule-based baseline.

pub mod assignment;
pub mod cbs;
pub mod conflict;
pub mod error;
pub mod instance;
pub mod rcs;
pub mod sim;
pub mod tappa;

pub use assignment::{Assignment, AssignmentProblem, AssignmentStream, CostMatrix, EdgeWeights};
pub use cbs::{cbs_solve, low_level_search, Branching, CbsSolution, PlannerConfig};
pub use conflict::{detect_conflicts, Conflict, ConflictConfig, ConflictKind, Constraint};
pub use error::{Error, Result};
pub use rcs::{
    FormationStructure, GridSpec, MotionMode, Path, PathSet, RelativePathMap, RelativePoint,
};
pub use tappa::{tappa_solve, Instance, TappaResult};
