//! Rate-independent shrinking evolution of planar sets.
//!
//! A set `Z(t)` loses volume at cost `a` per unit area and otherwise minimizes
//! its relative perimeter, while a growing forcing set `F(t)` either
//! penalizes overlap (adhesive mode, parameter `k`) or forbids it (brittle
//! mode). The crate provides the grid discretization, a primal-dual step
//! solver with an exhaustive oracle, the one-dimensional profile reduction,
//! closed-form reference constructions, the evolution driver, auditors for
//! the qualitative estimates, and scenario I/O.

pub mod energy;
pub mod error;
pub mod evolution;
pub mod geometry;
pub mod grid_solver;
pub mod oracle;
pub mod profile;
pub mod scenario_io;
pub mod verify;

pub use energy::{DensityMode, EnergyBreakdown, Forcing, ForcingKind, Mode};
pub use error::{Error, Result};
pub use evolution::{Scenario, Trajectory};
pub use grid_solver::{SolveParams, StepProblem};
pub use geometry::{BinaryField, GridSpec, PerimeterScheme, Point, RelaxedField, Shape};

pub use profile::{ArcParams, Obstacle, Profile};
pub use verify::{AuditOptions, AuditReport, AuditStatus, DensityParams};

