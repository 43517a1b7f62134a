//! Continuity-method solver for `omega'^2 = e^F omega^2` with `omega'`
//! compatible with a fixed almost-complex structure.

pub mod config;
pub mod diagnostics;
pub mod newton;
pub mod path;
pub mod problem;
pub mod uniqueness;

pub use config::{Damping, Formulation, SolverConfig, TimeStepping};
pub use diagnostics::{diagnostics, DiagnosticsRecord, StepInfo};
pub use newton::{newton_solve, NewtonOutcome, Residuals};
pub use path::{continuity_path, continuity_path_with, newton_solve_at_t, PathOptions, PathOutcome, SolverState};
pub use problem::{normalize_f, phi_map, Anchor, PhiValue, Problem};
pub use uniqueness::{uniqueness_test, UniquenessReport};
