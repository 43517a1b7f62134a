//! Spectral tensor calculus on the flat 4-torus, almost-Kähler geometry
//! built on it, and a continuity-method solver for the Calabi-Yau equation
//! `omega'^2 = e^F omega^2` with `omega'` compatible with a fixed `J`.

pub mod algebra;
pub mod dump;
pub mod error;
pub mod field;
pub mod geometry;
pub mod grid;
pub mod krylov;
pub mod scenario;
pub mod solver;
pub mod suites;

pub use error::{Error, Result};
pub use field::{integrate, solve_flat_poisson, OneForm, ScalarField, Slot, TensorField, TwoForm, Metric};
pub use grid::Grid4;
