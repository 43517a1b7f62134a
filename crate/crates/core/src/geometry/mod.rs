//! Almost-Kähler geometry on the flat torus.

pub mod connection;
pub mod forms;
pub mod harmonic;
pub mod laplacian;
pub mod torsion_identities;
pub mod nijenhuis;
pub mod potentials;
pub mod structure;
pub mod system;

pub use structure::{ACStructure, AKTriple, Projectors};
