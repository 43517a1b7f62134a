//! Batch front end for the almost-Kähler Calabi-Yau solver: configuration,
//! orchestration of the property suites and continuity runs, and reports.

pub mod commands;
pub mod config;
pub mod report;

pub use commands::{check, diagnose, run, sweep, Fault};
pub use config::RunConfig;
pub use report::{Outcome, RunReport};
