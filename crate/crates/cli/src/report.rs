//! JSON run reports, the CSV convergence log and exit codes.

use std::collections::BTreeMap;
use std::fs::File;
use std::path::{Path, PathBuf};

use akcy_core::solver::{DiagnosticsRecord, Residuals};
use akcy_core::suites::CheckOutcome;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

/// Process exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Success,
    InvariantFailure,
    SolverFailure,
    ConfigError,
}

impl Outcome {
    pub fn code(self) -> u8 {
        match self {
            Outcome::Success => 0,
            Outcome::InvariantFailure => 2,
            Outcome::SolverFailure => 3,
            Outcome::ConfigError => 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinalState {
    pub t: f64,
    pub s: [f64; 3],
    pub c_hat: f64,
    pub residuals: Residuals,
    pub steps: usize,
    pub rejected_steps: usize,
    pub volume_residual_max: f64,
    pub p_omega_max: f64,
    pub trace_identity_residual: f64,
    pub lower_bound_margin: f64,
    pub max_claim_quantity: f64,
    pub max_modified_claim: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub config: Option<RunConfig>,
    pub outcome: Outcome,
    /// The stage that failed, if any.
    pub stage: Option<String>,
    pub error: Option<String>,
    pub checks: Vec<CheckOutcome>,
    pub final_state: Option<FinalState>,
    pub artifacts: Vec<PathBuf>,
    /// Wall-clock seconds per stage.
    pub timings: BTreeMap<String, f64>,
    /// Command-specific results.
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub data: serde_json::Value,
}

impl RunReport {
    pub fn new(command: &str, config: Option<RunConfig>) -> Self {
        RunReport {
            command: command.into(),
            config,
            outcome: Outcome::Success,
            stage: None,
            error: None,
            checks: Vec::new(),
            final_state: None,
            artifacts: Vec::new(),
            timings: BTreeMap::new(),
            data: serde_json::Value::Null,
        }
    }

    pub fn fail(&mut self, outcome: Outcome, stage: &str, error: impl ToString) {
        self.outcome = outcome;
        self.stage = Some(stage.into());
        self.error = Some(error.to_string());
    }

    /// Marks an invariant failure unless a harder failure is already recorded.
    pub fn settle_checks(&mut self) {
        if self.outcome == Outcome::Success {
            if let Some(bad) = self.checks.iter().find(|c| !c.passed) {
                self.outcome = Outcome::InvariantFailure;
                self.stage = Some("checks".into());
                self.error = Some(format!("check failed: {}", bad.name));
            }
        }
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(std::io::Error::other)?;
        std::fs::write(path, text + "\n")
    }
}

/// One row of the convergence log, with the column names of the file format.
#[derive(Debug, Serialize, Deserialize)]
pub struct LogRow {
    pub t: f64,
    pub newton_iters: usize,
    pub res_volume: f64,
    pub res_selfdual: f64,
    pub res_gauge: f64,
    pub min_eig_gprime: f64,
    pub osc_phi1: f64,
    pub osc_phi_half: f64,
    pub tr_min: f64,
    pub tr_max: f64,
    pub claim_quantity: f64,
    #[serde(rename = "class_term_Lp")]
    pub class_term_lp: f64,
    #[serde(rename = "nij_L1")]
    pub nij_l1: f64,
    #[serde(rename = "nij_Lp")]
    pub nij_lp: f64,
    pub s0: f64,
    pub s1: f64,
    pub s2: f64,
    pub c_hat: f64,
    /// Empty when `osc phi_1` vanishes (exact Kähler case).
    #[serde(rename = "fitted_A")]
    pub fitted_a: Option<f64>,
}

pub const LOG_COLUMNS: [&str; 19] = [
    "t",
    "newton_iters",
    "res_volume",
    "res_selfdual",
    "res_gauge",
    "min_eig_gprime",
    "osc_phi1",
    "osc_phi_half",
    "tr_min",
    "tr_max",
    "claim_quantity",
    "class_term_Lp",
    "nij_L1",
    "nij_Lp",
    "s0",
    "s1",
    "s2",
    "c_hat",
    "fitted_A",
];

impl From<&DiagnosticsRecord> for LogRow {
    fn from(r: &DiagnosticsRecord) -> Self {
        LogRow {
            t: r.t,
            newton_iters: r.newton_iters,
            res_volume: r.res_volume,
            res_selfdual: r.res_selfdual,
            res_gauge: r.res_gauge,
            min_eig_gprime: r.min_eig_gprime,
            osc_phi1: r.osc_phi1,
            osc_phi_half: r.osc_phi_half,
            tr_min: r.tr_min,
            tr_max: r.tr_max,
            claim_quantity: r.claim_quantity,
            class_term_lp: r.class_term_lp,
            nij_l1: r.nij_l1,
            nij_lp: r.nij_lp,
            s0: r.s[0],
            s1: r.s[1],
            s2: r.s[2],
            c_hat: r.c_hat,
            fitted_a: r.fitted_a,
        }
    }
}

/// Streaming writer for the convergence log; the header is written even when no step is accepted.
pub struct ConvergenceLog {
    writer: csv::Writer<File>,
}

impl ConvergenceLog {
    pub fn create(path: &Path) -> csv::Result<Self> {
        let mut writer = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
        writer.write_record(LOG_COLUMNS)?;
        writer.flush()?;
        Ok(ConvergenceLog { writer })
    }

    pub fn push(&mut self, record: &DiagnosticsRecord) -> csv::Result<()> {
        self.writer.serialize(LogRow::from(record))?;
        self.writer.flush()?;
        Ok(())
    }
}
