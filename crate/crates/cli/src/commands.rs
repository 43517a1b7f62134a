//! The four subcommands. Each returns a report; none of them panics on
//! solver or I/O failure.

use std::cell::RefCell;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use akcy_core::dump;
use akcy_core::geometry::nijenhuis::{nijenhuis, nijenhuis_norms};
use akcy_core::scenario::{build_scenario, perturbed_triple, Scenario, ScenarioKind};
use akcy_core::solver::{
    continuity_path_with, diagnostics, normalize_f, uniqueness_test, DiagnosticsRecord, PathOptions, PathOutcome,
    Problem, SolverConfig, StepInfo,
};
use akcy_core::suites::{self, log_log_slope, CheckOutcome};
use akcy_core::TwoForm;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::report::{ConvergenceLog, FinalState, Outcome, RunReport};

/// Faults that `check` can inject to show that the suites catch them.
#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fault {
    /// Scales `J` at one grid point so that `J^2 != -Id`.
    CorruptJ,
}

fn timed<T>(report: &mut RunReport, stage: &str, f: impl FnOnce(&mut RunReport) -> T) -> T {
    let start = Instant::now();
    let out = f(report);
    *report.timings.entry(stage.into()).or_default() += start.elapsed().as_secs_f64();
    out
}

fn prepare_dir(report: &mut RunReport, dir: &Path) -> bool {
    match fs::create_dir_all(dir) {
        Ok(()) => true,
        Err(e) => {
            report.fail(Outcome::ConfigError, "output", format!("cannot create {}: {e}", dir.display()));
            false
        }
    }
}

fn scenario_of(report: &mut RunReport, config: &RunConfig) -> Option<Scenario> {
    let built = config
        .grid()
        .map_err(|e| e.to_string())
        .and_then(|g| build_scenario(&g, config.scenario_kind(), config.seed, &config.forcing).map_err(|e| e.to_string()));
    match built {
        Ok(s) => Some(s),
        Err(e) => {
            report.fail(Outcome::ConfigError, "scenario", e);
            None
        }
    }
}

fn problem_of(report: &mut RunReport, scenario: &Scenario) -> Option<Problem> {
    let built = normalize_f(&scenario.f_raw, &scenario.triple.omega).and_then(|f| Problem::new(scenario.triple.clone(), f));
    match built {
        Ok(p) => Some(p),
        Err(e) => {
            report.fail(Outcome::SolverFailure, "setup", e);
            None
        }
    }
}

/// Runs the path, streaming the log and optional per-step dumps into `dir`.
fn solve(
    problem: &Problem,
    solver: &SolverConfig,
    dir: &Path,
    dump_steps: bool,
    artifacts: &mut Vec<PathBuf>,
) -> Result<PathOutcome, (Outcome, &'static str, String)> {
    let log_path = dir.join("log.csv");
    let log = ConvergenceLog::create(&log_path).map_err(|e| (Outcome::ConfigError, "output", e.to_string()))?;
    artifacts.push(log_path);
    let log = RefCell::new(log);
    let io_error: RefCell<Option<String>> = RefCell::new(None);
    let dumps = RefCell::new(Vec::new());
    let mut step = 0usize;
    let result = continuity_path_with(problem, solver, PathOptions::default(), |state, record| {
        if let Err(e) = log.borrow_mut().push(record) {
            io_error.borrow_mut().get_or_insert(e.to_string());
        }
        if dump_steps {
            let path = dir.join(format!("omega_prime_{step:04}.dump"));
            match dump::save(&path, state.omega_prime.tensor()) {
                Ok(()) => dumps.borrow_mut().push(path),
                Err(e) => {
                    io_error.borrow_mut().get_or_insert(e.to_string());
                }
            }
        }
        step += 1;
    });
    artifacts.extend(dumps.into_inner());
    if let Some(e) = io_error.into_inner() {
        return Err((Outcome::ConfigError, "output", e));
    }
    let out = result.map_err(|e| (Outcome::SolverFailure, "continuity_path", e.to_string()))?;
    let final_path = dir.join("omega_prime_final.dump");
    dump::save(&final_path, out.state.omega_prime.tensor()).map_err(|e| (Outcome::ConfigError, "output", e.to_string()))?;
    artifacts.push(final_path);
    Ok(out)
}

fn final_state(out: &PathOutcome) -> FinalState {
    let last = out.records.last().expect("a completed path has at least one record");
    let max = |f: fn(&DiagnosticsRecord) -> f64| out.records.iter().map(f).fold(0.0, f64::max);
    FinalState {
        t: out.state.t,
        s: out.state.s,
        c_hat: out.state.c_hat,
        residuals: out.state.residuals,
        steps: out.records.len(),
        rejected_steps: out.rejected_steps,
        volume_residual_max: last.volume_residual_max,
        p_omega_max: last.p_omega_max,
        trace_identity_residual: last.trace_identity_residual,
        lower_bound_margin: last.lower_bound_margin,
        max_claim_quantity: max(|r| r.claim_quantity),
        max_modified_claim: max(|r| r.modified_claim),
    }
}

/// Invariants every accepted step must satisfy.
pub fn step_checks(records: &[DiagnosticsRecord], newton_tol: f64) -> Vec<CheckOutcome> {
    let worst = |f: &dyn Fn(&DiagnosticsRecord) -> f64| records.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
    let least = |f: &dyn Fn(&DiagnosticsRecord) -> f64| records.iter().map(f).fold(f64::INFINITY, f64::min);
    vec![
        CheckOutcome::below("every step: max |omega'^2 - e^(tF+c_t) omega^2| / omega^2", worst(&|r| r.volume_residual_max), 10.0 * newton_tol),
        CheckOutcome::below("every step: sup |P omega'|", worst(&|r| r.p_omega_max), 1e-8),
        CheckOutcome::at_least("every step: min eigenvalue of g'", least(&|r| r.min_eig_gprime), f64::MIN_POSITIVE),
        // int omega' ^ omega = (1 + s_0) int omega^2
        CheckOutcome::at_least("every step: int omega' ^ omega > 0", least(&|r| 1.0 + r.s[0]), f64::MIN_POSITIVE),
        CheckOutcome::below("every step: trace identity residual", worst(&|r| r.trace_identity_residual), 1e-7),
        CheckOutcome::at_least("every step: min tr_g g' - 4 exp(inf(tF + c_t) / 2)", least(&|r| r.lower_bound_margin), -1e-7),
    ]
}

pub fn run(config: &RunConfig) -> RunReport {
    let mut report = RunReport::new("run", Some(config.clone()));
    let dir = config.outputs.directory.clone();
    if prepare_dir(&mut report, &dir) {
        run_stages(config, &dir, &mut report);
    }
    report.settle_checks();
    finish(report, &dir.join("report.json"))
}

fn run_stages(config: &RunConfig, dir: &Path, report: &mut RunReport) {
    let Some(scenario) = timed(report, "scenario", |r| scenario_of(r, config)) else {
        return;
    };
    let Some(problem) = timed(report, "setup", |r| problem_of(r, &scenario)) else {
        return;
    };
    let mut artifacts = Vec::new();
    let solved = timed(report, "continuity_path", |_| {
        solve(&problem, &config.solver, dir, config.outputs.dump, &mut artifacts)
    });
    report.artifacts.extend(artifacts);
    let out = match solved {
        Ok(out) => out,
        Err((outcome, stage, e)) => {
            report.fail(outcome, stage, e);
            return;
        }
    };
    report.checks.extend(step_checks(&out.records, config.solver.newton_tol));
    let fs = final_state(&out);
    if fs.max_claim_quantity >= config.solver.claim_threshold {
        log::warn!("claim quantity reached {:.3e} along the path", fs.max_claim_quantity);
    }
    report.final_state = Some(fs);
    if config.uniqueness {
        let seeds = [config.seed.wrapping_add(1), config.seed.wrapping_add(2)];
        match timed(report, "uniqueness", |_| uniqueness_test(&problem, &config.solver, seeds)) {
            Ok(u) => {
                report.checks.push(
                    CheckOutcome::below("uniqueness: || omega'(1) - omega'(2) ||_L2", u.difference_l2, 1e-6)
                        .with_detail(format!("P delta {:.2e}, wedge {:.2e}", u.p_delta_l2, u.wedge_sum_l2)),
                );
                report.data = serde_json::json!({ "uniqueness": u });
            }
            Err(e) => report.fail(Outcome::SolverFailure, "uniqueness", e),
        }
    }
}

fn finish(mut report: RunReport, path: &Path) -> RunReport {
    match report.write(path) {
        Ok(()) => report.artifacts.push(path.to_path_buf()),
        Err(e) => log::error!("cannot write {}: {e}", path.display()),
    }
    report
}

pub fn check(config: &RunConfig, faults: &[Fault]) -> RunReport {
    let mut report = RunReport::new("check", Some(config.clone()));
    let dir = config.outputs.directory.clone();
    if prepare_dir(&mut report, &dir) {
        check_stages(config, faults, &mut report);
    }
    report.settle_checks();
    finish(report, &dir.join("check_report.json"))
}

fn check_stages(config: &RunConfig, faults: &[Fault], report: &mut RunReport) {
    let Some(scenario) = timed(report, "scenario", |r| scenario_of(r, config)) else {
        return;
    };
    let grid = scenario.triple.grid().clone();
    let seed = config.seed;
    let field = timed(report, "field", |_| suites::field_suites(&grid, seed));
    report.checks.extend(field);
    let epsilon = match scenario.kind {
        ScenarioKind::Perturbed { epsilon } if epsilon > 0.0 => epsilon,
        _ => 1e-2,
    };
    match timed(report, "geometry", |_| suites::geometry_suites(&grid, epsilon, seed)) {
        Ok(c) => report.checks.extend(c),
        Err(e) => report.checks.push(CheckOutcome::failed("geometry suites", e.to_string())),
    }
    for fault in faults {
        match fault {
            Fault::CorruptJ => {
                let t = &scenario.triple;
                let bad = suites::corrupt_j(&t.j, 1.01);
                report.checks.extend(suites::structure_suite("injected corrupt J", &t.omega, &bad, seed));
            }
        }
    }
    if let Some(problem) = timed(report, "setup", |r| problem_of(r, &scenario)) {
        let solver = timed(report, "solver", |_| suites::solver_suites(&problem, seed));
        report.checks.extend(solver);
    }
}

pub fn diagnose(dump_path: &Path, config: &RunConfig, t: f64) -> RunReport {
    let mut report = RunReport::new("diagnose", Some(config.clone()));
    let dir = config.outputs.directory.clone();
    if prepare_dir(&mut report, &dir) {
        diagnose_stages(dump_path, config, t, &mut report);
    }
    finish(report, &dir.join("diagnose_report.json"))
}

fn diagnose_stages(dump_path: &Path, config: &RunConfig, t: f64, report: &mut RunReport) {
    let omega_prime = match dump::load(dump_path).and_then(TwoForm::new) {
        Ok(w) => w,
        Err(e) => return report.fail(Outcome::ConfigError, "load", format!("{}: {e}", dump_path.display())),
    };
    let Some(scenario) = scenario_of(report, config) else {
        return;
    };
    if omega_prime.grid() != scenario.triple.grid() {
        return report.fail(
            Outcome::ConfigError,
            "load",
            format!("dump grid {:?} differs from configured grid {:?}", omega_prime.grid().n(), scenario.triple.grid().n()),
        );
    }
    let Some(problem) = problem_of(report, &scenario) else {
        return;
    };
    let nij = nijenhuis_norms(&nijenhuis(&problem.triple.j), &problem.triple.g, config.solver.p);
    let record = timed(report, "diagnostics", |_| {
        diagnostics(
            &problem,
            &omega_prime,
            t,
            config.solver.p,
            config.solver.claim_threshold,
            &nij,
            StepInfo::default(),
        )
    });
    match record {
        Ok(r) => report.data = serde_json::to_value(r).expect("record serialises"),
        Err(e) => report.fail(Outcome::SolverFailure, "diagnostics", e),
    }
}

/// One row of the sweep table.
#[derive(Clone, Debug, Serialize, serde::Deserialize)]
pub struct SweepRow {
    pub epsilon: f64,
    #[serde(rename = "nij_C0")]
    pub nij_c0: f64,
    #[serde(rename = "nij_L1")]
    pub nij_l1: f64,
    #[serde(rename = "nij_Lp")]
    pub nij_lp: f64,
    pub success: bool,
    pub steps: usize,
    pub volume_residual_max: Option<f64>,
    pub max_claim_quantity: Option<f64>,
    pub error: String,
}

pub fn sweep(config: &RunConfig, epsilons: &[f64]) -> RunReport {
    let mut report = RunReport::new("sweep", Some(config.clone()));
    let dir = config.outputs.directory.clone();
    if prepare_dir(&mut report, &dir) {
        sweep_stages(config, epsilons, &dir, &mut report);
    }
    report.settle_checks();
    finish(report, &dir.join("sweep_report.json"))
}

fn sweep_point(config: &RunConfig, index: usize, epsilon: f64, dir: &Path) -> (SweepRow, Vec<PathBuf>) {
    let mut row = SweepRow {
        epsilon,
        nij_c0: f64::NAN,
        nij_l1: f64::NAN,
        nij_lp: f64::NAN,
        success: false,
        steps: 0,
        volume_residual_max: None,
        max_claim_quantity: None,
        error: String::new(),
    };
    let mut artifacts = Vec::new();
    let grid = config.grid().expect("validated config");
    let triple = match perturbed_triple(&grid, epsilon, config.seed) {
        Ok(t) => t,
        Err(e) => {
            row.error = format!("scenario: {e}");
            return (row, artifacts);
        }
    };
    let nn = nijenhuis_norms(&nijenhuis(&triple.j), &triple.g, config.solver.p);
    (row.nij_c0, row.nij_l1, row.nij_lp) = (nn.c0, nn.l1, nn.lp);
    let scenario = Scenario {
        kind: ScenarioKind::Perturbed { epsilon },
        triple,
        f_raw: akcy_core::scenario::forcing(&grid, &config.forcing).expect("validated forcing"),
    };
    let mut scratch = RunReport::new("sweep", None);
    let Some(problem) = problem_of(&mut scratch, &scenario) else {
        row.error = format!("setup: {}", scratch.error.unwrap_or_default());
        return (row, artifacts);
    };
    let point_dir = dir.join(format!("eps_{index:02}"));
    if let Err(e) = fs::create_dir_all(&point_dir) {
        row.error = format!("output: {e}");
        return (row, artifacts);
    }
    match solve(&problem, &config.solver, &point_dir, config.outputs.dump, &mut artifacts) {
        Ok(out) => {
            let fs = final_state(&out);
            row.success = true;
            row.steps = fs.steps;
            row.volume_residual_max = Some(fs.volume_residual_max);
            row.max_claim_quantity = Some(fs.max_claim_quantity);
        }
        Err((_, stage, e)) => row.error = format!("{stage}: {e}"),
    }
    (row, artifacts)
}

fn sweep_stages(config: &RunConfig, epsilons: &[f64], dir: &Path, report: &mut RunReport) {
    if let Some(bad) = epsilons.iter().find(|e| !(e.is_finite() && **e > 0.0)) {
        return report.fail(Outcome::ConfigError, "sweep", format!("epsilon {bad} must be positive"));
    }
    let points: Vec<(SweepRow, Vec<PathBuf>)> = timed(report, "sweep", |_| {
        epsilons
            .par_iter()
            .enumerate()
            .map(|(i, &e)| sweep_point(config, i, e, dir))
            .collect()
    });
    let rows: Vec<SweepRow> = points.iter().map(|p| p.0.clone()).collect();
    report.artifacts.extend(points.into_iter().flat_map(|p| p.1));
    let path = dir.join("sweep.csv");
    let written = (|| -> csv::Result<()> {
        let mut w = csv::Writer::from_path(&path)?;
        for r in &rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    })();
    match written {
        Ok(()) => report.artifacts.push(path),
        Err(e) => return report.fail(Outcome::ConfigError, "output", e),
    }
    let usable: Vec<&SweepRow> = rows.iter().filter(|r| r.nij_c0 > 0.0).collect();
    if usable.len() >= 2 {
        let x: Vec<f64> = usable.iter().map(|r| r.epsilon).collect();
        let y: Vec<f64> = usable.iter().map(|r| r.nij_c0).collect();
        let slope = log_log_slope(&x, &y);
        report
            .checks
            .push(CheckOutcome::below("|log-log slope of sup |N| against epsilon - 1|", (slope - 1.0).abs(), 0.1));
        report.data = serde_json::json!({ "slope": slope, "points": rows });
    } else {
        report.data = serde_json::json!({ "points": rows });
    }
}
