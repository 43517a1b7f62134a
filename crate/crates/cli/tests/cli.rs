use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use akcy::report::LOG_COLUMNS;
use akcy::{Outcome, RunReport};
use tempfile::TempDir;

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let out = dir.join(format!("{name}-out"));
    let text = format!("{body}\n[outputs]\ndirectory = {:?}\nlog_level = \"warn\"\n", out.to_str().unwrap());
    let path = dir.join(format!("{name}.toml"));
    std::fs::write(&path, text).unwrap();
    path
}

fn akcy(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_akcy")).args(args).output().unwrap()
}

fn report_of(out: &Output) -> RunReport {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not a report ({e}):\n{}\n{}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

const PERTURBED_12: &str = r#"
seed = 3
[grid]
n = 12
[scenario]
kind = "perturbed"
epsilon = 1e-3
[[forcing]]
k = [1, 1, 0, 0]
amplitude = 0.1
kind = "sin"
[solver.time_stepping]
mode = "fixed"
steps = 2
"#;

#[test]
fn kahler_without_forcing_succeeds_immediately() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "flat", "[grid]\nn = 8\n[scenario]\nkind = \"kahler\"\n");
    let out = akcy(&["run", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let r = report_of(&out);
    assert_eq!(r.outcome, Outcome::Success);
    let fs = r.final_state.unwrap();
    assert_eq!(fs.t, 1.0);
    assert_eq!(fs.steps, 1);
    assert_eq!(fs.volume_residual_max, 0.0);
    assert_eq!(fs.s, [0.0; 3]);
}

#[test]
fn perturbed_run_writes_log_dumps_and_report() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "pert", &format!("{PERTURBED_12}\n"));
    let out = akcy(&["run", cfg.to_str().unwrap()]);
    let r = report_of(&out);
    assert_eq!(out.status.code(), Some(0), "{:?}", r.error);
    assert!(r.checks.iter().all(|c| c.passed));
    let fs = r.final_state.as_ref().unwrap();
    assert!(fs.volume_residual_max < 1e-8 && fs.trace_identity_residual < 1e-7);
    let base = dir.path().join("pert-out");
    let mut log = csv::Reader::from_path(base.join("log.csv")).unwrap();
    let header: Vec<String> = log.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, LOG_COLUMNS);
    let rows: Vec<csv::StringRecord> = log.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(&rows[1][0], "1.0");
    // the report on disk is the one printed
    let on_disk: RunReport = serde_json::from_str(&std::fs::read_to_string(base.join("report.json")).unwrap()).unwrap();
    assert_eq!(on_disk.final_state, r.final_state);

    // the stored solution diagnoses to the same state
    let dump = base.join("omega_prime_final.dump");
    let out = akcy(&["diagnose", dump.to_str().unwrap(), cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let d = report_of(&out);
    assert!(d.data["trace_identity_residual"].as_f64().unwrap() < 1e-7);
    assert!((d.data["s"][1].as_f64().unwrap() - fs.s[1]).abs() < 1e-14);
}

#[test]
fn identical_configs_give_identical_artifacts() {
    let dir = TempDir::new().unwrap();
    let body = format!("{PERTURBED_12}").replace("steps = 2", "steps = 1");
    let run = |name: &str| {
        let cfg = write_config(dir.path(), name, &body);
        let text = std::fs::read_to_string(&cfg).unwrap().replace("log_level", "dump = true\nlog_level");
        std::fs::write(&cfg, text).unwrap();
        assert_eq!(akcy(&["run", cfg.to_str().unwrap()]).status.code(), Some(0));
        dir.path().join(format!("{name}-out"))
    };
    let (a, b) = (run("a"), run("b"));
    for file in ["log.csv", "omega_prime_0000.dump", "omega_prime_final.dump"] {
        let x = std::fs::read(a.join(file)).unwrap();
        let y = std::fs::read(b.join(file)).unwrap();
        assert!(x == y, "{file} differs");
    }
}

#[test]
fn config_errors_exit_with_4_and_still_report() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "bad", "[grid]\nn = 7\n[scenario]\nkind = \"kahler\"\n");
    let out = akcy(&["run", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
    let r = report_of(&out);
    assert_eq!((r.outcome, r.stage.as_deref()), (Outcome::ConfigError, Some("config")));

    let missing = dir.path().join("nope.toml");
    assert_eq!(akcy(&["check", missing.to_str().unwrap()]).status.code(), Some(4));

    let nyquist = write_config(
        dir.path(),
        "nyq",
        "[grid]\nn = 8\n[scenario]\nkind = \"kahler\"\n[[forcing]]\nk = [4, 0, 0, 0]\namplitude = 0.1\nkind = \"cos\"\n",
    );
    assert_eq!(akcy(&["run", nyquist.to_str().unwrap()]).status.code(), Some(4));
}

#[test]
fn solver_failure_exits_with_3_and_names_the_stage() {
    let dir = TempDir::new().unwrap();
    let body = "[grid]\nn = 8\n[scenario]\nkind = \"kahler\"\n[[forcing]]\nk = [1, 0, 0, 0]\namplitude = 0.1\nkind = \"sin\"\n\
                [solver]\nnewton_tol = 1e-30\nnewton_max_iter = 1\n[solver.time_stepping]\nmode = \"adaptive\"\ninitial_dt = 0.01\nmin_dt = 0.004\nmax_dt = 0.01\n";
    let cfg = write_config(dir.path(), "stall", body);
    let out = akcy(&["run", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    let r = report_of(&out);
    assert_eq!(r.stage.as_deref(), Some("continuity_path"));
    assert!(r.error.unwrap().contains("stalled"));
    // the log exists even though no step was accepted
    assert!(dir.path().join("stall-out/log.csv").exists());
}

#[test]
fn check_passes_and_reports_injected_faults() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "chk", "seed = 5\n[grid]\nn = 8\n[scenario]\nkind = \"perturbed\"\nepsilon = 1e-2\n");
    let out = akcy(&["check", cfg.to_str().unwrap()]);
    let r = report_of(&out);
    assert_eq!(out.status.code(), Some(0), "{:?}", r.checks.iter().filter(|c| !c.passed).collect::<Vec<_>>());
    assert!(r.checks.len() > 20);

    let out = akcy(&["check", cfg.to_str().unwrap(), "--inject", "corrupt-j"]);
    assert_eq!(out.status.code(), Some(2));
    let r = report_of(&out);
    let failed: Vec<&str> = r.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    assert!(failed.contains(&"injected corrupt J: J^2 = -Id"), "{failed:?}");
}

#[test]
fn sweep_tabulates_every_epsilon() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "sw", "[grid]\nn = 8\n[scenario]\nkind = \"perturbed\"\nepsilon = 1e-3\n");
    let out = akcy(&["sweep", cfg.to_str().unwrap(), "--eps", "1e-4,1e-3,1e-2"]);
    let r = report_of(&out);
    assert_eq!(out.status.code(), Some(0), "{:?}", r.error);
    assert!((r.data["slope"].as_f64().unwrap() - 1.0).abs() < 0.1);
    let mut table = csv::Reader::from_path(dir.path().join("sw-out/sweep.csv")).unwrap();
    let rows: Vec<akcy::commands::SweepRow> = table.deserialize().map(|r| r.unwrap()).collect();
    assert_eq!(rows.iter().map(|r| r.epsilon).collect::<Vec<_>>(), [1e-4, 1e-3, 1e-2]);
    assert!(rows.iter().all(|r| r.success));
}
