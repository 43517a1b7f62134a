use std::path::PathBuf;
use std::process::ExitCode;

use akcy::config::ConfigError;
use akcy::{Fault, Outcome, RunConfig, RunReport};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "akcy", version, about = "Continuity-method Calabi-Yau solver on almost-Kähler 4-tori")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the scenario, march the continuity path and write log, dumps and report.
    Run { config: PathBuf },
    /// Run the property suites at the configured grid and seed.
    Check {
        config: PathBuf,
        /// Inject a fault to confirm that the suites report it.
        #[arg(long, value_enum)]
        inject: Vec<Fault>,
    },
    /// Recompute the diagnostics of a stored omega' field.
    Diagnose {
        dump: PathBuf,
        config: PathBuf,
        /// Continuation parameter the field is a solution at.
        #[arg(long, default_value_t = 1.0)]
        t: f64,
    },
    /// Run the perturbed scenario for every epsilon and tabulate the outcome.
    Sweep {
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        eps: Vec<f64>,
    },
}

fn init(config: &RunConfig) {
    let level = config.outputs.log_level.parse().unwrap_or(log::LevelFilter::Info);
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .format_timestamp(None)
        .try_init();
    if let Some(n) = std::env::var("AKCY_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            log::warn!("AKCY_THREADS ignored: {e}");
        }
    }
}

fn emit(report: &RunReport) -> ExitCode {
    println!("{}", serde_json::to_string_pretty(report).expect("report serialises"));
    if report.outcome != Outcome::Success {
        eprintln!(
            "akcy: {} failed at stage {}: {}",
            report.command,
            report.stage.as_deref().unwrap_or("?"),
            report.error.as_deref().unwrap_or("?")
        );
    }
    ExitCode::from(report.outcome.code())
}

fn config_failure(command: &str, e: ConfigError) -> ExitCode {
    let mut report = RunReport::new(command, None);
    report.fail(Outcome::ConfigError, "config", e);
    emit(&report)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, path) = match &cli.command {
        Command::Run { config } => ("run", config),
        Command::Check { config, .. } => ("check", config),
        Command::Diagnose { config, .. } => ("diagnose", config),
        Command::Sweep { config, .. } => ("sweep", config),
    };
    let config = match RunConfig::load(path) {
        Ok(c) => c,
        Err(e) => return config_failure(name, e),
    };
    init(&config);
    let report = match &cli.command {
        Command::Run { .. } => akcy::run(&config),
        Command::Check { inject, .. } => akcy::check(&config, inject),
        Command::Diagnose { dump, t, .. } => akcy::diagnose(dump, &config, *t),
        Command::Sweep { eps, .. } => akcy::sweep(&config, eps),
    };
    emit(&report)
}
