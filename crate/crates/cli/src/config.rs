//! The TOML run configuration.

use std::path::{Path, PathBuf};

use akcy_core::scenario::{FTerm, ScenarioKind};
use akcy_core::solver::SolverConfig;
use akcy_core::Grid4;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridSize {
    Cubic(usize),
    Axes([usize; 4]),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n: GridSize,
    #[serde(default = "unit_periods")]
    pub periods: [f64; 4],
}

fn unit_periods() -> [f64; 4] {
    [1.0; 4]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioName {
    Kahler,
    Perturbed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub kind: ScenarioName,
    /// Ignored for `kahler`.
    #[serde(default)]
    pub epsilon: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Outputs {
    pub directory: PathBuf,
    /// Write `omega'` after every accepted step.
    pub dump: bool,
    pub log_level: String,
}

impl Default for Outputs {
    fn default() -> Self {
        Outputs {
            directory: PathBuf::from("akcy-out"),
            dump: false,
            log_level: "info".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridSpec,
    pub scenario: ScenarioSpec,
    #[serde(default)]
    pub forcing: Vec<FTerm>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub outputs: Outputs,
    #[serde(default)]
    pub seed: u64,
    /// Also run the two-seed uniqueness comparison after the path.
    #[serde(default)]
    pub uniqueness: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot parse {path}: {source}")]
    Parse { path: PathBuf, source: toml::de::Error },
    #[error("{0}")]
    Invalid(String),
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let config: RunConfig = toml::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.to_path_buf(),
            source,
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.grid()?;
        if self.scenario.kind == ScenarioName::Perturbed && !(self.scenario.epsilon.is_finite() && self.scenario.epsilon >= 0.0) {
            return Err(ConfigError::Invalid(format!("epsilon {} must be finite and >= 0", self.scenario.epsilon)));
        }
        let n = self.grid()?.n();
        for t in &self.forcing {
            for a in 0..4 {
                if 2 * t.k[a].unsigned_abs() as usize >= n[a] {
                    return Err(ConfigError::Invalid(format!(
                        "forcing mode {:?} is not below the Nyquist mode of a grid with {} points along axis {a}",
                        t.k, n[a]
                    )));
                }
            }
        }
        self.solver.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.outputs.log_level.parse::<log::LevelFilter>().is_err() {
            return Err(ConfigError::Invalid(format!("unknown log level {:?}", self.outputs.log_level)));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid4, ConfigError> {
        let n = match self.grid.n {
            GridSize::Cubic(n) => [n; 4],
            GridSize::Axes(n) => n,
        };
        Grid4::new(n, self.grid.periods).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn scenario_kind(&self) -> ScenarioKind {
        match self.scenario.kind {
            ScenarioName::Kahler => ScenarioKind::Kahler,
            ScenarioName::Perturbed => ScenarioKind::Perturbed {
                epsilon: self.scenario.epsilon,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
seed = 3
[grid]
n = 8
[scenario]
kind = "perturbed"
epsilon = 1e-3
[[forcing]]
k = [1, 1, 0, 0]
amplitude = 0.1
kind = "sin"
[solver]
newton_tol = 1e-10
[solver.time_stepping]
mode = "fixed"
steps = 2
"#;

    #[test]
    fn parses_sample() {
        let c: RunConfig = toml::from_str(SAMPLE).unwrap();
        c.validate().unwrap();
        assert_eq!(c.grid().unwrap().n(), [8; 4]);
        assert_eq!(c.forcing.len(), 1);
        assert_eq!(c.outputs, Outputs::default());
        assert!(matches!(c.scenario_kind(), ScenarioKind::Perturbed { epsilon } if epsilon == 1e-3));
    }

    #[test]
    fn rejects_forcing_at_nyquist() {
        let mut c: RunConfig = toml::from_str(SAMPLE).unwrap();
        c.forcing[0].k = [4, 0, 0, 0];
        assert!(matches!(c.validate(), Err(ConfigError::Invalid(_))));
    }

    #[test]
    fn rejects_unknown_keys() {
        let text = SAMPLE.replace("seed = 3", "seed = 3\nsede = 4");
        assert!(toml::from_str::<RunConfig>(&text).is_err());
    }
}
