use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::krylov::GmresOptions;

/// Which openness argument the Newton step follows.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formulation {
    /// Unknowns `(b, s_1, s_2)`: the class may move along the harmonic
    /// self-dual forms orthogonal to `omega`.
    Drifting,
    /// Unknown `b` only; the class of `omega'` stays `[omega]`.
    FixedClass,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum TimeStepping {
    /// Halve on failure, double after two clean steps, within `[min_dt, max_dt]`.
    Adaptive { initial_dt: f64, min_dt: f64, max_dt: f64 },
    /// `steps` equal steps; a failed step is still halved, never grown back.
    Fixed { steps: usize },
}

impl Default for TimeStepping {
    fn default() -> Self {
        TimeStepping::Adaptive {
            initial_dt: 0.25,
            min_dt: 1e-4,
            max_dt: 0.25,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Damping {
    pub factor: f64,
    pub max_backtracks: usize,
}

impl Default for Damping {
    fn default() -> Self {
        Damping {
            factor: 0.5,
            max_backtracks: 20,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub formulation: Formulation,
    pub time_stepping: TimeStepping,
    /// Combined residual at which Newton stops.
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub damping: Damping,
    /// Exponent of the claim monitor, `p > 2`.
    pub p: f64,
    pub claim_threshold: f64,
    pub gmres_restart: usize,
    pub gmres_max_iter: usize,
    /// Largest relative tolerance handed to GMRES inside Newton.
    pub forcing: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            formulation: Formulation::Drifting,
            time_stepping: TimeStepping::default(),
            newton_tol: 1e-10,
            newton_max_iter: 30,
            damping: Damping::default(),
            p: 4.0,
            claim_threshold: 1.0,
            gmres_restart: 60,
            gmres_max_iter: 500,
            forcing: 1e-4,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.p > 2.0) {
            return bad(format!("p = {} must exceed 2", self.p));
        }
        if !(self.newton_tol > 0.0) || !(self.forcing > 0.0 && self.forcing < 1.0) {
            return bad("tolerances must be positive (forcing below 1)".into());
        }
        if self.newton_max_iter == 0 || self.gmres_restart == 0 || self.gmres_max_iter == 0 {
            return bad("iteration limits must be positive".into());
        }
        if !(self.damping.factor > 0.0 && self.damping.factor < 1.0) {
            return bad(format!("damping factor {} must lie in (0, 1)", self.damping.factor));
        }
        if !(self.claim_threshold > 0.0) {
            return bad("claim threshold must be positive".into());
        }
        match self.time_stepping {
            TimeStepping::Adaptive {
                initial_dt,
                min_dt,
                max_dt,
            } => {
                if !(min_dt > 0.0 && min_dt <= initial_dt && initial_dt <= max_dt && max_dt <= 1.0) {
                    return bad(format!(
                        "need 0 < min_dt <= initial_dt <= max_dt <= 1, got {min_dt}, {initial_dt}, {max_dt}"
                    ));
                }
            }
            TimeStepping::Fixed { steps } => {
                if steps == 0 {
                    return bad("fixed stepping needs at least one step".into());
                }
            }
        }
        Ok(())
    }

    pub(crate) fn gmres(&self, rel_tol: f64) -> GmresOptions {
        GmresOptions {
            rel_tol,
            abs_tol: 0.0,
            restart: self.gmres_restart,
            max_iter: self.gmres_max_iter,
        }
    }

    pub(crate) fn min_dt(&self) -> f64 {
        match self.time_stepping {
            TimeStepping::Adaptive { min_dt, .. } => min_dt,
            TimeStepping::Fixed { .. } => 1e-4,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid_and_round_trips() {
        let c = SolverConfig::default();
        c.validate().unwrap();
        let s = serde_json::to_string(&c).unwrap();
        let back: SolverConfig = serde_json::from_str(&s).unwrap();
        assert_eq!(c, back);
    }

    #[test]
    fn rejects_small_p() {
        let c = SolverConfig {
            p: 2.0,
            ..Default::default()
        };
        assert!(matches!(c.validate(), Err(Error::InvalidConfig(_))));
    }
}
