//! Two-run uniqueness check: the same problem solved from differently
//! perturbed Newton guesses must land on the same `omega'`.

use serde::Serialize;

use crate::error::Result;
use crate::geometry::forms::wedge;
use crate::geometry::structure::Projectors;

use super::config::SolverConfig;
use super::path::{continuity_path_with, PathOptions};
use super::problem::Problem;

#[derive(Clone, Copy, Debug, Serialize)]
pub struct UniquenessReport {
    /// `|| omega'_1 - omega'_2 ||_L2`.
    pub difference_l2: f64,
    /// `|| (omega'_1 + omega'_2) ^ delta ||_L2`, which vanishes when both volumes agree.
    pub wedge_sum_l2: f64,
    /// `|| P delta ||_L2`.
    pub p_delta_l2: f64,
    /// Largest difference of the class coordinates.
    pub class_difference: f64,
}

/// Default size of the random exact perturbation of each Newton guess.
pub const GUESS_AMPLITUDE: f64 = 1e-2;

pub fn uniqueness_test(problem: &Problem, config: &SolverConfig, seeds: [u64; 2]) -> Result<UniquenessReport> {
    let [a, b] = seeds.map(|seed| continuity_path_with(problem, config, PathOptions::seeded(seed, GUESS_AMPLITUDE), |_, _| {}));
    let (a, b) = (a?.state, b?.state);
    let delta = a.omega_prime.minus(&b.omega_prime);
    let sum = a.omega_prime.plus(&b.omega_prime);
    Ok(UniquenessReport {
        difference_l2: delta.flat_l2_norm(),
        wedge_sum_l2: wedge(&sum, &delta).l2_norm(),
        p_delta_l2: Projectors::new(&problem.triple.j).p_form(&delta).flat_l2_norm(),
        class_difference: (0..3).map(|i| (a.s[i] - b.s[i]).abs()).fold(0.0, f64::max),
    })
}
