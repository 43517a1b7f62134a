//! The continuity path `omega'_t^2 = e^(tF + c_t) omega^2`, `t` from 0 to 1.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::field::{integrate_density, OneForm, ScalarField, TwoForm};
use crate::geometry::forms::{d1, square_density};
use crate::geometry::nijenhuis::NijenhuisNorms;
use crate::geometry::structure::AKTriple;

use super::config::{SolverConfig, TimeStepping};
use super::diagnostics::{diagnostics, nijenhuis_summary, DiagnosticsRecord, StepInfo};
use super::newton::{newton_solve, Residuals};
use super::problem::{normalize_f, Anchor, Problem};

/// An accepted point of the path.
#[derive(Clone, Debug)]
pub struct SolverState {
    pub t: f64,
    /// Exact part: `omega' = omega + s_0 omega + s_1 chi_1 + s_2 chi_2 + db`.
    pub b: OneForm,
    pub s: [f64; 3],
    pub omega_prime: TwoForm,
    pub c_hat: f64,
    pub residuals: Residuals,
    pub newton_iters: usize,
}

impl SolverState {
    /// The state at `t = 0`: `omega' = omega`.
    pub fn initial(problem: &Problem) -> Self {
        let grid = problem.triple.grid();
        SolverState {
            t: 0.0,
            b: OneForm::zeros(grid),
            s: [0.0; 3],
            omega_prime: problem.triple.omega.clone(),
            c_hat: 0.0,
            residuals: Residuals::default(),
            newton_iters: 0,
        }
    }
}

/// Knobs of the path that are not part of the solver configuration.
#[derive(Clone, Copy, Debug, Default)]
pub struct PathOptions {
    /// Adds a seeded random exact perturbation of size `guess_amplitude` to
    /// every Newton initial guess. Distinct seeds must reach the same solution.
    pub guess_seed: Option<u64>,
    pub guess_amplitude: f64,
}

impl PathOptions {
    pub fn seeded(seed: u64, amplitude: f64) -> Self {
        PathOptions {
            guess_seed: Some(seed),
            guess_amplitude: amplitude,
        }
    }
}

/// Result of a completed path.
#[derive(Clone, Debug)]
pub struct PathOutcome {
    pub state: SolverState,
    pub records: Vec<DiagnosticsRecord>,
    /// Steps rejected and retried with a smaller `dt`.
    pub rejected_steps: usize,
}

/// Newton initial guess relative to the anchor.
struct Guess {
    b: OneForm,
    y: [f64; 2],
}

fn random_exact_guess(grid: &crate::Grid4, rng: &mut ChaCha8Rng, amplitude: f64) -> OneForm {
    // a few low modes per component; amplitude is the size of db
    let terms: Vec<([f64; 4], f64, f64, usize)> = (0..8)
        .map(|_| {
            let k = [0; 4].map(|_: i32| rng.gen_range(-1..=1) as f64);
            (k, rng.gen_range(-1.0..1.0), rng.gen_range(0.0..TAU), rng.gen_range(0..4))
        })
        .filter(|(k, ..)| k.iter().any(|v| *v != 0.0))
        .collect();
    let comps = std::array::from_fn(|c| {
        ScalarField::from_fn(grid, |x| {
            terms
                .iter()
                .filter(|t| t.3 == c)
                .map(|(k, a, ph, _)| {
                    let arg = TAU * (0..4).map(|i| k[i] * x[i] / grid.periods()[i]).sum::<f64>() + ph;
                    amplitude * a * arg.sin() / TAU
                })
                .sum()
        })
        .into_values()
    });
    OneForm::from_components(grid, comps).expect("one-form shape")
}

/// Solves at `t` around `state` and returns the rescaled, re-anchored state.
pub fn newton_solve_at_t(problem: &Problem, state: &SolverState, t: f64, config: &SolverConfig) -> Result<SolverState> {
    let zero = Guess {
        b: OneForm::zeros(problem.triple.grid()),
        y: [0.0; 2],
    };
    step(problem, state, t, config, &zero).map(|(s, _)| s)
}

fn step(
    problem: &Problem,
    state: &SolverState,
    t: f64,
    config: &SolverConfig,
    guess: &Guess,
) -> Result<(SolverState, Guess)> {
    let anchor = Anchor::new(state.omega_prime.clone(), state.t)?;
    let out = newton_solve(problem, &anchor, t, config, Some((&guess.b, guess.y)))?;
    // Phi does not see the omega-direction of the class; fix it by volume
    let lambda = (problem.volume / integrate_density(&square_density(&out.omega_prime))).sqrt();
    let omega_prime = out.omega_prime.scaled(lambda);
    let b = state.b.tensor().plus(out.b.tensor()).scaled(lambda);
    let s = problem.class_coordinates(&omega_prime);
    if integrate_density(&crate::geometry::forms::wedge(&omega_prime, &problem.triple.omega)) <= 0.0 {
        return Err(Error::LostPositivity { min_ratio: 0.0 });
    }
    let next = SolverState {
        t,
        b: OneForm::new(b)?,
        s,
        omega_prime,
        c_hat: out.c_hat,
        residuals: out.residuals,
        newton_iters: out.iterations,
    };
    Ok((next, Guess { b: out.b, y: out.y }))
}

/// Marches `t` from 0 to 1; `f` is normalised here.
pub fn continuity_path(triple: &AKTriple, f: &ScalarField, config: &SolverConfig) -> Result<(SolverState, Vec<DiagnosticsRecord>)> {
    let problem = Problem::new(triple.clone(), normalize_f(f, &triple.omega)?)?;
    let out = continuity_path_with(&problem, config, PathOptions::default(), |_, _| {})?;
    Ok((out.state, out.records))
}

fn recoverable(e: &Error) -> bool {
    matches!(
        e,
        Error::NewtonDivergence { .. } | Error::LostPositivity { .. } | Error::LinearSolveFailure { .. }
    )
}

/// [`continuity_path`] on a prepared problem; `observer` sees every accepted step.
pub fn continuity_path_with(
    problem: &Problem,
    config: &SolverConfig,
    opts: PathOptions,
    mut observer: impl FnMut(&SolverState, &DiagnosticsRecord),
) -> Result<PathOutcome> {
    config.validate()?;
    let grid = problem.triple.grid();
    let nij = nijenhuis_summary(problem, config.p);
    let record = |state: &SolverState, nij: &NijenhuisNorms| {
        diagnostics(
            problem,
            &state.omega_prime,
            state.t,
            config.p,
            config.claim_threshold,
            nij,
            StepInfo {
                newton_iters: state.newton_iters,
                res_gauge: state.residuals.gauge,
                c_hat: state.c_hat,
            },
        )
    };
    let mut state = SolverState::initial(problem);
    let mut records = Vec::new();
    if problem.f.max_abs() == 0.0 {
        state.t = 1.0;
        let r = record(&state, &nij)?;
        observer(&state, &r);
        records.push(r);
        return Ok(PathOutcome {
            state,
            records,
            rejected_steps: 0,
        });
    }
    let (mut dt, min_dt, max_dt, grows) = match config.time_stepping {
        TimeStepping::Adaptive {
            initial_dt,
            min_dt,
            max_dt,
        } => (initial_dt, min_dt, max_dt, true),
        TimeStepping::Fixed { steps } => {
            let dt = 1.0 / steps as f64;
            (dt, config.min_dt().min(dt), dt, false)
        }
    };
    let mut rng = opts.guess_seed.map(ChaCha8Rng::seed_from_u64);
    let mut previous: Option<(Guess, f64)> = None;
    let mut clean = 0;
    let mut rejected = 0;
    while state.t < 1.0 {
        let t = if 1.0 - state.t <= dt * (1.0 + 1e-12) { 1.0 } else { state.t + dt };
        let h = t - state.t;
        // secant predictor from the previous increment
        let mut guess = match &previous {
            Some((g, h_prev)) => Guess {
                b: OneForm::new(g.b.tensor().scaled(h / h_prev))?,
                y: g.y.map(|v| v * h / h_prev),
            },
            None => Guess {
                b: OneForm::zeros(grid),
                y: [0.0; 2],
            },
        };
        if let Some(rng) = rng.as_mut() {
            let noise = random_exact_guess(grid, rng, opts.guess_amplitude);
            guess.b = OneForm::new(guess.b.tensor().plus(noise.tensor()))?;
        }
        match step(problem, &state, t, config, &guess) {
            Ok((next, increment)) => {
                log::debug!("accepted t = {t:.6} after {} Newton iterations", next.newton_iters);
                state = next;
                previous = Some((increment, h));
                let r = record(&state, &nij)?;
                if r.claim_exceeded {
                    log::warn!("claim quantity {:.3e} reached the threshold at t = {t}", r.modified_claim);
                }
                observer(&state, &r);
                records.push(r);
                clean += 1;
                if grows && clean >= 2 {
                    dt = (2.0 * dt).min(max_dt);
                    clean = 0;
                }
            }
            Err(e) if recoverable(&e) => {
                log::debug!("rejected t = {t:.6} with dt = {dt:e}: {e}");
                rejected += 1;
                clean = 0;
                dt /= 2.0;
                if dt < min_dt {
                    return Err(Error::PathStalled { t: state.t, dt });
                }
            }
            Err(e) => return Err(e),
        }
    }
    Ok(PathOutcome {
        state,
        records,
        rejected_steps: rejected,
    })
}

/// The exact part `d b` of a state, for callers that want to inspect the reconstruction.
pub fn exact_part(state: &SolverState) -> TwoForm {
    d1(&state.b)
}
