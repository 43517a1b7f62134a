use akcy_core::geometry::forms::d1;
use akcy_core::scenario::{forcing, perturbed_triple, FTerm, TrigKind};
use akcy_core::solver::{
    continuity_path, newton_solve_at_t, normalize_f, Problem, SolverConfig, SolverState, TimeStepping,
};
use akcy_core::suites::random_one_form;
use akcy_core::{Grid4, ScalarField};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn problem(n: usize, eps: f64, amp: f64) -> Problem {
    let grid = Grid4::cubic(n).unwrap();
    let triple = perturbed_triple(&grid, eps, 11).unwrap();
    let raw = forcing(&grid, &[FTerm { k: [1, 0, 1, 0], amplitude: amp, kind: TrigKind::Cos }]).unwrap();
    let f = normalize_f(&raw, &triple.omega).unwrap();
    Problem::new(triple, f).unwrap()
}

#[test]
fn class_coordinates_ignore_exact_forms() {
    let pr = problem(8, 1e-2, 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let exact = d1(&random_one_form(pr.triple.grid(), &mut rng, 0.3));
    let s = [0.25, -0.1, 0.05];
    let omega_prime = pr.triple.omega.plus(&pr.class_term(&s)).plus(&exact);
    let got = pr.class_coordinates(&omega_prime);
    for k in 0..3 {
        assert!((got[k] - s[k]).abs() < 1e-10, "{got:?}");
    }
}

#[test]
fn zero_forcing_returns_the_initial_form() {
    let grid = Grid4::cubic(8).unwrap();
    let triple = perturbed_triple(&grid, 1e-2, 2).unwrap();
    let (state, records) = continuity_path(&triple, &ScalarField::zeros(&grid), &SolverConfig::default()).unwrap();
    assert_eq!(records.len(), 1);
    assert_eq!(state.t, 1.0);
    assert_eq!(state.omega_prime.tensor().max_abs_diff(triple.omega.tensor()), 0.0);
}

#[test]
fn solving_at_the_anchor_needs_no_iterations() {
    let pr = problem(8, 1e-2, 0.1);
    let s0 = SolverState::initial(&pr);
    let next = newton_solve_at_t(&pr, &s0, 0.0, &SolverConfig::default()).unwrap();
    assert_eq!(next.newton_iters, 0);
    assert!(next.omega_prime.tensor().max_abs_diff(pr.triple.omega.tensor()) < 1e-14);
}

#[test]
fn fixed_steps_reach_t_one_with_consistent_records() {
    let pr = problem(12, 1e-2, 0.1);
    let config = SolverConfig {
        time_stepping: TimeStepping::Fixed { steps: 2 },
        ..SolverConfig::default()
    };
    let (state, records) = continuity_path(&pr.triple, &pr.f, &config).unwrap();
    assert_eq!(state.t, 1.0);
    let ts: Vec<f64> = records.iter().map(|r| r.t).collect();
    assert_eq!(ts, [0.5, 1.0]);
    let last = records.last().unwrap();
    assert!(last.volume_residual_max < 1e-8, "{}", last.volume_residual_max);
    assert!(last.p_omega_max < 1e-8);
    assert!(last.trace_identity_residual < 1e-7);
    assert!(last.min_eig_gprime > 0.0);
    // volume is rescaled back onto the class of omega
    assert!(last.s[0].abs() < 1e-10, "{:?}", last.s);
}
