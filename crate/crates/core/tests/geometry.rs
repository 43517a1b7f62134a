use akcy_core::algebra::sym_eigenvalues;
use akcy_core::dump;
use akcy_core::geometry::forms::{d1, exterior_d, square_density, HodgeStar};
use akcy_core::geometry::Projectors;
use akcy_core::scenario::perturbed_triple;
use akcy_core::solver::normalize_f;
use akcy_core::suites::{random_one_form, random_potential};
use akcy_core::{integrate, Grid4, ScalarField, Slot, TensorField};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_tensor(grid: &Grid4, slots: Vec<Slot>, seed: u64) -> TensorField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let comps = (0..1usize << (2 * slots.len()))
        .map(|_| (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    TensorField::new(grid, slots, comps).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn projectors_split_every_two_tensor(seed in 0u64..10_000, eps in 0.0f64..0.3) {
        let grid = Grid4::cubic(4).unwrap();
        let triple = perturbed_triple(&grid, eps, seed).unwrap();
        let pr = Projectors::new(&triple.j);
        let t = random_tensor(&grid, vec![Slot::Co, Slot::Co], seed ^ 0x5eed);
        let (p, q) = (pr.p(&t), pr.q(&t));
        prop_assert!(p.plus(&q).max_abs_diff(&t) < 1e-13);
        prop_assert!(pr.p(&p).max_abs_diff(&p) < 1e-13);
        prop_assert!(pr.q(&q).max_abs_diff(&q) < 1e-13);
        prop_assert!(pr.q(&p).max_abs() < 1e-13);
        // omega is J-invariant, so it lives entirely in the image of Q
        prop_assert!(pr.p_form(&triple.omega).max_abs() < 1e-12);
        prop_assert!(triple.j.squared_residual() < 1e-12);
    }

    #[test]
    fn compatible_metric_is_symmetric_and_positive(seed in 0u64..10_000, eps in 0.0f64..0.3) {
        let grid = Grid4::cubic(4).unwrap();
        let triple = perturbed_triple(&grid, eps, seed).unwrap();
        for p in 0..grid.len() {
            let g = triple.g.tensor().mat(p);
            for i in 0..4 {
                for j in 0..4 {
                    prop_assert!((g[i][j] - g[j][i]).abs() < 1e-13);
                }
            }
            prop_assert!(sym_eigenvalues(&g).iter().all(|&l| l > 0.0));
        }
    }

    #[test]
    fn hodge_star_is_an_involution_on_two_forms(seed in 0u64..10_000, eps in 0.0f64..0.3) {
        let grid = Grid4::cubic(4).unwrap();
        let triple = perturbed_triple(&grid, eps, seed).unwrap();
        let star = HodgeStar::new(&triple.g).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = d1(&random_one_form(&grid, &mut rng, 1.0));
        let back = star.apply(&star.apply(&a));
        prop_assert!(back.tensor().max_abs_diff(a.tensor()) < 1e-12 * a.max_abs().max(1.0));
        let sd = star.self_dual(&a);
        prop_assert!(star.apply(&sd).tensor().max_abs_diff(sd.tensor()) < 1e-12 * a.max_abs().max(1.0));
    }

    #[test]
    fn exterior_derivative_squares_to_zero(seed in 0u64..10_000) {
        let grid = Grid4::cubic(6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = random_one_form(&grid, &mut rng, 1.0);
        let db = d1(&b);
        prop_assert!(db.max_abs() > 1.0);
        prop_assert!(exterior_d(db.tensor()).max_abs() < 1e-10 * db.max_abs());
    }

    #[test]
    fn dump_round_trip_is_bit_exact(seed in any::<u64>(), rank in 0usize..4) {
        let grid = Grid4::new([4, 6, 4, 8], [1.0, 2.0, 0.5, 1.0]).unwrap();
        let slots = (0..rank).map(|k| if k % 2 == 0 { Slot::Co } else { Slot::Contra }).collect();
        let t = random_tensor(&grid, slots, seed);
        let mut buf = Vec::new();
        dump::write_field(&mut buf, &t).unwrap();
        let back = dump::read_field(buf.as_slice()).unwrap();
        prop_assert_eq!(back.slots(), t.slots());
        prop_assert_eq!(back.grid().n(), grid.n());
        for (x, y) in back.components().iter().zip(t.components()) {
            prop_assert!(x.iter().zip(y).all(|(a, b)| a.to_bits() == b.to_bits()));
        }
    }

    #[test]
    fn normalized_forcing_preserves_volume(seed in 0u64..10_000, amp in 0.01f64..3.0, shift in -5.0f64..5.0) {
        let grid = Grid4::cubic(4).unwrap();
        let triple = perturbed_triple(&grid, 0.1, seed).unwrap();
        let d = square_density(&triple.omega);
        let f = normalize_f(&random_potential(&grid, seed, amp), &triple.omega).unwrap();
        let vol = integrate(&ScalarField::constant(&grid, 1.0), &d).unwrap();
        let weighted = integrate(&f.map(f64::exp), &d).unwrap();
        prop_assert!((weighted / vol - 1.0).abs() < 1e-12);
        // constants are absorbed and normalisation is idempotent
        let shifted = normalize_f(&f.map(|v| v + shift), &triple.omega).unwrap();
        let again = normalize_f(&f, &triple.omega).unwrap();
        for ((a, b), c) in shifted.values().iter().zip(again.values()).zip(f.values()) {
            prop_assert!((a - c).abs() < 1e-12 && (b - c).abs() < 1e-13);
        }
    }
}

#[test]
fn non_finite_forcing_is_rejected() {
    let grid = Grid4::cubic(4).unwrap();
    let triple = perturbed_triple(&grid, 0.0, 0).unwrap();
    let f = ScalarField::from_index_fn(&grid, |p| if p == 3 { f64::NAN } else { 0.0 });
    assert!(normalize_f(&f, &triple.omega).is_err());
}
