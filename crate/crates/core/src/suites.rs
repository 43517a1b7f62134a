//! Property suites over the geometry and the solver, each reduced to named
//! pass/fail outcomes with the measured value and its threshold.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::{inverse, matmul, transpose};
use crate::dump::{read_field, write_field};
use crate::error::Result;
use crate::field::{Metric, OneForm, ScalarField, Slot, TensorField, TwoForm};
use crate::geometry::connection::divergence_j;
use crate::field::{flat_laplacian, solve_flat_poisson};
use crate::geometry::forms::{d1, exterior_d, j_d, square_density, wedge, HodgeStar};
use crate::geometry::harmonic::kernel_spectrum;
use crate::geometry::torsion_identities::{j_invariant_closed_form, torsion_identity_check, metric_of};
use crate::geometry::nijenhuis::{nijenhuis, nijenhuis_ak_form, nijenhuis_norms};
use crate::geometry::potentials::self_dual_part;
use crate::geometry::structure::{metric_from_pair, ACStructure, AKTriple, Projectors};
use crate::grid::Grid4;
use crate::scenario::{perturbed_triple, perturbed_triple_with_modes};
use crate::solver::problem::{phi_map, Anchor, Problem};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

impl CheckOutcome {
    /// Passes when `value < threshold`; NaN fails.
    pub fn below(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        CheckOutcome {
            name: name.into(),
            value,
            threshold,
            passed: value < threshold,
            detail: String::new(),
        }
    }

    /// Passes when `value >= threshold`; NaN fails.
    pub fn at_least(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        CheckOutcome {
            name: name.into(),
            value,
            threshold,
            passed: value >= threshold,
            detail: String::new(),
        }
    }

    pub fn failed(name: impl Into<String>, detail: String) -> Self {
        CheckOutcome {
            name: name.into(),
            value: f64::NAN,
            threshold: f64::NAN,
            passed: false,
            detail,
        }
    }

    pub fn with_detail(mut self, detail: String) -> Self {
        self.detail = detail;
        self
    }

    /// Turns an error in the computation itself into a failed outcome.
    pub fn from_result(name: &str, r: Result<CheckOutcome>) -> Self {
        r.unwrap_or_else(|e| CheckOutcome::failed(name, e.to_string()))
    }
}

fn sci(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(", ")
}

pub fn all_passed(outcomes: &[CheckOutcome]) -> bool {
    outcomes.iter().all(|o| o.passed)
}

fn random_tensor(grid: &Grid4, rng: &mut ChaCha8Rng) -> TensorField {
    let comps = (0..16)
        .map(|_| (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    TensorField::new(grid, vec![Slot::Co, Slot::Co], comps).expect("shape")
}

fn random_two_form(grid: &Grid4, rng: &mut ChaCha8Rng) -> TwoForm {
    let pairs = std::array::from_fn(|_| (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect());
    TwoForm::from_pair_arrays(grid, pairs)
}

/// Band-limited random one-form with modes `|k_j| <= 2`.
pub fn random_one_form(grid: &Grid4, rng: &mut ChaCha8Rng, amplitude: f64) -> OneForm {
    let terms: Vec<(usize, [f64; 4], f64, f64)> = (0..12)
        .map(|_| {
            let k = [0; 4].map(|_: i32| rng.gen_range(-2..=2) as f64);
            (rng.gen_range(0..4), k, rng.gen_range(-1.0..1.0), rng.gen_range(0.0..TAU))
        })
        .collect();
    let l = grid.periods();
    let comps = std::array::from_fn(|c| {
        ScalarField::from_fn(grid, |x| {
            terms
                .iter()
                .filter(|t| t.0 == c)
                .map(|(_, k, a, ph)| amplitude * a * (TAU * (0..4).map(|i| k[i] * x[i] / l[i]).sum::<f64>() + ph).cos())
                .sum()
        })
        .into_values()
    });
    OneForm::from_components(grid, comps).expect("shape")
}

/// Pointwise algebra of `J`, `P`, `Q`, `g` and `omega`. Works on unchecked
/// structures so that injected faults show up as failures.
pub fn structure_suite(label: &str, omega: &TwoForm, j: &ACStructure, seed: u64) -> Vec<CheckOutcome> {
    const TOL: f64 = 1e-10;
    let grid = omega.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pr = Projectors::new(j);
    let t = random_tensor(grid, &mut rng);
    let pt = pr.p(&t);
    let name = |s: &str| format!("{label}: {s}");
    let mut out = vec![
        CheckOutcome::below(name("J^2 = -Id"), j.squared_residual(), TOL),
        CheckOutcome::below(name("P + Q = Id"), pt.plus(&pr.q(&t)).max_abs_diff(&t), TOL),
        CheckOutcome::below(name("P^2 = P"), pr.p(&pt).max_abs_diff(&pt), TOL),
        CheckOutcome::below(name("P omega = 0"), pr.p_form(omega).max_abs(), TOL),
    ];
    let mut invariance: f64 = 0.0;
    for p in 0..grid.len() {
        let jm = j.mat(p);
        let w = omega.mat(p);
        let pulled = matmul(&matmul(&jm, &w), &transpose(&jm));
        for a in 0..4 {
            for b in 0..4 {
                invariance = invariance.max((pulled[a][b] - w[a][b]).abs());
            }
        }
    }
    out.push(CheckOutcome::below(name("omega(J., J.) = omega"), invariance, TOL));
    out.push(match metric_from_pair(omega, j) {
        Ok(g) => CheckOutcome::below(name("P g = 0"), pr.p(g.tensor()).max_abs(), TOL),
        Err(e) => CheckOutcome::failed(name("P g = 0"), e.to_string()),
    });
    out
}

/// `(1 + *)chi/2 = (omega ^ chi / omega^2) omega + P chi` for random `chi`.
pub fn hodge_identity(label: &str, triple: &AKTriple, samples: usize, seed: u64) -> CheckOutcome {
    let name = format!("{label}: self-dual projection formula");
    let run = || -> Result<CheckOutcome> {
        let grid = triple.grid();
        let star = HodgeStar::new(&triple.g)?;
        let pr = Projectors::new(&triple.j);
        let dens = square_density(&triple.omega);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..samples {
            let chi = random_two_form(grid, &mut rng);
            let lhs = star.self_dual(&chi);
            let ratio = wedge(&triple.omega, &chi);
            let pchi = pr.p_form(&chi);
            let rhs = TwoForm::from_pairs_fn(grid, |p| {
                let w = triple.omega.pairs(p);
                let q = pchi.pairs(p);
                let c = ratio.values()[p] / dens.values()[p];
                [0, 1, 2, 3, 4, 5].map(|k| c * w[k] + q[k])
            });
            worst = worst.max(lhs.minus(&rhs).max_abs());
        }
        Ok(CheckOutcome::below(name.clone(), worst, 1e-9))
    };
    CheckOutcome::from_result(&name, run())
}

/// Measured `sup |nabla_i J_j^i|` and observed orders over a refinement sequence.
#[derive(Clone, Debug, Serialize)]
pub struct Refinement {
    pub n: Vec<usize>,
    pub error: Vec<f64>,
    pub orders: Vec<f64>,
}

pub fn harmonicity_refinement(ns: &[usize], epsilon: f64, seed: u64, max_mode: i32) -> Result<Refinement> {
    let mut error = Vec::new();
    for &n in ns {
        let grid = Grid4::cubic(n)?;
        let t = perturbed_triple_with_modes(&grid, epsilon, seed, max_mode)?;
        error.push(divergence_j(&t.g, &t.j)?.tensor().max_abs());
    }
    let orders = (1..ns.len())
        .map(|i| (error[i - 1] / error[i]).ln() / (ns[i] as f64 / ns[i - 1] as f64).ln())
        .collect();
    Ok(Refinement {
        n: ns.to_vec(),
        error,
        orders,
    })
}

pub fn harmonicity_check(ns: &[usize], epsilon: f64, seed: u64, max_mode: i32) -> CheckOutcome {
    let name = "harmonicity: observed order of sup |nabla_i J_j^i|";
    CheckOutcome::from_result(
        name,
        harmonicity_refinement(ns, epsilon, seed, max_mode).map(|r| {
            let min = r.orders.iter().cloned().fold(f64::INFINITY, f64::min);
            CheckOutcome::at_least(name, min, 2.0).with_detail(format!("n {:?} errors [{}] orders {:.2?}", r.n, sci(&r.error), r.orders))
        }),
    )
}

/// `sup` difference of the two Nijenhuis formulas.
pub fn nijenhuis_difference(triple: &AKTriple) -> Result<(f64, f64)> {
    let coord = nijenhuis(&triple.j);
    let ak = nijenhuis_ak_form(triple)?;
    Ok((coord.max_abs_diff(&ak), coord.max_abs()))
}

pub fn nijenhuis_equivalence(label: &str, triple: &AKTriple, tol: f64) -> CheckOutcome {
    let name = format!("{label}: coordinate vs almost-Kähler Nijenhuis formula");
    CheckOutcome::from_result(
        &name,
        nijenhuis_difference(triple)
            .map(|(d, m)| CheckOutcome::below(name.clone(), d, tol).with_detail(format!("sup |N| = {m:.3e}"))),
    )
}

/// Random potential with modes `|k_j| <= 1` and sup norm at most `amplitude`.
pub fn random_potential(grid: &Grid4, seed: u64, amplitude: f64) -> ScalarField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let terms: Vec<([f64; 4], f64, f64)> = (0..4)
        .map(|_| {
            let k = [0; 4].map(|_: i32| rng.gen_range(-1..=1) as f64);
            (k, rng.gen_range(-1.0..1.0) / 4.0, rng.gen_range(0.0..TAU))
        })
        .collect();
    let l = grid.periods();
    ScalarField::from_fn(grid, |x| {
        terms
            .iter()
            .map(|(k, a, ph)| amplitude * a * (TAU * (0..4).map(|i| k[i] * x[i] / l[i]).sum::<f64>() + ph).cos())
            .sum()
    })
}

/// Both torsion identities on a closed `J`-invariant `g'`.
pub fn torsion_identity_suite(label: &str, triple: &AKTriple, seed: u64, integrable: bool) -> Vec<CheckOutcome> {
    let name = |s: &str| format!("{label}: {s}");
    let run = || -> Result<Vec<CheckOutcome>> {
        let grid = triple.grid();
        let phi = random_potential(grid, seed, 5e-3);
        let wp = if integrable {
            triple.omega.lin_comb(1.0, &d1(&j_d(&phi, &triple.j)), -0.5)
        } else {
            j_invariant_closed_form(triple, &phi, 1.0)?
        };
        let r = torsion_identity_check(triple, &metric_of(&wp, &triple.j)?)?;
        let tol = if integrable { 1e-10 } else { 1e-6 };
        let mut out = vec![
            CheckOutcome::below(name("identity (i) residual"), r.alpha_residual, tol),
            CheckOutcome::below(name("identity (ii) residual"), r.beta_residual, tol),
        ];
        if integrable {
            out.push(CheckOutcome::below(name("alpha = 0"), r.alpha_max, 1e-10));
            out.push(CheckOutcome::below(name("beta = 0"), r.beta_max, 1e-10));
        } else {
            out[0].detail = format!("sup |alpha| = {:.3e}", r.alpha_max);
            out[1].detail = format!("sup |beta| = {:.3e}", r.beta_max);
        }
        Ok(out)
    };
    run().unwrap_or_else(|e| vec![CheckOutcome::failed(name("identities"), e.to_string())])
}

pub fn kernel_check(label: &str, g: &Metric, seed: u64) -> Vec<CheckOutcome> {
    let name = |s: &str| format!("{label}: {s}");
    match kernel_spectrum(g, seed) {
        Ok(k) => {
            let top = k.kernel.iter().cloned().fold(0.0, f64::max);
            vec![
                CheckOutcome::below(name("four kernel singular values"), top, 1e-10)
                    .with_detail(format!("[{}]", sci(&k.kernel))),
                CheckOutcome::at_least(name("fifth singular value"), k.gap, 1e-3),
            ]
        }
        Err(e) => vec![CheckOutcome::failed(name("kernel spectrum"), e.to_string())],
    }
}

/// Central differences of `Phi` in `b` at the anchor against `d+ beta`.
pub fn linearization_check(problem: &Problem, directions: usize, seed: u64) -> CheckOutcome {
    let name = "Newton linearisation at the anchor equals d+";
    let run = || -> Result<CheckOutcome> {
        let grid = problem.triple.grid();
        let anchor = Anchor::new(problem.triple.omega.clone(), 0.0)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..directions {
            let beta = random_one_form(grid, &mut rng, 1.0);
            // central differences: truncation ~ (h |d beta|)^2, roundoff ~ 1e-16 / (h |d beta|)
            let h = 1e-5 / d1(&beta).max_abs();
            let step = |c: f64| OneForm::new(beta.tensor().scaled(c)).expect("shape");
            let plus = phi_map(&step(h), &[0.0; 2], 0.0, &anchor, problem)?;
            let minus = phi_map(&step(-h), &[0.0; 2], 0.0, &anchor, problem)?;
            let fd = plus.form.minus(&minus.form).scaled(0.5 / h);
            let exact = self_dual_part(&problem.triple.g, &d1(&beta))?;
            worst = worst.max(fd.minus(&exact).flat_l2_norm() / exact.flat_l2_norm());
        }
        Ok(CheckOutcome::below(name, worst, 1e-6))
    };
    CheckOutcome::from_result(name, run())
}

/// `sup |N(J)|_g` per epsilon and the log-log slope of the fit.
#[derive(Clone, Debug, Serialize)]
pub struct NijenhuisScaling {
    pub epsilon: Vec<f64>,
    pub c0: Vec<f64>,
    pub l1: Vec<f64>,
    pub slope: f64,
}

pub fn nijenhuis_scaling(grid: &Grid4, epsilons: &[f64], seed: u64) -> Result<NijenhuisScaling> {
    let mut c0 = Vec::new();
    let mut l1 = Vec::new();
    for &e in epsilons {
        let t = perturbed_triple(grid, e, seed)?;
        let nn = nijenhuis_norms(&nijenhuis(&t.j), &t.g, 4.0);
        c0.push(nn.c0);
        l1.push(nn.l1);
    }
    Ok(NijenhuisScaling {
        epsilon: epsilons.to_vec(),
        slope: log_log_slope(epsilons, &c0),
        c0,
        l1,
    })
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// A copy of `j` with `J^2 + Id` made non-zero by scaling one point.
pub fn corrupt_j(j: &ACStructure, factor: f64) -> ACStructure {
    let mut t = j.tensor().clone();
    for c in t.components_mut() {
        c[0] *= factor;
    }
    ACStructure::new_unchecked(t)
}

/// Spectral calculus: exact derivatives of a resolved mode, Poisson round
/// trip, `d d = 0` and a bit-exact dump round trip.
pub fn field_suites(grid: &Grid4, seed: u64) -> Vec<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l = grid.periods();
    let k = [1.0, -1.0, 0.0, 1.0];
    let arg = move |x: [f64; 4]| TAU * (0..4).map(|i| k[i] * x[i] / l[i]).sum::<f64>();
    let u = ScalarField::from_fn(grid, |x| arg(x).sin());
    let derivative = (0..4)
        .map(|a| {
            let exact = ScalarField::from_fn(grid, |x| TAU * k[a] / l[a] * arg(x).cos());
            u.partial(a).zip_map(&exact, |p, q| p - q).max_abs()
        })
        .fold(0.0, f64::max);
    let v = random_potential(grid, seed, 1.0);
    let poisson = match solve_flat_poisson(&flat_laplacian(&v)) {
        Ok(w) => {
            let m = v.mean();
            CheckOutcome::below("Poisson round trip", w.zip_map(&v, |a, b| a - b + m).max_abs(), 1e-10)
        }
        Err(e) => CheckOutcome::failed("Poisson round trip", e.to_string()),
    };
    let b = random_one_form(grid, &mut rng, 1.0);
    let dd = exterior_d(d1(&b).tensor()).max_abs();
    let t = random_tensor(grid, &mut rng);
    let mut bytes = Vec::new();
    let dump = match write_field(&mut bytes, &t).and_then(|_| read_field(bytes.as_slice())) {
        Ok(back) => CheckOutcome::below("dump round trip", if back == t { 0.0 } else { 1.0 }, 0.5),
        Err(e) => CheckOutcome::failed("dump round trip", e.to_string()),
    };
    vec![
        CheckOutcome::below("spectral derivative of a resolved mode", derivative, 1e-10),
        poisson,
        CheckOutcome::below("d d = 0", dd, 1e-10),
        dump,
    ]
}

/// The trace identity holds at an exact solution and reacts to a 1% volume violation.
pub fn trace_identity_sensitivity(triple: &AKTriple) -> Vec<CheckOutcome> {
    let residual = |omega_prime: &TwoForm, ratio: f64| -> Result<f64> {
        let gp = metric_from_pair(omega_prime, &triple.j)?;
        let mut worst: f64 = 0.0;
        for p in 0..triple.grid().len() {
            let g = triple.g.mat(p);
            let h = gp.mat(p);
            let (gi, hi) = (inverse(&g).expect("metric"), inverse(&h).expect("metric"));
            let tr = (0..4).map(|a| (0..4).map(|b| gi[a][b] * h[a][b]).sum::<f64>()).sum::<f64>();
            let tr_inv = (0..4).map(|a| (0..4).map(|b| hi[a][b] * g[a][b]).sum::<f64>()).sum::<f64>();
            worst = worst.max((tr - ratio * tr_inv).abs());
        }
        Ok(worst)
    };
    // omega' = omega solves the equation with F = 0
    let exact = residual(&triple.omega, 1.0);
    let violated = residual(&triple.omega.scaled(1.01f64.sqrt()), 1.0);
    match (exact, violated) {
        (Ok(a), Ok(b)) => vec![
            CheckOutcome::below("trace identity at a solution", a, 1e-7),
            CheckOutcome::at_least("trace identity under a 1% volume violation", b, 1e-4),
        ],
        (Err(e), _) | (_, Err(e)) => vec![CheckOutcome::failed("trace identity", e.to_string())],
    }
}

/// Solver-side properties that need no continuity run.
pub fn solver_suites(problem: &Problem, seed: u64) -> Vec<CheckOutcome> {
    let name = "Phi vanishes at the anchor";
    let anchor = CheckOutcome::from_result(
        name,
        Anchor::new(problem.triple.omega.clone(), 0.0).and_then(|a| {
            let v = phi_map(&OneForm::zeros(problem.triple.grid()), &[0.0; 2], 0.0, &a, problem)?;
            Ok(CheckOutcome::below(name, v.form.max_abs() + v.c_hat.abs(), 1e-14))
        }),
    );
    let dens = square_density(&problem.triple.omega);
    let total: f64 = dens.values().iter().sum();
    let weighted: f64 = problem.f.values().iter().zip(dens.values()).map(|(f, d)| f.exp() * d).sum();
    let mut out = vec![
        CheckOutcome::below("forcing normalisation", (weighted / total - 1.0).abs(), 1e-12),
        anchor,
        linearization_check(problem, 10, seed),
    ];
    out.extend(trace_identity_sensitivity(&problem.triple));
    out
}

/// The default geometric suites at one grid: flat and perturbed structure
/// algebra, the projection formula, Nijenhuis formulas, torsion identities and the kernel.
pub fn geometry_suites(grid: &Grid4, epsilon: f64, seed: u64) -> Result<Vec<CheckOutcome>> {
    let flat = AKTriple::standard(grid);
    let pert = perturbed_triple(grid, epsilon, seed)?;
    let mut out = Vec::new();
    out.extend(structure_suite("flat", &flat.omega, &flat.j, seed));
    out.extend(structure_suite("perturbed", &pert.omega, &pert.j, seed));
    out.push(hodge_identity("flat", &flat, 20, seed));
    out.push(hodge_identity("perturbed", &pert, 20, seed));
    out.push(nijenhuis_equivalence("flat", &flat, 1e-12));
    out.push(nijenhuis_equivalence("perturbed", &pert, 1e-6));
    out.extend(torsion_identity_suite("flat, integrable g'", &flat, seed, true));
    out.extend(torsion_identity_suite("perturbed", &pert, seed, false));
    out.extend(kernel_check("flat", &flat.g, seed));
    out.extend(kernel_check("perturbed", &pert.g, seed));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_structure_passes() {
        let grid = Grid4::cubic(4).unwrap();
        let t = AKTriple::standard(&grid);
        assert!(all_passed(&structure_suite("flat", &t.omega, &t.j, 1)));
    }

    #[test]
    fn corrupted_j_is_reported() {
        let grid = Grid4::cubic(4).unwrap();
        let t = AKTriple::standard(&grid);
        let bad = corrupt_j(&t.j, 1.01);
        let out = structure_suite("corrupt", &t.omega, &bad, 1);
        assert!(!out[0].passed && out[0].name.contains("J^2"));
    }

    #[test]
    fn slope_of_power_law() {
        let x = [1e-4, 1e-3, 1e-2];
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v * v).collect();
        assert!((log_log_slope(&x, &y) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn nan_never_passes() {
        assert!(!CheckOutcome::below("x", f64::NAN, 1.0).passed);
        assert!(!CheckOutcome::at_least("x", f64::NAN, 1.0).passed);
    }
}
