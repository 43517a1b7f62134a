//! Per-step diagnostics of a candidate solution `omega'`.

use nalgebra::{Matrix2, Matrix4};
use serde::{Deserialize, Serialize};

use crate::algebra::{inverse, sym_eigenvalues, to_na, from_na};
use crate::error::Result;
use crate::field::{integrate_density, ScalarField, TwoForm};
use crate::geometry::forms::{d1, j_d, l2_inner2_with, square_density, wedge, MetricData};
use crate::geometry::harmonic::{class_directions, harmonic_self_dual_basis};
use crate::geometry::nijenhuis::{nijenhuis, nijenhuis_norms, NijenhuisNorms};
use crate::geometry::potentials::{correction_form, potentials, torsion_form, ClassMode};
use crate::geometry::structure::{metric_from_pair, Projectors};

use super::problem::Problem;

/// Everything logged for one accepted continuity step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub newton_iters: usize,
    pub res_volume: f64,
    pub res_selfdual: f64,
    pub res_gauge: f64,
    /// Smallest eigenvalue of `g'` relative to `g`.
    pub min_eig_gprime: f64,
    pub osc_phi0: f64,
    pub osc_phi1: f64,
    pub osc_phi_half: f64,
    /// `max |phi_a - phi_b|` over the three potentials, divided by `osc phi_1`.
    pub phi_spread: f64,
    /// Range of `tr_g g'`.
    pub tr_min: f64,
    pub tr_max: f64,
    /// Range of `tr_g' g`.
    pub tr_inv_min: f64,
    pub tr_inv_max: f64,
    /// `min tr_g g' - 4 exp(inf(tF + c_t) / 2)`; non-negative when the bound holds.
    pub lower_bound_margin: f64,
    /// `max |tr_g g' - e^(tF + c_t) tr_g' g|`.
    pub trace_identity_residual: f64,
    /// `max |omega'^2 - e^(tF + c_t) omega^2| / omega^2`.
    pub volume_residual_max: f64,
    /// `max |P omega'|` over components.
    pub p_omega_max: f64,
    pub claim_quantity: f64,
    pub class_term_lp: f64,
    /// `claim_quantity + class_term_lp`, compared with the claim threshold.
    pub modified_claim: f64,
    pub claim_exceeded: bool,
    pub da1_l2: f64,
    /// `|| omega' - (omega + s.chi - d(J d phi_1)/2 + d a_1) ||`.
    pub reconstruction_residual: f64,
    /// `L^2(g')` norm of the harmonic part of the torsion form of `phi_1`.
    pub pi_zeta_l2: f64,
    /// Smallest singular value of `int chi_j ^ chi~_i`.
    pub pairing_min_sv: f64,
    pub nij_l1: f64,
    pub nij_lp: f64,
    pub nij_c0: f64,
    pub s: [f64; 3],
    pub c_hat: f64,
    /// `log(max tr / min tr) / osc phi_1`; `None` when `osc phi_1 <= 1e-12`.
    pub fitted_a: Option<f64>,
}

/// Solver-side quantities that the geometry cannot recover from `omega'` alone.
#[derive(Clone, Copy, Debug, Default)]
pub struct StepInfo {
    pub newton_iters: usize,
    pub res_gauge: f64,
    pub c_hat: f64,
}

/// `(int |f|^p omega^2 / int omega^2)^(1/p)`.
fn normalised_lp(f: &ScalarField, omega_sq: &ScalarField, volume: f64, p: f64) -> f64 {
    let s: f64 = f
        .values()
        .iter()
        .zip(omega_sq.values())
        .map(|(v, w)| v.abs().powf(p) * w)
        .sum();
    (s * f.grid().cell_volume() / volume).powf(1.0 / p)
}

pub fn nijenhuis_summary(problem: &Problem, p: f64) -> NijenhuisNorms {
    nijenhuis_norms(&nijenhuis(&problem.triple.j), &problem.triple.g, p)
}

/// Diagnostics of `omega_prime` as a solution at time `t`.
pub fn diagnostics(
    problem: &Problem,
    omega_prime: &TwoForm,
    t: f64,
    p: f64,
    claim_threshold: f64,
    nij: &NijenhuisNorms,
    info: StepInfo,
) -> Result<DiagnosticsRecord> {
    let triple = &problem.triple;
    let grid = triple.grid();
    let n = grid.len();
    let omega = &triple.omega;
    let j = &triple.j;
    let target = problem.target_log(t);
    let d = &problem.omega_sq;
    let dp = square_density(omega_prime);
    let g_prime = metric_from_pair(omega_prime, j)?;

    let mut volume_residual_max: f64 = 0.0;
    let mut res_volume = 0.0;
    let mut tr = vec![0.0; n];
    let mut tr_inv = vec![0.0; n];
    let mut min_eig = f64::INFINITY;
    let mut trace_identity_residual: f64 = 0.0;
    for q in 0..n {
        let e = target.values()[q].exp();
        volume_residual_max = volume_residual_max.max((dp.values()[q] - e * d.values()[q]).abs() / d.values()[q]);
        let lr = (dp.values()[q] / d.values()[q]).ln() - target.values()[q];
        res_volume += lr * lr;
        let gm = triple.g.mat(q);
        let gp = g_prime.mat(q);
        let gi = inverse(&gm).expect("metric is invertible");
        let gpi = inverse(&gp).expect("metric is invertible");
        tr[q] = (0..4).map(|a| (0..4).map(|b| gi[a][b] * gp[a][b]).sum::<f64>()).sum();
        tr_inv[q] = (0..4).map(|a| (0..4).map(|b| gpi[a][b] * gm[a][b]).sum::<f64>()).sum();
        trace_identity_residual = trace_identity_residual.max((tr[q] - e * tr_inv[q]).abs());
        // eigenvalues of g' relative to g: L^-1 g' L^-T with g = L L^T
        let l = to_na(&gm).cholesky().expect("g is positive definite").l();
        let li = l.try_inverse().expect("triangular factor is invertible");
        let m: Matrix4<f64> = li * to_na(&gp) * li.transpose();
        min_eig = min_eig.min(sym_eigenvalues(&from_na(&((m + m.transpose()) * 0.5)))[0]);
    }
    let res_volume = (res_volume * grid.cell_volume()).sqrt();
    let fold = |v: &[f64], init: f64, f: fn(f64, f64) -> f64| v.iter().cloned().fold(init, f);
    let tr_min = fold(&tr, f64::INFINITY, f64::min);
    let tr_max = fold(&tr, f64::NEG_INFINITY, f64::max);
    let lower_bound_margin = tr_min - 4.0 * (target.min() / 2.0).exp();

    let pw = Projectors::new(j).p_form(omega_prime);
    let s = problem.class_coordinates(omega_prime);
    let class_term = problem.class_term(&s);
    let mode = ClassMode::Drifting {
        class_term: Some(&class_term),
    };
    let phi1 = potentials(omega, omega_prime, j, 1.0, mode)?;
    let phi_half = potentials(omega, omega_prime, j, 0.5, mode)?;
    let phi0 = potentials(omega, omega_prime, j, 0.0, mode)?;
    let osc1 = phi1.oscillation();
    let spread = [(&phi0, &phi_half), (&phi0, &phi1), (&phi_half, &phi1)]
        .iter()
        .map(|(a, b)| a.zip_map(b, |x, y| x - y).max_abs())
        .fold(0.0, f64::max);
    let a1 = correction_form(omega, omega_prime, j, 1.0, &phi1, Some(&class_term))?;
    let da1 = d1(&a1);
    let recon = omega
        .plus(&class_term)
        .lin_comb(1.0, &d1(&j_d(&phi1, j)), -0.5)
        .plus(&da1);
    let ratio = |x: &TwoForm| ScalarField::from_index_fn(grid, |q| wedge6_at(x, omega, q) / d.values()[q]);
    let claim_quantity = normalised_lp(&ratio(&da1), d, problem.volume, p);
    let class_term_lp = normalised_lp(&ratio(&class_term), d, problem.volume, p);
    let modified_claim = claim_quantity + class_term_lp;

    // harmonic data of omega' for the projection of zeta and the pairing matrix
    let md_prime = MetricData::new(&g_prime)?;
    let basis_prime = harmonic_self_dual_basis(&g_prime)?;
    let (omega_hat_prime, chi_tilde) = class_directions(&g_prime, omega_prime, &basis_prime)?;
    let zeta = torsion_form(j, &phi1);
    let pi_zeta_l2 = [&omega_hat_prime, &chi_tilde[0], &chi_tilde[1]]
        .iter()
        .map(|e| l2_inner2_with(&md_prime, &zeta, e).powi(2))
        .sum::<f64>()
        .sqrt();
    let mut pairing = Matrix2::zeros();
    for a in 0..2 {
        for b in 0..2 {
            pairing[(a, b)] = integrate_density(&wedge(&problem.chi[b], &chi_tilde[a]));
        }
    }
    let pairing_min_sv = pairing.singular_values().min();

    Ok(DiagnosticsRecord {
        t,
        newton_iters: info.newton_iters,
        res_volume,
        res_selfdual: pw.flat_l2_norm(),
        res_gauge: info.res_gauge,
        min_eig_gprime: min_eig,
        osc_phi0: phi0.oscillation(),
        osc_phi1: osc1,
        osc_phi_half: phi_half.oscillation(),
        phi_spread: if osc1 > 0.0 { spread / osc1 } else { spread },
        tr_min,
        tr_max,
        tr_inv_min: fold(&tr_inv, f64::INFINITY, f64::min),
        tr_inv_max: fold(&tr_inv, f64::NEG_INFINITY, f64::max),
        lower_bound_margin,
        trace_identity_residual,
        volume_residual_max,
        p_omega_max: pw.max_abs(),
        claim_quantity,
        class_term_lp,
        modified_claim,
        claim_exceeded: modified_claim >= claim_threshold,
        da1_l2: da1.flat_l2_norm(),
        reconstruction_residual: recon.minus(omega_prime).flat_l2_norm(),
        pi_zeta_l2,
        pairing_min_sv,
        nij_l1: nij.l1,
        nij_lp: nij.lp,
        nij_c0: nij.c0,
        s,
        c_hat: info.c_hat,
        fitted_a: (osc1 > 1e-12).then(|| (tr_max / tr_min).ln() / osc1),
    })
}

fn wedge6_at(a: &TwoForm, b: &TwoForm, q: usize) -> f64 {
    crate::algebra::wedge6(&a.pairs(q), &b.pairs(q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::structure::AKTriple;
    use crate::Grid4;

    #[test]
    fn identity_solution_has_trivial_diagnostics() {
        let grid = Grid4::cubic(4).unwrap();
        let t = AKTriple::standard(&grid);
        let problem = Problem::new(t.clone(), ScalarField::zeros(&grid)).unwrap();
        let nij = nijenhuis_summary(&problem, 4.0);
        let r = diagnostics(&problem, &t.omega, 1.0, 4.0, 1.0, &nij, StepInfo::default()).unwrap();
        assert!((r.tr_min - 4.0).abs() < 1e-14 && (r.tr_max - 4.0).abs() < 1e-14);
        assert!(r.trace_identity_residual < 1e-14);
        assert!(r.osc_phi1 < 1e-14 && r.fitted_a.is_none());
        assert!(r.lower_bound_margin.abs() < 1e-14);
        assert!(r.claim_quantity < 1e-14 && !r.claim_exceeded);
        assert!((r.pairing_min_sv - 1.0).abs() < 1e-10);
    }
}
