//! Potentials `phi_s` along the segment `Omega_s = (1-s) omega + s omega'`
//! and the Hodge-type decomposition
//! `omega' = omega + classes - d(J d phi_s)/2 + d a_s`.

use crate::algebra::{mat6_vec, SELF_DUAL_FLAT};
use crate::error::{Error, Result};
use crate::field::{integrate, OneForm, ScalarField, TwoForm};
use crate::krylov::GmresOptions;

use super::forms::{d1, j_d, square_density, wedge, HodgeStar, MetricData};
use super::laplacian::solve_laplacian;
use super::structure::{metric_from_pair, ACStructure};
use super::system::{split_solution, Gauge, MeanSlot, OneFormSystem};

/// Tolerance on the weighted mean of the potential equation in fixed-class mode.
pub const CLASS_TOL: f64 = 1e-8;

/// Normalisation of the potential equation.
#[derive(Clone, Copy, Debug)]
pub enum ClassMode<'a> {
    /// `[omega'] = [omega]`: the right-hand side must already integrate to zero.
    Fixed,
    /// Classes may drift: the weighted mean of the right-hand side is removed
    /// and `class_term` (the harmonic part of `omega' - omega`) is subtracted
    /// in the decomposition.
    Drifting { class_term: Option<&'a TwoForm> },
}

pub fn segment_form(omega: &TwoForm, omega_prime: &TwoForm, s: f64) -> TwoForm {
    omega.lin_comb(1.0 - s, omega_prime, s)
}

/// Zero-mean `phi_s` solving
/// `Delta_s phi_s = 4 [(1-2s) omega^omega' + s omega'^2 - (1-s) omega^2] / Omega_s^2`
/// (minus its `Omega_s^2`-weighted mean in drifting mode).
pub fn potentials(
    omega: &TwoForm,
    omega_prime: &TwoForm,
    j: &ACStructure,
    s: f64,
    mode: ClassMode<'_>,
) -> Result<ScalarField> {
    let omega_s = segment_form(omega, omega_prime, s);
    let ds = square_density(&omega_s);
    let ww = wedge(omega, omega_prime);
    let w2 = square_density(omega);
    let p2 = square_density(omega_prime);
    let mut rhs = ScalarField::from_index_fn(omega.grid(), |p| {
        4.0 * ((1.0 - 2.0 * s) * ww.values()[p] + s * p2.values()[p] - (1.0 - s) * w2.values()[p])
            / ds.values()[p]
    });
    let total = integrate(&ScalarField::constant(omega.grid(), 1.0), &ds)?;
    let mean = integrate(&rhs, &ds)? / total;
    match mode {
        ClassMode::Fixed => {
            let tol = CLASS_TOL * rhs.max_abs().max(1.0);
            if mean.abs() > tol {
                return Err(Error::InconsistentRhs { mean, tol });
            }
        }
        ClassMode::Drifting { .. } => {}
    }
    rhs.values_mut().iter_mut().for_each(|v| *v -= mean);
    solve_laplacian(&omega_s, j, &rhs, &GmresOptions::default())
}

/// Solution `a` of `d+_g a = rho+`, `d*_g a = 0`, `a` orthogonal to the flat
/// constant one-forms.
pub fn solve_d_plus(g: &crate::field::Metric, rho: &TwoForm, opts: &GmresOptions) -> Result<OneForm> {
    let grid = g.grid();
    let md = MetricData::new(g)?;
    let star = HodgeStar::from_data(grid, &md);
    let n = grid.len();
    let rows: Vec<_> = (0..n)
        .map(|p| star.projected_rows(p, &SELF_DUAL_FLAT, 1.0))
        .collect();
    let mut rhs = vec![0.0; 4 * n];
    for p in 0..n {
        let v = rho.pairs(p);
        for a in 0..3 {
            rhs[a * n + p] = crate::algebra::dot6(&rows[p][a], &v);
        }
    }
    let sys = OneFormSystem::new(
        grid,
        rows,
        Gauge::metric(&md),
        vec![],
        [
            MeanSlot::Field(0),
            MeanSlot::Field(1),
            MeanSlot::Field(2),
            MeanSlot::Field(3),
        ],
        None,
        SELF_DUAL_FLAT,
    )?;
    let mut x = vec![0.0; 4 * n];
    sys.solve(&rhs, &mut x, opts).into_result()?;
    let (a, _) = split_solution(grid, &x);
    Ok(a)
}

/// `(phi_s, a_s)` with `omega' = omega + class_term - d(J d phi_s)/2 + d a_s`,
/// `d+_s a_s` self-dual part of the remainder, `d*_s a_s = 0`.
pub fn decompose(
    omega: &TwoForm,
    omega_prime: &TwoForm,
    j: &ACStructure,
    s: f64,
    mode: ClassMode<'_>,
) -> Result<(ScalarField, OneForm)> {
    let phi = potentials(omega, omega_prime, j, s, mode)?;
    let class_term = match mode {
        ClassMode::Drifting { class_term } => class_term,
        ClassMode::Fixed => None,
    };
    let a = correction_form(omega, omega_prime, j, s, &phi, class_term)?;
    Ok((phi, a))
}

/// The one-form `a_s` of the decomposition for an already computed `phi_s`.
pub fn correction_form(
    omega: &TwoForm,
    omega_prime: &TwoForm,
    j: &ACStructure,
    s: f64,
    phi: &ScalarField,
    class_term: Option<&TwoForm>,
) -> Result<OneForm> {
    let omega_s = segment_form(omega, omega_prime, s);
    let g_s = metric_from_pair(&omega_s, j)?;
    let ddc = d1(&j_d(phi, j));
    let mut rho = omega_prime.minus(omega).lin_comb(1.0, &ddc, 0.5);
    if let Some(c) = class_term {
        rho = rho.minus(c);
    }
    solve_d_plus(&g_s, &rho, &GmresOptions::default())
}

/// Closed form of `P d a_s` in the fixed-class case:
/// `zeta_ij = (d_i J_j^k - d_j J_i^k) d_k phi / 2`.
pub fn torsion_form(j: &ACStructure, phi: &ScalarField) -> TwoForm {
    let dphi = phi.gradient();
    let dj = super::connection::j_derivatives(j);
    TwoForm::from_pairs_fn(phi.grid(), |p| {
        crate::algebra::PAIRS.map(|(a, b)| {
            let mut v = 0.0;
            for k in 0..4 {
                v += (dj[4 * b + k][a][p] - dj[4 * a + k][b][p]) * dphi.comp(k)[p];
            }
            0.5 * v
        })
    })
}

/// Self-dual part of a two-form with respect to `g`, via the Hodge star.
pub fn self_dual_part(g: &crate::field::Metric, a: &TwoForm) -> Result<TwoForm> {
    let star = HodgeStar::new(g)?;
    Ok(TwoForm::from_pairs_fn(a.grid(), |p| {
        let v = a.pairs(p);
        let s = mat6_vec(star.matrix(p), &v);
        [0, 1, 2, 3, 4, 5].map(|k| 0.5 * (v[k] + s[k]))
    }))
}
