//! The tensors `alpha`, `beta` expressing the antisymmetric parts of
//! `P nabla g'` and `Q nabla g'` through `nabla J` alone, checked pointwise.
//!
//! The identities need `J'_ij = J_i^k g'_kj` to be closed, i.e. `g'` must come
//! from a closed `J`-invariant form; [`j_invariant_closed_form`] builds such forms
//! away from the integrable case.


use crate::error::{Error, Result};
use crate::field::{spectral_partials, Metric, ScalarField, TwoForm};
use crate::krylov::GmresOptions;

use super::connection::{j_derivatives, nabla_j_at, MetricDerivatives, Rank3};
use super::forms::{d1, j_d, square_density};
use super::harmonic::{class_directions, harmonic_self_dual_basis};
use super::structure::{AKTriple, ACStructure};
use super::system::{anti_invariant_rows, flat_newton_rows, split_solution, volume_row, Gauge, MeanSlot, OneFormSystem};

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct TorsionIdentityResiduals {
    /// `max |2P nabla g' - 2P' nabla g' - alpha|`.
    pub alpha_residual: f64,
    /// `max |2Q nabla g' - 2Q' nabla g' - beta|`.
    pub beta_residual: f64,
    pub alpha_max: f64,
    pub beta_max: f64,
}

/// `alpha_ijp` from `nabla J` (`t[m][j][l] = nabla_m J_j^l`), `J` and `g'`.
pub fn alpha_at(t: &Rank3, jm: &[[f64; 4]; 4], gp: &[[f64; 4]; 4]) -> Rank3 {
    let jp = jprime(jm, gp);
    let mut a = [[[0.0; 4]; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            for p in 0..4 {
                let mut v = 0.0;
                for l in 0..4 {
                    v += jp[p][l] * (t[i][j][l] - t[j][i][l]);
                    for k in 0..4 {
                        v += t[p][l][k] * (gp[k][j] * jm[i][l] - gp[k][i] * jm[j][l]);
                        v += gp[k][p] * (t[l][j][k] * jm[i][l] - t[l][i][k] * jm[j][l]);
                    }
                }
                a[i][j][p] = v;
            }
        }
    }
    a
}

/// `beta_ijp` from `nabla J`, `J` and `g'`.
pub fn beta_at(t: &Rank3, jm: &[[f64; 4]; 4], gp: &[[f64; 4]; 4]) -> Rank3 {
    let mut b = [[[0.0; 4]; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            for p in 0..4 {
                let mut v = 0.0;
                for k in 0..4 {
                    for l in 0..4 {
                        v += gp[k][l] * (t[j][i][l] * jm[p][k] - t[j][p][l] * jm[i][k]);
                        v -= gp[k][j] * (t[p][l][k] * jm[i][l] - t[i][l][k] * jm[p][l]);
                        v -= t[l][j][k] * (gp[k][p] * jm[i][l] - gp[k][i] * jm[p][l]);
                    }
                }
                b[i][j][p] = v;
            }
        }
    }
    b
}

fn jprime(jm: &[[f64; 4]; 4], gp: &[[f64; 4]; 4]) -> [[f64; 4]; 4] {
    let mut out = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] = (0..4).map(|k| jm[i][k] * gp[k][j]).sum();
        }
    }
    out
}

/// Evaluates both sides of the two identities at every grid point and returns
/// the largest deviations.
pub fn torsion_identity_check(triple: &AKTriple, g_prime: &Metric) -> Result<TorsionIdentityResiduals> {
    let grid = triple.grid();
    if g_prime.grid() != grid {
        return Err(Error::ShapeMismatch(format!(
            "g' lives on {:?}, the triple on {:?}",
            g_prime.grid().n(),
            grid.n()
        )));
    }
    let md = MetricDerivatives::new(&triple.g)?;
    let dj = j_derivatives(&triple.j);
    let comps: Vec<&[f64]> = (0..16).map(|c| g_prime.comp(c)).collect();
    let dgp = spectral_partials(grid, &comps, &[0, 1, 2, 3]);
    let mut out = TorsionIdentityResiduals {
        alpha_residual: 0.0,
        beta_residual: 0.0,
        alpha_max: 0.0,
        beta_max: 0.0,
    };
    for p in 0..grid.len() {
        let jm = triple.j.mat(p);
        let gp = g_prime.mat(p);
        let gam = md.christoffel(p);
        let t = nabla_j_at(&jm, &dj, &gam, p);
        // ng[r][s][q] = nabla_r g'_sq
        let mut ng = [[[0.0; 4]; 4]; 4];
        for r in 0..4 {
            for s in 0..4 {
                for q in 0..4 {
                    let mut v = dgp[4 * s + q][r][p];
                    for m in 0..4 {
                        v -= gam[m][r][s] * gp[m][q] + gam[m][r][q] * gp[s][m];
                    }
                    ng[r][s][q] = v;
                }
            }
        }
        // jj[i][j][q] = J_i^r J_j^s nabla_r g'_sq
        let mut jj = [[[0.0; 4]; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                for q in 0..4 {
                    let mut v = 0.0;
                    for r in 0..4 {
                        for s in 0..4 {
                            v += jm[i][r] * jm[j][s] * ng[r][s][q];
                        }
                    }
                    jj[i][j][q] = v;
                }
            }
        }
        let alpha = alpha_at(&t, &jm, &gp);
        let beta = beta_at(&t, &jm, &gp);
        for i in 0..4 {
            for j in 0..4 {
                for q in 0..4 {
                    let lhs_a = (ng[i][j][q] - jj[i][j][q]) - (ng[j][i][q] - jj[j][i][q]);
                    let lhs_b = (ng[i][j][q] + jj[i][j][q]) - (ng[q][j][i] + jj[q][j][i]);
                    out.alpha_residual = out.alpha_residual.max((lhs_a - alpha[i][j][q]).abs());
                    out.beta_residual = out.beta_residual.max((lhs_b - beta[i][j][q]).abs());
                    out.alpha_max = out.alpha_max.max(alpha[i][j][q].abs());
                    out.beta_max = out.beta_max.max(beta[i][j][q].abs());
                }
            }
        }
    }
    Ok(out)
}

/// Closed, `J`-invariant `omega + t (-d(J d phi)/2 + d a + y_1 chi_1 + y_2 chi_2)`,
/// where `a` and `y` remove the anti-invariant part and `omega ^ d a = 0` up
/// to a constant. `chi_a` are the harmonic self-dual forms orthogonal to `omega`.
pub fn j_invariant_closed_form(triple: &AKTriple, phi: &ScalarField, t: f64) -> Result<TwoForm> {
    let grid = triple.grid();
    let n = grid.len();
    let sigma = d1(&j_d(phi, &triple.j)).scaled(-0.5);
    let basis = harmonic_self_dual_basis(&triple.g)?;
    let (_, chi) = class_directions(&triple.g, &triple.omega, &basis)?;
    let dens = square_density(&triple.omega);
    let total: f64 = dens.values().iter().sum();
    let mut rows = Vec::with_capacity(n);
    for p in 0..n {
        let [r1, r2] = anti_invariant_rows(&triple.j.mat(p));
        rows.push([volume_row(&triple.omega.pairs(p), dens.values()[p]), r1, r2]);
    }
    let weights: Vec<f64> = dens.values().iter().map(|d| d / total).collect();
    let sys = OneFormSystem::new(
        grid,
        rows.clone(),
        Gauge::Flat,
        chi.to_vec(),
        [
            MeanSlot::Field(0),
            MeanSlot::Field(3),
            MeanSlot::Extra(0),
            MeanSlot::Extra(1),
        ],
        Some(weights),
        flat_newton_rows(),
    )?;
    let mut rhs = vec![0.0; 4 * n + 2];
    for p in 0..n {
        let s = sigma.pairs(p);
        for a in 1..3 {
            rhs[a * n + p] = -crate::algebra::dot6(&rows[p][a], &s);
        }
    }
    let mut x = vec![0.0; 4 * n + 2];
    sys.solve(&rhs, &mut x, &GmresOptions::default()).into_result()?;
    let (a, y) = split_solution(grid, &x);
    let mut delta = sigma.plus(&d1(&a));
    for (c, yc) in chi.iter().zip(&y) {
        delta = delta.lin_comb(1.0, c, *yc);
    }
    Ok(triple.omega.lin_comb(1.0, &delta, t))
}

/// Metric `g'` of a closed `J`-invariant form `omega'`.
pub fn metric_of(omega_prime: &TwoForm, j: &ACStructure) -> Result<Metric> {
    super::structure::metric_from_pair(omega_prime, j)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::structure::{check_compatibility, Projectors};
    use crate::grid::Grid4;
    use crate::scenario::perturbed_triple_with_modes;
    use std::f64::consts::PI;

    fn bump(grid: &Grid4) -> ScalarField {
        ScalarField::from_fn(grid, |x| {
            0.005 * (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).cos() + 0.003 * (2.0 * PI * (x[2] + x[3])).cos()
        })
    }

    #[test]
    fn integrable_case_has_vanishing_alpha_beta() {
        let grid = Grid4::cubic(8).unwrap();
        let t = AKTriple::standard(&grid);
        let wp = t.omega.lin_comb(1.0, &d1(&j_d(&bump(&grid), &t.j)), -0.5);
        let gp = metric_of(&wp, &t.j).unwrap();
        let r = torsion_identity_check(&t, &gp).unwrap();
        assert!(r.alpha_max < 1e-14 && r.beta_max < 1e-14);
        assert!(r.alpha_residual < 1e-10 && r.beta_residual < 1e-10, "{r:?}");
    }

    #[test]
    fn g_prime_equal_to_g() {
        let grid = Grid4::cubic(8).unwrap();
        let t = perturbed_triple_with_modes(&grid, 0.2, 3, 1).unwrap();
        let r = torsion_identity_check(&t, &t.g).unwrap();
        assert!(r.alpha_residual < 1e-8 && r.beta_residual < 1e-8, "{r:?}");
    }

    #[test]
    fn constructed_form_is_closed_and_invariant() {
        let grid = Grid4::cubic(8).unwrap();
        let t = perturbed_triple_with_modes(&grid, 0.2, 3, 1).unwrap();
        let wp = j_invariant_closed_form(&t, &bump(&grid), 1.0).unwrap();
        let pw = Projectors::new(&t.j).p_form(&wp);
        // modes touching Nyquist are out of reach of d a; only they may remain
        let mut resolved: Vec<Vec<f64>> = (0..6).map(|k| (0..grid.len()).map(|p| pw.pairs(p)[k]).collect()).collect();
        grid.spectral().filter_unresolved(&mut resolved);
        let r_max = resolved.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(r_max < 1e-11, "resolved P omega' = {r_max}");
        assert!(pw.max_abs() < 1e-8, "P omega' = {}", pw.max_abs());
        let rep = check_compatibility(&wp, &t.j);
        assert!(rep.d_omega < 1e-10 && rep.g_min_eig > 0.5, "{rep:?}");
        let r = torsion_identity_check(&t, &metric_of(&wp, &t.j).unwrap()).unwrap();
        assert!(r.alpha_max > 1e-4, "alpha should not vanish: {r:?}");
        assert!(r.alpha_residual < 1e-5 && r.beta_residual < 1e-5, "{r:?}");
    }

    #[test]
    fn non_closed_invariant_metric_breaks_the_identity() {
        let grid = Grid4::cubic(8).unwrap();
        let t = AKTriple::standard(&grid);
        let f = bump(&grid);
        let gp = Metric::from_mat_fn(&grid, |p| {
            let s = 1.0 + f.values()[p];
            crate::algebra::IDENTITY.map(|r| r.map(|v| v * s))
        });
        let r = torsion_identity_check(&t, &gp).unwrap();
        assert!(r.alpha_residual > 1e-3);
    }
}
