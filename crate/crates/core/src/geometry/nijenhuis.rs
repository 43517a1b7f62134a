//! The Nijenhuis tensor, by the coordinate formula and by the almost-Kähler
//! identity `N^i_jk = 2 (nabla^i J_j^l) J_kl`.

use crate::error::Result;
use crate::field::{Metric, ScalarField, Slot, TensorField};

use super::connection::{j_derivatives, nabla_j_at, MetricDerivatives};
use super::structure::{ACStructure, AKTriple};

/// Index of `N^i_jk` in the returned tensor (slots `contra, co, co`).
pub fn nij_index(i: usize, j: usize, k: usize) -> usize {
    16 * i + 4 * j + k
}

/// `N^i_jk = J_k^l d_l J_j^i + J_l^i d_j J_k^l - J_j^l d_l J_k^i - J_l^i d_k J_j^l`.
pub fn nijenhuis(j: &ACStructure) -> TensorField {
    let grid = j.grid();
    let dj = j_derivatives(j);
    let d = |a: usize, b: usize, axis: usize, p: usize| dj[4 * a + b][axis][p];
    let mut out = TensorField::zeros(grid, vec![Slot::Contra, Slot::Co, Slot::Co]);
    for p in 0..grid.len() {
        let jm = j.mat(p);
        for i in 0..4 {
            for jj in 0..4 {
                for k in 0..4 {
                    let mut v = 0.0;
                    for l in 0..4 {
                        v += jm[k][l] * d(jj, i, l, p) + jm[l][i] * d(k, l, jj, p)
                            - jm[jj][l] * d(k, i, l, p)
                            - jm[l][i] * d(jj, l, k, p);
                    }
                    out.components_mut()[nij_index(i, jj, k)][p] = v;
                }
            }
        }
    }
    out
}

/// `N^i_jk = 2 g^im (nabla_m J_j^l) omega_kl`, valid when `omega` is closed.
pub fn nijenhuis_ak_form(t: &AKTriple) -> Result<TensorField> {
    let grid = t.grid();
    let md = MetricDerivatives::new(&t.g)?;
    let dj = j_derivatives(&t.j);
    let mut out = TensorField::zeros(grid, vec![Slot::Contra, Slot::Co, Slot::Co]);
    for p in 0..grid.len() {
        let jm = t.j.mat(p);
        let w = t.omega.mat(p);
        let gi = md.ginv(p);
        let nab = nabla_j_at(&jm, &dj, &md.christoffel(p), p);
        for i in 0..4 {
            for jj in 0..4 {
                for k in 0..4 {
                    let mut v = 0.0;
                    for m in 0..4 {
                        for l in 0..4 {
                            v += gi[i][m] * nab[m][jj][l] * w[k][l];
                        }
                    }
                    out.components_mut()[nij_index(i, jj, k)][p] = 2.0 * v;
                }
            }
        }
    }
    Ok(out)
}

/// Pointwise `|N|_g` for a tensor with slots `(contra, co, co)`.
pub fn nijenhuis_pointwise_norm(n: &TensorField, g: &Metric) -> ScalarField {
    let grid = n.grid();
    ScalarField::from_index_fn(grid, |p| {
        let gm = g.mat(p);
        let gi = crate::algebra::inverse(&gm).unwrap_or(crate::algebra::IDENTITY);
        let c = |i, j, k| n.comp(nij_index(i, j, k))[p];
        let mut s = 0.0;
        for i in 0..4 {
            for a in 0..4 {
                if gm[i][a] == 0.0 {
                    continue;
                }
                for j in 0..4 {
                    for b in 0..4 {
                        for k in 0..4 {
                            for cc in 0..4 {
                                s += gm[i][a] * gi[j][b] * gi[k][cc] * c(i, j, k) * c(a, b, cc);
                            }
                        }
                    }
                }
            }
        }
        s.max(0.0).sqrt()
    })
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct NijenhuisNorms {
    pub l1: f64,
    pub lp: f64,
    pub c0: f64,
}

/// `L^1`, `L^p` and `C^0` norms of `N` with respect to `g` and `dvol_g`.
pub fn nijenhuis_norms(n: &TensorField, g: &Metric, p: f64) -> NijenhuisNorms {
    let pointwise = nijenhuis_pointwise_norm(n, g);
    let vol = g.volume_density();
    NijenhuisNorms {
        l1: super::forms::weighted_lp(&pointwise, &vol, 1.0),
        lp: super::forms::weighted_lp(&pointwise, &vol, p),
        c0: pointwise.max(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid4;

    #[test]
    fn constant_j_is_integrable() {
        let grid = Grid4::cubic(4).unwrap();
        let n = nijenhuis(&ACStructure::standard(&grid));
        assert!(n.max_abs() < 1e-14);
    }

    #[test]
    fn nijenhuis_is_antisymmetric_in_lower_indices() {
        let grid = Grid4::cubic(8).unwrap();
        let t = crate::scenario::perturbed_triple(&grid, 0.05, 3).unwrap();
        let n = nijenhuis(&t.j);
        for i in 0..4 {
            for j in 0..4 {
                for k in 0..4 {
                    let a = n.comp(nij_index(i, j, k));
                    let b = n.comp(nij_index(i, k, j));
                    assert!(a.iter().zip(b).all(|(x, y)| (x + y).abs() < 1e-12));
                }
            }
        }
    }
}
