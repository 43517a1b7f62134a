//! Levi-Civita connection data computed from spectral derivatives of `g`.

use crate::algebra::{inverse, Mat4};
use crate::error::{Error, Result};
use crate::field::{spectral_partials, Metric, OneForm, TensorField};
use crate::grid::Grid4;

use super::structure::ACStructure;

pub type Christoffel = [[[f64; 4]; 4]; 4];
/// `t[m][j][l] = nabla_m J_j^l`.
pub type Rank3 = [[[f64; 4]; 4]; 4];

const SYM: [(usize, usize); 10] = [
    (0, 0),
    (0, 1),
    (0, 2),
    (0, 3),
    (1, 1),
    (1, 2),
    (1, 3),
    (2, 2),
    (2, 3),
    (3, 3),
];

fn sym_index(i: usize, j: usize) -> usize {
    let (a, b) = if i <= j { (i, j) } else { (j, i) };
    SYM.iter().position(|&(x, y)| x == a && y == b).unwrap()
}

/// Spectral first derivatives of the ten independent metric components.
pub struct MetricDerivatives {
    grid: Grid4,
    g: Vec<Mat4>,
    ginv: Vec<Mat4>,
    /// `dg[s][a]` is `d_a g_{SYM[s]}`.
    dg: Vec<Vec<Vec<f64>>>,
}

impl MetricDerivatives {
    pub fn new(g: &Metric) -> Result<Self> {
        let grid = g.grid().clone();
        let fields: Vec<&[f64]> = SYM.iter().map(|&(i, j)| g.comp(4 * i + j)).collect();
        let dg = spectral_partials(&grid, &fields, &[0, 1, 2, 3]);
        let mut gm = Vec::with_capacity(grid.len());
        let mut ginv = Vec::with_capacity(grid.len());
        for p in 0..grid.len() {
            let m = g.mat(p);
            ginv.push(inverse(&m).ok_or_else(|| Error::Degenerate("metric".into()))?);
            gm.push(m);
        }
        Ok(MetricDerivatives {
            grid,
            g: gm,
            ginv,
            dg,
        })
    }

    pub fn grid(&self) -> &Grid4 {
        &self.grid
    }

    pub fn g(&self, p: usize) -> &Mat4 {
        &self.g[p]
    }

    pub fn ginv(&self, p: usize) -> &Mat4 {
        &self.ginv[p]
    }

    /// `d_a g_ij` at point `p`, as `[a][i][j]`.
    pub fn dg_at(&self, p: usize) -> [[[f64; 4]; 4]; 4] {
        let mut out = [[[0.0; 4]; 4]; 4];
        for a in 0..4 {
            for i in 0..4 {
                for j in 0..4 {
                    out[a][i][j] = self.dg[sym_index(i, j)][a][p];
                }
            }
        }
        out
    }

    /// `Gamma^k_ij = g^kl (d_i g_jl + d_j g_il - d_l g_ij) / 2`, as `[k][i][j]`.
    pub fn christoffel(&self, p: usize) -> Christoffel {
        let dg = self.dg_at(p);
        let gi = &self.ginv[p];
        let mut lower = [[[0.0; 4]; 4]; 4];
        for l in 0..4 {
            for i in 0..4 {
                for j in 0..4 {
                    lower[l][i][j] = 0.5 * (dg[i][j][l] + dg[j][i][l] - dg[l][i][j]);
                }
            }
        }
        let mut gam = [[[0.0; 4]; 4]; 4];
        for k in 0..4 {
            for i in 0..4 {
                for j in 0..4 {
                    gam[k][i][j] = (0..4).map(|l| gi[k][l] * lower[l][i][j]).sum();
                }
            }
        }
        gam
    }
}

/// Spectral derivatives of every component of `J`: `dj[c][a] = d_a J_{c}`.
pub fn j_derivatives(j: &ACStructure) -> Vec<Vec<Vec<f64>>> {
    let refs: Vec<&[f64]> = j.tensor().components().iter().map(|c| c.as_slice()).collect();
    spectral_partials(j.grid(), &refs, &[0, 1, 2, 3])
}

/// `nabla_m J_j^l = d_m J_j^l - Gamma^p_mj J_p^l + Gamma^l_mp J_j^p` at one point.
pub fn nabla_j_at(jm: &Mat4, dj: &[Vec<Vec<f64>>], gam: &Christoffel, p: usize) -> Rank3 {
    let mut t = [[[0.0; 4]; 4]; 4];
    for m in 0..4 {
        for j in 0..4 {
            for l in 0..4 {
                let mut v = dj[4 * j + l][m][p];
                for q in 0..4 {
                    v -= gam[q][m][j] * jm[q][l];
                    v += gam[l][m][q] * jm[j][q];
                }
                t[m][j][l] = v;
            }
        }
    }
    t
}

/// Covariant derivative `nabla_m J_j^l` as a rank-3 tensor field with slots `(m, j, l)`.
pub fn covariant_derivative_j(g: &Metric, j: &ACStructure) -> Result<TensorField> {
    use crate::field::Slot;
    let md = MetricDerivatives::new(g)?;
    let dj = j_derivatives(j);
    let grid = g.grid();
    let mut out = TensorField::zeros(grid, vec![Slot::Co, Slot::Co, Slot::Contra]);
    for p in 0..grid.len() {
        let t = nabla_j_at(&j.mat(p), &dj, &md.christoffel(p), p);
        for m in 0..4 {
            for jj in 0..4 {
                for l in 0..4 {
                    out.components_mut()[16 * m + 4 * jj + l][p] = t[m][jj][l];
                }
            }
        }
    }
    Ok(out)
}

/// The contraction `nabla_i J_j^i`, which vanishes for almost-Kähler triples.
pub fn divergence_j(g: &Metric, j: &ACStructure) -> Result<OneForm> {
    let md = MetricDerivatives::new(g)?;
    let grid = g.grid();
    // only the contracted derivative d_i J_j^i is needed
    let fields: Vec<&[f64]> = (0..16).map(|c| j.tensor().comp(c)).collect();
    let sp = grid.spectral();
    let spec = sp.forward_real(&fields);
    let contracted: Vec<Vec<num_complex::Complex64>> = (0..4)
        .map(|jj| {
            (0..grid.len())
                .map(|p| {
                    let k = sp.wavevector(p);
                    (0..4)
                        .map(|i| spec[4 * jj + i][p] * num_complex::Complex64::new(0.0, k[i]))
                        .sum()
                })
                .collect()
        })
        .collect();
    let dcon = sp.inverse_real(&contracted);
    Ok(OneForm::from_fn(grid, |p| {
        let gam = md.christoffel(p);
        let jm = j.mat(p);
        let mut out = [0.0; 4];
        for jj in 0..4 {
            let mut v = dcon[jj][p];
            for i in 0..4 {
                for q in 0..4 {
                    v -= gam[q][i][jj] * jm[q][i];
                    v += gam[i][i][q] * jm[jj][q];
                }
            }
            out[jj] = v;
        }
        out
    }))
}

/// Pointwise supremum norms of curvature and of `nabla J`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct CurvatureNorms {
    pub riemann_c0: f64,
    pub scalar_curvature_c0: f64,
    pub grad_j_c0: f64,
}

/// `sup |Rm|_g`, `sup |R|` and `sup |nabla J|_g`; the Riemann tensor is built
/// from spectral derivatives of the Christoffel symbols.
pub fn riemann_norm(g: &Metric, j: Option<&ACStructure>) -> Result<CurvatureNorms> {
    let md = MetricDerivatives::new(g)?;
    let grid = g.grid();
    let n = grid.len();
    // unique Christoffel components Gamma^k_{(ij)}
    let mut gam_fields = vec![vec![0.0; n]; 40];
    for p in 0..n {
        let gam = md.christoffel(p);
        for k in 0..4 {
            for (s, &(i, jj)) in SYM.iter().enumerate() {
                gam_fields[10 * k + s][p] = gam[k][i][jj];
            }
        }
    }
    let refs: Vec<&[f64]> = gam_fields.iter().map(|c| c.as_slice()).collect();
    let dgam = spectral_partials(grid, &refs, &[0, 1, 2, 3]);
    let dj = j.map(j_derivatives);
    let mut rm_max: f64 = 0.0;
    let mut r_max: f64 = 0.0;
    let mut gj_max: f64 = 0.0;
    for p in 0..n {
        let gam = md.christoffel(p);
        let gi = md.ginv(p);
        let gm = md.g(p);
        let dg_of = |l: usize, i: usize, k: usize, a: usize| dgam[10 * l + sym_index(i, k)][a][p];
        // R^l_{ijk} = d_j Gamma^l_ik - d_k Gamma^l_ij + Gamma^l_jm Gamma^m_ik - Gamma^l_km Gamma^m_ij
        let mut r = [[[[0.0; 4]; 4]; 4]; 4];
        for l in 0..4 {
            for i in 0..4 {
                for jj in 0..4 {
                    for k in 0..4 {
                        let mut v = dg_of(l, i, k, jj) - dg_of(l, i, jj, k);
                        for m in 0..4 {
                            v += gam[l][jj][m] * gam[m][i][k] - gam[l][k][m] * gam[m][i][jj];
                        }
                        r[l][i][jj][k] = v;
                    }
                }
            }
        }
        // lower the first index, then contract with three inverse metrics
        let mut low = [[[[0.0; 4]; 4]; 4]; 4];
        for a in 0..4 {
            for i in 0..4 {
                for jj in 0..4 {
                    for k in 0..4 {
                        low[a][i][jj][k] = (0..4).map(|l| gm[a][l] * r[l][i][jj][k]).sum();
                    }
                }
            }
        }
        let up = raise4(&low, gi);
        let mut norm2 = 0.0;
        for a in 0..4 {
            for i in 0..4 {
                for jj in 0..4 {
                    for k in 0..4 {
                        norm2 += low[a][i][jj][k] * up[a][i][jj][k];
                    }
                }
            }
        }
        rm_max = rm_max.max(norm2.max(0.0).sqrt());
        // Ric_ik = R^l_{ilk}, R = g^ik Ric_ik
        let mut scal = 0.0;
        for i in 0..4 {
            for k in 0..4 {
                let ric: f64 = (0..4).map(|l| r[l][i][l][k]).sum();
                scal += gi[i][k] * ric;
            }
        }
        r_max = r_max.max(scal.abs());
        if let (Some(j), Some(dj)) = (j, dj.as_ref()) {
            let jm = j.mat(p);
            let t = nabla_j_at(&jm, dj, &gam, p);
            let mut s = 0.0;
            for m in 0..4 {
                for a in 0..4 {
                    for jj in 0..4 {
                        for c in 0..4 {
                            for l in 0..4 {
                                for b in 0..4 {
                                    s += gi[m][a] * gi[jj][c] * gm[l][b] * t[m][jj][l] * t[a][c][b];
                                }
                            }
                        }
                    }
                }
            }
            gj_max = gj_max.max(s.max(0.0).sqrt());
        }
    }
    Ok(CurvatureNorms {
        riemann_c0: rm_max,
        scalar_curvature_c0: r_max,
        grad_j_c0: gj_max,
    })
}

fn raise4(t: &[[[[f64; 4]; 4]; 4]; 4], gi: &Mat4) -> [[[[f64; 4]; 4]; 4]; 4] {
    let mut cur = *t;
    for slot in 0..4 {
        let mut next = [[[[0.0; 4]; 4]; 4]; 4];
        for a in 0..4 {
            for b in 0..4 {
                for c in 0..4 {
                    for d in 0..4 {
                        let mut v = 0.0;
                        for e in 0..4 {
                            let (src, w) = match slot {
                                0 => (cur[e][b][c][d], gi[a][e]),
                                1 => (cur[a][e][c][d], gi[b][e]),
                                2 => (cur[a][b][e][d], gi[c][e]),
                                _ => (cur[a][b][c][e], gi[d][e]),
                            };
                            v += w * src;
                        }
                        next[a][b][c][d] = v;
                    }
                }
            }
        }
        cur = next;
    }
    cur
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::ScalarField;
    use std::f64::consts::PI;

    /// Closed forms for `g = e^{2u} delta` in four dimensions:
    /// `R = -6 e^{-2u} (Delta u + |du|^2)` and, the Weyl tensor vanishing,
    /// `|Rm|^2 = 2 |Ric|^2 - R^2 / 3` with
    /// `Ric = -2 (Hess u - du du) - (Delta u + 2 |du|^2) delta`.
    #[test]
    fn conformally_flat_curvature_matches_closed_form() {
        let grid = Grid4::cubic(16).unwrap();
        let amp = 0.1;
        let u = ScalarField::from_fn(&grid, |x| {
            amp * (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).cos()
        });
        let g = Metric::from_mat_fn(&grid, |p| {
            let e = (2.0 * u.values()[p]).exp();
            let mut m = [[0.0; 4]; 4];
            (0..4).for_each(|i| m[i][i] = e);
            m
        });
        let norms = riemann_norm(&g, None).unwrap();
        let mut rm_exact: f64 = 0.0;
        let mut r_exact: f64 = 0.0;
        for p in 0..grid.len() {
            let x = grid.coords(p);
            let (s0, c0) = (2.0 * PI * x[0]).sin_cos();
            let (s1, c1) = (2.0 * PI * x[1]).sin_cos();
            let w = 2.0 * PI;
            let du = [amp * w * c0 * c1, -amp * w * s0 * s1, 0.0, 0.0];
            let mut hess = [[0.0; 4]; 4];
            hess[0][0] = -amp * w * w * s0 * c1;
            hess[1][1] = -amp * w * w * s0 * c1;
            hess[0][1] = -amp * w * w * c0 * s1;
            hess[1][0] = hess[0][1];
            let lap = hess[0][0] + hess[1][1];
            let du2 = du[0] * du[0] + du[1] * du[1];
            let mut ric = [[0.0; 4]; 4];
            let mut ric2 = 0.0;
            for i in 0..4 {
                for k in 0..4 {
                    ric[i][k] = -2.0 * (hess[i][k] - du[i] * du[k])
                        - if i == k { lap + 2.0 * du2 } else { 0.0 };
                    ric2 += ric[i][k] * ric[i][k];
                }
            }
            let e2u = (2.0 * u.values()[p]).exp();
            let scal = -6.0 / e2u * (lap + du2);
            let ric_norm2 = ric2 / (e2u * e2u);
            rm_exact = rm_exact.max((2.0 * ric_norm2 - scal * scal / 3.0).sqrt());
            r_exact = r_exact.max(scal.abs());
        }
        assert!((norms.scalar_curvature_c0 - r_exact).abs() < 1e-8 * r_exact, "{norms:?} {r_exact}");
        assert!((norms.riemann_c0 - rm_exact).abs() < 1e-8 * rm_exact, "{norms:?} {rm_exact}");
    }

    #[test]
    fn flat_structure_is_parallel() {
        let grid = Grid4::cubic(4).unwrap();
        let j = ACStructure::standard(&grid);
        let g = Metric::flat(&grid);
        assert!(divergence_j(&g, &j).unwrap().max_abs() < 1e-14);
        let n = riemann_norm(&g, Some(&j)).unwrap();
        assert!(n.riemann_c0 < 1e-14 && n.grad_j_c0 < 1e-14);
    }
}
