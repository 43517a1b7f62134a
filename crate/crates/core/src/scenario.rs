//! Test geometries: the flat Kähler torus and seeded non-integrable
//! perturbations of it, plus band-limited forcing functions `F`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::{Mat4, IDENTITY};
use crate::error::{Error, Result};
use crate::field::{Metric, ScalarField};
use crate::geometry::structure::{compatible_j_from_metric, standard_omega, AKTriple};
use crate::grid::Grid4;

/// Amplitude normalisation of the perturbation field; chosen so that
/// `sup |N(J)|` is of the same order as `epsilon` for the default modes.
pub const PERTURBATION_SCALE: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrigKind {
    Sin,
    Cos,
}

/// `amplitude * prod_{k_j != 0} trig(2 pi k_j x^j / L_j)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FTerm {
    pub k: [i32; 4],
    pub amplitude: f64,
    pub kind: TrigKind,
}

pub fn forcing(grid: &Grid4, terms: &[FTerm]) -> Result<ScalarField> {
    let n = grid.n();
    let l = grid.periods();
    for t in terms {
        for a in 0..4 {
            if 2 * t.k[a].unsigned_abs() as usize >= n[a] {
                return Err(Error::ScenarioInvalid(format!(
                    "forcing mode {:?} is not resolved on a grid with {} points along axis {a}",
                    t.k, n[a]
                )));
            }
        }
        if !t.amplitude.is_finite() {
            return Err(Error::ScenarioInvalid("non-finite forcing amplitude".into()));
        }
    }
    Ok(ScalarField::from_fn(grid, |x| {
        terms
            .iter()
            .map(|t| {
                let mut v = t.amplitude;
                for a in 0..4 {
                    if t.k[a] != 0 {
                        let arg = 2.0 * PI * t.k[a] as f64 * x[a] / l[a];
                        v *= match t.kind {
                            TrigKind::Sin => arg.sin(),
                            TrigKind::Cos => arg.cos(),
                        };
                    }
                }
                v
            })
            .sum()
    }))
}

/// Seeded symmetric field `S` with `|S| <= 1` built from modes with `|k_j| <= max_mode`.
pub fn perturbation_field(grid: &Grid4, seed: u64, max_mode: i32) -> Result<Vec<Mat4>> {
    let n = grid.n();
    if (0..4).any(|a| 2 * max_mode as usize >= n[a]) {
        return Err(Error::ScenarioInvalid(format!(
            "perturbation modes up to {max_mode} need more grid points"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut modes: Vec<([i32; 4], Mat4, Mat4)> = Vec::new();
    let r = max_mode;
    for a in -r..=r {
        for b in -r..=r {
            for c in -r..=r {
                for d in -r..=r {
                    let k = [a, b, c, d];
                    // one representative per +-k pair
                    if k.iter().find(|&&v| v != 0).map_or(true, |&v| v < 0) {
                        continue;
                    }
                    let mut coef = [[[0.0; 4]; 4]; 2];
                    for m in coef.iter_mut() {
                        for i in 0..4 {
                            for j in i..4 {
                                let v: f64 = rng.gen_range(-1.0..1.0);
                                m[i][j] = v;
                                m[j][i] = v;
                            }
                        }
                    }
                    modes.push((k, coef[0], coef[1]));
                }
            }
        }
    }
    let bound: f64 = modes
        .iter()
        .map(|(_, a, b)| frob(a) + frob(b))
        .sum::<f64>()
        .max(1e-300);
    // synthesise each component from its spectrum; the mode coefficient
    // (A - iB) N / 2 at k and its conjugate at -k give A cos + B sin
    let sp = grid.spectral();
    let strides = grid.strides();
    let total = grid.len() as f64;
    let pairs: Vec<(usize, usize)> = (0..4).flat_map(|i| (i..4).map(move |j| (i, j))).collect();
    let mut spectra = vec![vec![Complex64::default(); grid.len()]; pairs.len()];
    for (k, a, b) in &modes {
        let p: usize = (0..4)
            .map(|i| (k[i].rem_euclid(n[i] as i32) as usize) * strides[i])
            .sum();
        let q = sp.negated(p);
        for (c, &(i, j)) in pairs.iter().enumerate() {
            let z = Complex64::new(a[i][j], -b[i][j]) * (0.5 * total / bound);
            spectra[c][p] += z;
            spectra[c][q] += z.conj();
        }
    }
    let comps = sp.inverse_real(&spectra);
    Ok((0..grid.len())
        .map(|p| {
            let mut s = [[0.0; 4]; 4];
            for (c, &(i, j)) in pairs.iter().enumerate() {
                s[i][j] = comps[c][p];
                s[j][i] = comps[c][p];
            }
            s
        })
        .collect())
}

fn frob(a: &Mat4) -> f64 {
    a.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
}

/// `(omega_0, J, g)` with `J` the polar part of `omega_0` against
/// `h = delta + epsilon * PERTURBATION_SCALE * S`.
pub fn perturbed_triple_with_modes(
    grid: &Grid4,
    epsilon: f64,
    seed: u64,
    max_mode: i32,
) -> Result<AKTriple> {
    if !(epsilon.is_finite() && epsilon >= 0.0) {
        return Err(Error::ScenarioInvalid(format!("epsilon {epsilon} must be >= 0")));
    }
    if epsilon == 0.0 {
        return Ok(AKTriple::standard(grid));
    }
    let s = perturbation_field(grid, seed, max_mode)?;
    let amp = epsilon * PERTURBATION_SCALE;
    let h = Metric::from_mat_fn(grid, |p| {
        let mut m = IDENTITY;
        for i in 0..4 {
            for j in 0..4 {
                m[i][j] += amp * s[p][i][j];
            }
        }
        m
    });
    let omega = standard_omega(grid);
    let j = compatible_j_from_metric(&omega, &h).map_err(|e| {
        Error::ScenarioInvalid(format!("perturbation with epsilon {epsilon} is too large: {e}"))
    })?;
    let t = AKTriple::new(omega, j).map_err(|e| Error::ScenarioInvalid(e.to_string()))?;
    Ok(t)
}

/// Perturbed triple with modes `|k_j| <= 1`.
pub fn perturbed_triple(grid: &Grid4, epsilon: f64, seed: u64) -> Result<AKTriple> {
    perturbed_triple_with_modes(grid, epsilon, seed, 1)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ScenarioKind {
    Kahler,
    Perturbed { epsilon: f64 },
}

/// A geometry together with the raw (unnormalised) forcing.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub triple: AKTriple,
    pub f_raw: ScalarField,
}

pub fn build_scenario(grid: &Grid4, kind: ScenarioKind, seed: u64, f: &[FTerm]) -> Result<Scenario> {
    let triple = match kind {
        ScenarioKind::Kahler => AKTriple::standard(grid),
        ScenarioKind::Perturbed { epsilon } => perturbed_triple(grid, epsilon, seed)?,
    };
    Ok(Scenario {
        kind,
        triple,
        f_raw: forcing(grid, f)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::nijenhuis::{nijenhuis, nijenhuis_norms};
    use crate::geometry::structure::check_compatibility;

    #[test]
    fn zero_epsilon_is_flat() {
        let g = Grid4::cubic(4).unwrap();
        let t = perturbed_triple(&g, 0.0, 1).unwrap();
        let s = AKTriple::standard(&g);
        assert_eq!(t.j, s.j);
        assert_eq!(t.g, s.g);
    }

    #[test]
    fn perturbed_triple_satisfies_invariants() {
        let g = Grid4::cubic(8).unwrap();
        let t = perturbed_triple(&g, 1e-2, 11).unwrap();
        assert!(check_compatibility(&t.omega, &t.j).passes());
    }

    #[test]
    fn nijenhuis_scales_with_epsilon() {
        let g = Grid4::cubic(8).unwrap();
        let eps = 1e-2;
        let t = perturbed_triple(&g, eps, 5).unwrap();
        let c0 = nijenhuis_norms(&nijenhuis(&t.j), &t.g, 4.0).c0;
        assert!(c0 > eps / 10.0 && c0 < 10.0 * eps, "sup |N| = {c0}");
    }

    #[test]
    fn perturbation_matches_direct_sum() {
        let g = Grid4::new([4, 6, 4, 8], [1.0, 2.0, 1.0, 0.5]).unwrap();
        let s = perturbation_field(&g, 3, 1).unwrap();
        // direct trigonometric evaluation with the same random stream
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut modes = Vec::new();
        for a in -1..=1i32 {
            for b in -1..=1i32 {
                for c in -1..=1i32 {
                    for d in -1..=1i32 {
                        let k = [a, b, c, d];
                        if k.iter().find(|&&v| v != 0).map_or(true, |&v| v < 0) {
                            continue;
                        }
                        let mut m = [[[0.0; 4]; 4]; 2];
                        for x in m.iter_mut() {
                            for i in 0..4 {
                                for j in i..4 {
                                    let v: f64 = rng.gen_range(-1.0..1.0);
                                    x[i][j] = v;
                                    x[j][i] = v;
                                }
                            }
                        }
                        modes.push((k, m));
                    }
                }
            }
        }
        let bound: f64 = modes.iter().map(|(_, m)| frob(&m[0]) + frob(&m[1])).sum();
        let l = g.periods();
        let mut worst: f64 = 0.0;
        for p in 0..g.len() {
            let x = g.coords(p);
            for i in 0..4 {
                for j in 0..4 {
                    let v: f64 = modes
                        .iter()
                        .map(|(k, m)| {
                            let arg: f64 = (0..4).map(|a| 2.0 * PI * k[a] as f64 * x[a] / l[a]).sum();
                            (m[0][i][j] * arg.cos() + m[1][i][j] * arg.sin()) / bound
                        })
                        .sum();
                    worst = worst.max((v - s[p][i][j]).abs());
                }
            }
        }
        assert!(worst < 1e-14, "{worst}");
    }

    #[test]
    fn forcing_rejects_unresolved_modes() {
        let g = Grid4::cubic(4).unwrap();
        let t = FTerm {
            k: [2, 0, 0, 0],
            amplitude: 1.0,
            kind: TrigKind::Sin,
        };
        assert!(forcing(&g, &[t]).is_err());
    }
}
