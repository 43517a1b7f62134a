//! Fixed data of one Calabi-Yau problem and the map `Phi` whose zeros are
//! the solutions at a given `t`.

use crate::algebra::{dot6, Vec6};
use crate::error::{Error, Result};
use crate::field::{integrate, integrate_density, OneForm, ScalarField, TwoForm};
use crate::geometry::forms::{d1, square_density, wedge};
use crate::geometry::harmonic::{class_directions, harmonic_self_dual_basis};
use crate::geometry::structure::{AKTriple, Projectors};
use crate::geometry::system::anti_invariant_rows;

/// `F + c` with `int e^(F + c) omega^2 = int omega^2`.
pub fn normalize_f(f_raw: &ScalarField, omega: &TwoForm) -> Result<ScalarField> {
    if !f_raw.is_finite() {
        return Err(Error::NonFinite("forcing F".into()));
    }
    let c = log_volume_shift(f_raw, &square_density(omega))?;
    Ok(f_raw.map(|v| v + c))
}

/// `log(int D) - log(int e^f D)`, evaluated with the maximum of `f` factored out.
pub fn log_volume_shift(f: &ScalarField, density: &ScalarField) -> Result<f64> {
    let m = f.max();
    let total = integrate(&ScalarField::constant(f.grid(), 1.0), density)?;
    let shifted = integrate(&f.map(|v| (v - m).exp()), density)?;
    Ok(total.ln() - shifted.ln() - m)
}

/// The triple, normalised forcing and the harmonic data of `omega` that stay
/// fixed along the continuity path.
#[derive(Clone, Debug)]
pub struct Problem {
    pub triple: AKTriple,
    pub f: ScalarField,
    /// Harmonic self-dual forms orthogonal to `omega`, orthonormal in `L^2(g)`.
    pub chi: [TwoForm; 2],
    pub omega_sq: ScalarField,
    /// `int omega^2`.
    pub volume: f64,
    pub(crate) p_rows: Vec<[Vec6; 2]>,
}

impl Problem {
    /// `f` must already be normalised, see [`normalize_f`].
    pub fn new(triple: AKTriple, f: ScalarField) -> Result<Self> {
        if f.grid() != triple.grid() {
            return Err(Error::ShapeMismatch("forcing and triple live on different grids".into()));
        }
        let basis = harmonic_self_dual_basis(&triple.g)?;
        let (_, chi) = class_directions(&triple.g, &triple.omega, &basis)?;
        let omega_sq = square_density(&triple.omega);
        let volume = integrate_density(&omega_sq);
        let p_rows = (0..triple.grid().len()).map(|p| anti_invariant_rows(&triple.j.mat(p))).collect();
        Ok(Problem {
            triple,
            f,
            chi,
            omega_sq,
            volume,
            p_rows,
        })
    }

    /// `c_t = log(int omega^2 / int e^(tF) omega^2)`.
    pub fn c_t(&self, t: f64) -> f64 {
        log_volume_shift(&self.f.map(|v| t * v), &self.omega_sq).expect("omega^2 is positive")
    }

    /// `tF + c_t`, the logarithm of the target volume ratio.
    pub fn target_log(&self, t: f64) -> ScalarField {
        let c = self.c_t(t);
        self.f.map(|v| t * v + c)
    }

    /// Class coordinates `(s_0, s_1, s_2)` with
    /// `[omega'] = (1 + s_0)[omega] + s_1 [chi_1] + s_2 [chi_2]`.
    pub fn class_coordinates(&self, omega_prime: &TwoForm) -> [f64; 3] {
        let s0 = integrate_density(&wedge(omega_prime, &self.triple.omega)) / self.volume - 1.0;
        let s1 = integrate_density(&wedge(omega_prime, &self.chi[0]));
        let s2 = integrate_density(&wedge(omega_prime, &self.chi[1]));
        [s0, s1, s2]
    }

    /// `s_0 omega + s_1 chi_1 + s_2 chi_2`.
    pub fn class_term(&self, s: &[f64; 3]) -> TwoForm {
        self.triple
            .omega
            .scaled(s[0])
            .lin_comb(1.0, &self.chi[0], s[1])
            .lin_comb(1.0, &self.chi[1], s[2])
    }

    /// Pointwise `e_a^T P omega'` for the two anti-invariant rows.
    pub(crate) fn p_residual(&self, omega_prime: &TwoForm) -> [Vec<f64>; 2] {
        let n = self.triple.grid().len();
        let mut out = [vec![0.0; n], vec![0.0; n]];
        for p in 0..n {
            let v = omega_prime.pairs(p);
            out[0][p] = dot6(&self.p_rows[p][0], &v);
            out[1][p] = dot6(&self.p_rows[p][1], &v);
        }
        out
    }
}

/// The solution `omega~ = omega'_{t_0}` that the next step linearises around.
#[derive(Clone, Debug)]
pub struct Anchor {
    pub omega: TwoForm,
    pub t0: f64,
    pub density: ScalarField,
    /// `int omega~^2`.
    pub volume: f64,
}

impl Anchor {
    pub fn new(omega: TwoForm, t0: f64) -> Result<Self> {
        let density = square_density(&omega);
        if let Some((index, &min)) = density.values().iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
            return Err(Error::NonPositiveDensity { min, index });
        }
        let volume = integrate_density(&density);
        Ok(Anchor {
            omega,
            t0,
            density,
            volume,
        })
    }
}

/// The volume part of `Phi` at a candidate `omega'`.
#[derive(Clone, Debug)]
pub(crate) struct VolumePart {
    /// `log(omega'^2 / omega~^2) - (t - t_0) F - c_hat`.
    pub f: Vec<f64>,
    pub c_hat: f64,
    pub density: Vec<f64>,
    /// `e^(-(t - t_0) F) omega'^2`, normalised to sum 1.
    pub weights: Vec<f64>,
}

pub(crate) fn volume_part(problem: &Problem, anchor: &Anchor, omega_prime: &TwoForm, t: f64) -> Result<VolumePart> {
    let dens = square_density(omega_prime).into_values();
    let anchor_d = anchor.density.values();
    if let Some((p, d)) = dens.iter().enumerate().find(|(_, d)| !(**d > 0.0)) {
        return Err(Error::LostPositivity {
            min_ratio: d / anchor_d[p],
        });
    }
    let dt = t - anchor.t0;
    let fv = problem.f.values();
    // weights relative to their maximum keep the exponentials in range
    let expo: Vec<f64> = fv.iter().map(|v| -dt * v).collect();
    let m = expo.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut weights: Vec<f64> = expo.iter().zip(&dens).map(|(e, d)| (e - m).exp() * d).collect();
    let sum: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= sum);
    let cell = problem.triple.grid().cell_volume();
    let c_hat = (sum * cell).ln() + m - anchor.volume.ln();
    let f = (0..dens.len())
        .map(|p| (dens[p] / anchor_d[p]).ln() - dt * fv[p] - c_hat)
        .collect();
    Ok(VolumePart {
        f,
        c_hat,
        density: dens,
        weights,
    })
}

/// `omega~ + s_1 chi_1 + s_2 chi_2 + db`.
pub fn candidate(problem: &Problem, anchor: &Anchor, b: &OneForm, s: &[f64; 2]) -> TwoForm {
    anchor
        .omega
        .plus(&d1(b))
        .lin_comb(1.0, &problem.chi[0], s[0])
        .lin_comb(1.0, &problem.chi[1], s[1])
}

/// Value of `Phi` together with the quantities it is built from.
#[derive(Clone, Debug)]
pub struct PhiValue {
    /// `(log(omega'^2/omega~^2) - (t - t_0) F - c_hat) omega~/2 + P(s.chi + db)`.
    pub form: TwoForm,
    pub c_hat: f64,
    pub omega_prime: TwoForm,
}

/// `Phi(b, s, t)` around `anchor`; `c_hat` is normalised so that `Phi` vanishes
/// at `(0, 0, t_0)`.
pub fn phi_map(b: &OneForm, s: &[f64; 2], t: f64, anchor: &Anchor, problem: &Problem) -> Result<PhiValue> {
    let omega_prime = candidate(problem, anchor, b, s);
    let vp = volume_part(problem, anchor, &omega_prime, t)?;
    let proj = Projectors::new(&problem.triple.j).p_form(&omega_prime.minus(&anchor.omega));
    let form = TwoForm::from_pairs_fn(problem.triple.grid(), |p| {
        let w = anchor.omega.pairs(p);
        let q = proj.pairs(p);
        [0, 1, 2, 3, 4, 5].map(|k| 0.5 * vp.f[p] * w[k] + q[k])
    });
    Ok(PhiValue {
        form,
        c_hat: vp.c_hat,
        omega_prime,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{forcing, FTerm, TrigKind};
    use crate::Grid4;

    fn sample_f(grid: &Grid4) -> ScalarField {
        forcing(
            grid,
            &[FTerm {
                k: [1, 1, 0, 0],
                amplitude: 0.1,
                kind: TrigKind::Sin,
            }],
        )
        .unwrap()
    }

    #[test]
    fn normalization_round_trip() {
        let grid = Grid4::cubic(8).unwrap();
        let t = AKTriple::standard(&grid);
        let f = normalize_f(&sample_f(&grid).map(|v| v + 3.0), &t.omega).unwrap();
        let d = square_density(&t.omega);
        let lhs = integrate(&f.map(f64::exp), &d).unwrap();
        let rhs = integrate(&ScalarField::constant(&grid, 1.0), &d).unwrap();
        assert!((lhs / rhs - 1.0).abs() < 1e-12);
        let zero = normalize_f(&ScalarField::constant(&grid, 7.5), &t.omega).unwrap();
        assert!(zero.max_abs() < 1e-14);
    }

    #[test]
    fn phi_vanishes_at_the_anchor() {
        let grid = Grid4::cubic(4).unwrap();
        let t = AKTriple::standard(&grid);
        let f = normalize_f(&sample_f(&grid), &t.omega).unwrap();
        let problem = Problem::new(t.clone(), f).unwrap();
        let anchor = Anchor::new(t.omega.clone(), 0.0).unwrap();
        let v = phi_map(&OneForm::zeros(&grid), &[0.0, 0.0], 0.0, &anchor, &problem).unwrap();
        assert_eq!(v.form.max_abs(), 0.0);
        assert_eq!(v.c_hat, 0.0);
    }

    #[test]
    fn class_coordinates_of_omega_vanish() {
        let grid = Grid4::cubic(4).unwrap();
        let t = AKTriple::standard(&grid);
        let problem = Problem::new(t.clone(), ScalarField::zeros(&grid)).unwrap();
        let s = problem.class_coordinates(&t.omega.plus(&problem.chi[1].scaled(0.3)));
        assert!(s[0].abs() < 1e-14 && s[1].abs() < 1e-14 && (s[2] - 0.3).abs() < 1e-14, "{s:?}");
    }
}
