//! Exterior calculus: `d`, the codifferential, Hodge star on two-forms,
//! wedge densities and self-dual projections.

use num_complex::Complex64;

use crate::algebra::{
    determinant, dot6, hodge_matrix, inverse, lambda2_metric, mat6_vec, perm_sign, wedge6, Mat4,
    Mat6, Vec6, PAIRS,
};
use crate::error::{Error, Result};
use crate::field::{spectral_partials, Metric, OneForm, ScalarField, Slot, TensorField, TwoForm};
use crate::grid::{Grid4, DIM};

use super::structure::ACStructure;

fn increasing_sets(k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..DIM {
            cur.push(i);
            rec(i + 1, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, k, &mut Vec::new(), &mut out);
    out
}

fn permutations(set: &[usize]) -> Vec<Vec<usize>> {
    if set.len() <= 1 {
        return vec![set.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..set.len() {
        let mut rest = set.to_vec();
        let first = rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, first);
            out.push(p);
        }
    }
    out
}

/// Full antisymmetric storage of a form given its increasing components.
fn fill_antisymmetric(grid: &Grid4, k: usize, unique: Vec<(Vec<usize>, Vec<f64>)>) -> TensorField {
    let mut t = TensorField::zeros(grid, vec![Slot::Co; k]);
    for (set, vals) in unique {
        for perm in permutations(&set) {
            let s = perm_sign(&perm);
            let c = TensorField::index_of(&perm);
            t.components_mut()[c] = vals.iter().map(|v| s * v).collect();
        }
    }
    t
}

/// `d` on a `k`-form in full antisymmetric storage (`k = 0` is a rank-0 tensor).
pub fn exterior_d(alpha: &TensorField) -> TensorField {
    let k = alpha.rank();
    let grid = alpha.grid();
    assert!(k < DIM, "d of a top-degree form vanishes");
    let sets = increasing_sets(k);
    let fields: Vec<&[f64]> = sets
        .iter()
        .map(|s| alpha.comp(TensorField::index_of(s)))
        .collect();
    let d = spectral_partials(grid, &fields, &[0, 1, 2, 3]);
    let out_sets = increasing_sets(k + 1);
    let unique = out_sets
        .into_iter()
        .map(|set| {
            let mut acc = vec![0.0; grid.len()];
            for m in 0..=k {
                let mut rest = set.clone();
                let axis = rest.remove(m);
                let src = sets.iter().position(|s| *s == rest).unwrap();
                let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                acc.iter_mut()
                    .zip(&d[src][axis])
                    .for_each(|(a, v)| *a += sign * v);
            }
            (set, acc)
        })
        .collect();
    fill_antisymmetric(grid, k + 1, unique)
}

/// `d` on one-forms, specialised for speed.
pub fn d1(b: &OneForm) -> TwoForm {
    let grid = b.grid();
    let sp = grid.spectral();
    let refs: Vec<&[f64]> = (0..4).map(|i| b.comp(i)).collect();
    let s = sp.forward_real(&refs);
    let pairs: Vec<Vec<Complex64>> = PAIRS
        .iter()
        .map(|&(i, j)| {
            (0..grid.len())
                .map(|p| {
                    let k = sp.wavevector(p);
                    Complex64::new(0.0, 1.0) * (s[j][p] * k[i] - s[i][p] * k[j])
                })
                .collect()
        })
        .collect();
    let mut back = sp.inverse_real(&pairs).into_iter();
    TwoForm::from_pair_arrays(grid, std::array::from_fn(|_| back.next().unwrap()))
}

/// `J d phi` with `(J alpha)_i = J_i^k alpha_k`.
pub fn j_d(phi: &ScalarField, j: &ACStructure) -> OneForm {
    let d = phi.gradient();
    OneForm::from_fn(phi.grid(), |p| j.apply_covector(p, d.vec4(p)))
}

/// Pointwise metric data reused by the metric-dependent operators.
pub struct MetricData {
    pub ginv: Vec<Mat4>,
    pub sqrt_det: Vec<f64>,
}

impl MetricData {
    pub fn new(g: &Metric) -> Result<Self> {
        let n = g.grid().len();
        let mut ginv = Vec::with_capacity(n);
        let mut sqrt_det = Vec::with_capacity(n);
        for p in 0..n {
            let m = g.mat(p);
            let det = determinant(&m);
            if !(det > 0.0) {
                return Err(Error::NotTaming { min_eig: det });
            }
            ginv.push(inverse(&m).ok_or_else(|| Error::Degenerate("metric".into()))?);
            sqrt_det.push(det.sqrt());
        }
        Ok(MetricData { ginv, sqrt_det })
    }
}

/// The Hodge star on two-forms for a fixed metric, cached pointwise.
pub struct HodgeStar {
    grid: Grid4,
    mats: Vec<Mat6>,
}

impl HodgeStar {
    pub fn new(g: &Metric) -> Result<Self> {
        let md = MetricData::new(g)?;
        Ok(Self::from_data(g.grid(), &md))
    }

    pub fn from_data(grid: &Grid4, md: &MetricData) -> Self {
        let mats = md
            .ginv
            .iter()
            .zip(&md.sqrt_det)
            .map(|(gi, s)| hodge_matrix(gi, *s))
            .collect();
        HodgeStar {
            grid: grid.clone(),
            mats,
        }
    }

    pub fn matrix(&self, p: usize) -> &Mat6 {
        &self.mats[p]
    }

    pub fn apply(&self, a: &TwoForm) -> TwoForm {
        TwoForm::from_pairs_fn(&self.grid, |p| mat6_vec(&self.mats[p], &a.pairs(p)))
    }

    /// `(1 + sign *)/2`.
    pub fn half_projection(&self, a: &TwoForm, sign: f64) -> TwoForm {
        TwoForm::from_pairs_fn(&self.grid, |p| {
            let v = a.pairs(p);
            let s = mat6_vec(&self.mats[p], &v);
            [0, 1, 2, 3, 4, 5].map(|k| 0.5 * (v[k] + sign * s[k]))
        })
    }

    pub fn self_dual(&self, a: &TwoForm) -> TwoForm {
        self.half_projection(a, 1.0)
    }

    pub fn anti_self_dual(&self, a: &TwoForm) -> TwoForm {
        self.half_projection(a, -1.0)
    }

    /// Rows `e_a^T (1 + sign *)/2` at point `p` for the given flat forms.
    pub fn projected_rows(&self, p: usize, basis: &[Vec6; 3], sign: f64) -> [Vec6; 3] {
        let h = &self.mats[p];
        basis.map(|e| {
            let mut r = [0.0; 6];
            for b in 0..6 {
                let mut s = 0.0;
                for a in 0..6 {
                    s += e[a] * h[a][b];
                }
                r[b] = 0.5 * (e[b] + sign * s);
            }
            r
        })
    }
}

/// Hodge star of a two-form.
pub fn hodge_star(g: &Metric, a: &TwoForm) -> Result<TwoForm> {
    Ok(HodgeStar::new(g)?.apply(a))
}

/// `alpha ^ beta` as a density relative to `vol_ref`.
pub fn wedge(a: &TwoForm, b: &TwoForm) -> ScalarField {
    ScalarField::from_index_fn(a.grid(), |p| wedge6(&a.pairs(p), &b.pairs(p)))
}

/// Pointwise `<alpha, beta>_g` on two-forms.
pub fn inner2(g: &Metric, a: &TwoForm, b: &TwoForm) -> Result<ScalarField> {
    let md = MetricData::new(g)?;
    Ok(ScalarField::from_index_fn(a.grid(), |p| {
        dot6(&a.pairs(p), &mat6_vec(&lambda2_metric(&md.ginv[p]), &b.pairs(p)))
    }))
}

/// `int <alpha, beta>_g dvol_g`.
pub fn l2_inner2(g: &Metric, a: &TwoForm, b: &TwoForm) -> Result<f64> {
    let md = MetricData::new(g)?;
    Ok(l2_inner2_with(&md, a, b))
}

pub fn l2_inner2_with(md: &MetricData, a: &TwoForm, b: &TwoForm) -> f64 {
    let grid = a.grid();
    let mut s = 0.0;
    for p in 0..grid.len() {
        let v = dot6(&a.pairs(p), &mat6_vec(&lambda2_metric(&md.ginv[p]), &b.pairs(p)));
        s += v * md.sqrt_det[p];
    }
    s * grid.cell_volume()
}

/// Raises every index of a covariant tensor with `g^{-1}`.
fn raise_all(t: &TensorField, md: &MetricData) -> Vec<Vec<f64>> {
    let k = t.rank();
    let n = t.grid().len();
    let ncomp = DIM.pow(k as u32);
    let mut out = vec![vec![0.0; n]; ncomp];
    let mut idx = vec![0usize; k];
    let mut src = vec![0usize; k];
    for c in 0..ncomp {
        decode(c, &mut idx);
        for p in 0..n {
            let gi = &md.ginv[p];
            let mut acc = 0.0;
            for s in 0..ncomp {
                decode(s, &mut src);
                let mut w = 1.0;
                for m in 0..k {
                    w *= gi[idx[m]][src[m]];
                    if w == 0.0 {
                        break;
                    }
                }
                if w != 0.0 {
                    acc += w * t.comp(s)[p];
                }
            }
            out[c][p] = acc;
        }
    }
    out
}

fn decode(mut c: usize, idx: &mut [usize]) {
    for m in (0..idx.len()).rev() {
        idx[m] = c % DIM;
        c /= DIM;
    }
}

/// Codifferential `d* = -div` on a `k`-form (`k >= 1`):
/// `(d* a)_{I} = -g_{IJ} (1/sqrt G) d_j (sqrt G a^{j J})`.
pub fn codifferential(g: &Metric, alpha: &TensorField) -> Result<TensorField> {
    let k = alpha.rank();
    if k == 0 {
        return Err(Error::ShapeMismatch("codifferential of a function".into()));
    }
    let grid = alpha.grid();
    let md = MetricData::new(g)?;
    let n = grid.len();
    let mut up = raise_all(alpha, &md);
    for c in up.iter_mut() {
        c.iter_mut().zip(&md.sqrt_det).for_each(|(v, s)| *v *= s);
    }
    let rest_count = DIM.pow(k as u32 - 1);
    let sp = grid.spectral();
    let refs: Vec<&[f64]> = up.iter().map(|c| c.as_slice()).collect();
    let spec = sp.forward_real(&refs);
    let div: Vec<Vec<Complex64>> = (0..rest_count)
        .map(|r| {
            (0..n)
                .map(|p| {
                    let kv = sp.wavevector(p);
                    (0..DIM)
                        .map(|j| spec[j * rest_count + r][p] * Complex64::new(0.0, kv[j]))
                        .sum()
                })
                .collect()
        })
        .collect();
    let div = sp.inverse_real(&div);
    // lower the remaining indices and scale by -1/sqrt G
    let mut out = TensorField::zeros(grid, vec![Slot::Co; k - 1]);
    let mut idx = vec![0usize; k - 1];
    let mut src = vec![0usize; k - 1];
    for c in 0..rest_count {
        decode(c, &mut idx);
        let comp: Vec<f64> = (0..n)
            .map(|p| {
                let gm = g.mat(p);
                let mut acc = 0.0;
                for s in 0..rest_count {
                    decode(s, &mut src);
                    let w: f64 = (0..k - 1).map(|m| gm[idx[m]][src[m]]).product();
                    acc += w * div[s][p];
                }
                -acc / md.sqrt_det[p]
            })
            .collect();
        out.components_mut()[c] = comp;
    }
    Ok(out)
}

/// `d*_g b` for a one-form, as a scalar field.
pub fn codifferential1(g: &Metric, b: &OneForm) -> Result<ScalarField> {
    let t = codifferential(g, b.tensor())?;
    ScalarField::new(b.grid(), t.into_components().pop().unwrap())
}

/// `d+ b = (1 + *) d b / 2`.
pub fn d_plus(g: &Metric, b: &OneForm) -> Result<TwoForm> {
    Ok(HodgeStar::new(g)?.self_dual(&d1(b)))
}

/// Density of `omega^2` relative to `vol_ref`.
pub fn square_density(omega: &TwoForm) -> ScalarField {
    wedge(omega, omega)
}

/// Pointwise `L^p` style norm helper: `(int |f|^p w dx)^(1/p)`.
pub fn weighted_lp(f: &ScalarField, density: &ScalarField, p: f64) -> f64 {
    let s: f64 = f
        .values()
        .iter()
        .zip(density.values())
        .map(|(v, w)| v.abs().powf(p) * w)
        .sum();
    (s * f.grid().cell_volume()).powf(1.0 / p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn trig(g: &Grid4, seed: usize) -> ScalarField {
        ScalarField::from_fn(g, move |x| {
            let s = seed as f64;
            (2.0 * PI * (x[0] + s * x[1])).sin() * (2.0 * PI * x[2]).cos()
                + 0.3 * (2.0 * PI * (x[3] - x[1] + 0.1 * s)).cos()
        })
    }

    #[test]
    fn d_squared_vanishes() {
        let g = Grid4::cubic(8).unwrap();
        let f = trig(&g, 1);
        let mut t0 = TensorField::zeros(&g, vec![]);
        t0.components_mut()[0] = f.values().to_vec();
        let df = exterior_d(&t0);
        assert!(exterior_d(&exterior_d(&df)).max_abs() < 1e-10);
        assert!(exterior_d(&df).max_abs() < 1e-10);
        let b = OneForm::from_fn(&g, |p| {
            let x = g.coords(p);
            [(2.0 * PI * x[1]).sin(), 0.0, (2.0 * PI * x[3]).cos(), (2.0 * PI * x[0]).sin()]
        });
        assert!(d1(&b).tensor().max_abs_diff(&exterior_d(b.tensor())) < 1e-12);
    }

    #[test]
    fn flat_codifferential_of_gradient_is_minus_laplacian() {
        let g = Grid4::cubic(8).unwrap();
        let f = trig(&g, 2);
        let lap = crate::field::flat_laplacian(&f);
        let dd = codifferential1(&Metric::flat(&g), &f.gradient()).unwrap();
        assert!(dd.zip_map(&lap, |a, b| a + b).max_abs() < 1e-9);
    }
}
