//! Almost-complex structures, compatible pairs and the `(P, Q)` projectors.

use crate::algebra::{
    self, from_pairs, inverse, matmul, max_abs_diff, sym_eigenvalues, sym_function, to_pairs,
    transpose, Mat4, IDENTITY,
};
use crate::error::{Error, Result};
use crate::field::{Metric, Slot, TensorField, TwoForm};
use crate::grid::Grid4;

use super::forms::exterior_d;

/// Tolerance on `J^2 + Id` accepted by [`ACStructure::new`].
pub const J_SQUARED_TOL: f64 = 1e-10;

/// An almost-complex structure, stored `J[i][j] = J_i^j` so that
/// `(J X)^j = J_i^j X^i`.
#[derive(Clone, Debug, PartialEq)]
pub struct ACStructure(TensorField);

impl ACStructure {
    pub fn new(t: TensorField) -> Result<Self> {
        if t.slots() != [Slot::Co, Slot::Contra] {
            return Err(Error::ShapeMismatch("J needs slots (co, contra)".into()));
        }
        let s = ACStructure(t);
        let residual = s.squared_residual();
        if !(residual < J_SQUARED_TOL) {
            return Err(Error::NotAlmostComplex { residual });
        }
        Ok(s)
    }

    /// Skips the `J^2 = -Id` check; used to inject faults in self-checks.
    pub fn new_unchecked(t: TensorField) -> Self {
        ACStructure(t)
    }

    /// The standard structure `J_0^2 = J_1^3 = 1 = -J_2^0 = -J_3^1`.
    pub fn standard(grid: &Grid4) -> Self {
        ACStructure(TensorField::from_mat_fn(grid, [Slot::Co, Slot::Contra], |_| STANDARD_J))
    }

    pub fn from_mat_fn(grid: &Grid4, f: impl Fn(usize) -> Mat4) -> Result<Self> {
        Self::new(TensorField::from_mat_fn(grid, [Slot::Co, Slot::Contra], f))
    }

    pub fn tensor(&self) -> &TensorField {
        &self.0
    }

    pub fn grid(&self) -> &Grid4 {
        self.0.grid()
    }

    pub fn mat(&self, p: usize) -> Mat4 {
        self.0.mat(p)
    }

    pub fn squared_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for p in 0..self.grid().len() {
            let j = self.mat(p);
            let jj = matmul(&j, &j);
            let mut neg = IDENTITY;
            neg.iter_mut().flatten().for_each(|v| *v = -*v);
            worst = worst.max(max_abs_diff(&jj, &neg));
        }
        worst
    }

    /// `(J alpha)_i = J_i^k alpha_k` pointwise.
    pub fn apply_covector(&self, p: usize, a: [f64; 4]) -> [f64; 4] {
        let j = self.mat(p);
        [0, 1, 2, 3].map(|i| (0..4).map(|k| j[i][k] * a[k]).sum())
    }
}

pub const STANDARD_J: Mat4 = [
    [0.0, 0.0, 1.0, 0.0],
    [0.0, 0.0, 0.0, 1.0],
    [-1.0, 0.0, 0.0, 0.0],
    [0.0, -1.0, 0.0, 0.0],
];

/// `omega_0 = dx0^dx2 + dx1^dx3`.
pub fn standard_omega(grid: &Grid4) -> TwoForm {
    TwoForm::constant(grid, algebra::SELF_DUAL_FLAT[1])
}

/// Compatible metric `g_ij = omega_ik J_j^k`, symmetrised after checking.
pub fn metric_from_pair(omega: &TwoForm, j: &ACStructure) -> Result<Metric> {
    let grid = omega.grid();
    let mut asym: f64 = 0.0;
    let mut min_eig = f64::INFINITY;
    let mut mats = Vec::with_capacity(grid.len());
    for p in 0..grid.len() {
        let w = omega.mat(p);
        let g = matmul(&w, &transpose(&j.mat(p)));
        let scale = w.iter().flatten().fold(1.0f64, |m, v| m.max(v.abs()));
        asym = asym.max(max_abs_diff(&g, &transpose(&g)) / scale);
        let mut s = [[0.0; 4]; 4];
        for a in 0..4 {
            for b in 0..4 {
                s[a][b] = 0.5 * (g[a][b] + g[b][a]);
            }
        }
        min_eig = min_eig.min(sym_eigenvalues(&s)[0]);
        mats.push(s);
    }
    if !(asym < 1e-8) {
        return Err(Error::NotCompatible { asymmetry: asym });
    }
    if !(min_eig > 0.0) {
        return Err(Error::NotTaming { min_eig });
    }
    Ok(Metric::from_mat_fn(grid, |p| mats[p]))
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct CompatibilityReport {
    pub j_squared: f64,
    pub d_omega: f64,
    pub g_asymmetry: f64,
    pub g_min_eig: f64,
    pub omega_invariance: f64,
}

impl CompatibilityReport {
    /// The invariants every almost-Kähler triple must satisfy.
    pub fn passes(&self) -> bool {
        self.j_squared < 1e-10
            && self.d_omega < 1e-8
            && self.g_asymmetry < 1e-10
            && self.g_min_eig > 0.0
            && self.omega_invariance < 1e-10
    }
}

pub fn check_compatibility(omega: &TwoForm, j: &ACStructure) -> CompatibilityReport {
    let grid = omega.grid();
    let mut rep = CompatibilityReport {
        j_squared: j.squared_residual(),
        d_omega: exterior_d(omega.tensor()).max_abs(),
        g_asymmetry: 0.0,
        g_min_eig: f64::INFINITY,
        omega_invariance: 0.0,
    };
    for p in 0..grid.len() {
        let w = omega.mat(p);
        let jm = j.mat(p);
        let g = matmul(&w, &transpose(&jm));
        rep.g_asymmetry = rep.g_asymmetry.max(max_abs_diff(&g, &transpose(&g)));
        let mut s = g;
        for a in 0..4 {
            for b in 0..4 {
                s[a][b] = 0.5 * (g[a][b] + g[b][a]);
            }
        }
        rep.g_min_eig = rep.g_min_eig.min(sym_eigenvalues(&s)[0]);
        let pulled = matmul(&matmul(&jm, &w), &transpose(&jm));
        rep.omega_invariance = rep.omega_invariance.max(max_abs_diff(&pulled, &w));
    }
    rep
}

/// A closed, non-degenerate `omega`, a compatible `J`, and `g = omega(., J .)`.
#[derive(Clone, Debug)]
pub struct AKTriple {
    pub omega: TwoForm,
    pub j: ACStructure,
    pub g: Metric,
}

impl AKTriple {
    pub fn new(omega: TwoForm, j: ACStructure) -> Result<Self> {
        let rep = check_compatibility(&omega, &j);
        if !(rep.d_omega < 1e-8) {
            return Err(Error::NotAlmostKahler {
                residual: rep.d_omega,
            });
        }
        if !(rep.omega_invariance < 1e-10) {
            return Err(Error::NotCompatible {
                asymmetry: rep.omega_invariance,
            });
        }
        let g = metric_from_pair(&omega, &j)?;
        Ok(AKTriple { omega, j, g })
    }

    /// The flat Kähler triple `(omega_0, J_0, delta)`.
    pub fn standard(grid: &Grid4) -> Self {
        AKTriple {
            omega: standard_omega(grid),
            j: ACStructure::standard(grid),
            g: Metric::flat(grid),
        }
    }

    pub fn grid(&self) -> &Grid4 {
        self.omega.grid()
    }
}

/// `J = A (-A^2)^(-1/2)` with `omega(X, Y) = h(A X, Y)`; the unique `J`
/// compatible with `omega` that is closest to being `h`-orthogonal.
pub fn compatible_j_from_metric(omega: &TwoForm, h: &Metric) -> Result<ACStructure> {
    let grid = omega.grid();
    let mut mats = Vec::with_capacity(grid.len());
    for p in 0..grid.len() {
        let w = omega.mat(p);
        if algebra::pfaffian_ref(&w).abs() < 1e-12 {
            return Err(Error::Degenerate(format!("omega vanishes to top order at point {p}")));
        }
        let hm = h.mat(p);
        let ev = sym_eigenvalues(&hm);
        if !(ev[0] > 0.0) {
            return Err(Error::NotTaming { min_eig: ev[0] });
        }
        let hinv = inverse(&hm).ok_or_else(|| Error::Degenerate("metric not invertible".into()))?;
        // endomorphism matrix, acting on column vectors: A = -h^{-1} W
        let mut a = matmul(&hinv, &w);
        a.iter_mut().flatten().for_each(|v| *v = -*v);
        let hs = sym_function(&hm, f64::sqrt);
        let his = sym_function(&hm, |x| 1.0 / x.sqrt());
        let s = matmul(&matmul(&hs, &a), &his);
        let mut neg_s2 = matmul(&s, &s);
        neg_s2.iter_mut().flatten().for_each(|v| *v = -*v);
        let sym = symmetrize(&neg_s2);
        let root_inv = sym_function(&sym, |x| 1.0 / x.sqrt());
        let abs_inv = matmul(&matmul(&his, &root_inv), &hs);
        let e = matmul(&a, &abs_inv);
        mats.push(transpose(&e));
    }
    ACStructure::from_mat_fn(grid, |p| mats[p])
}

fn symmetrize(a: &Mat4) -> Mat4 {
    let mut s = *a;
    for i in 0..4 {
        for j in 0..4 {
            s[i][j] = 0.5 * (a[i][j] + a[j][i]);
        }
    }
    s
}

/// The projectors `P = (1 - J.J)/2`, `Q = (1 + J.J)/2` on covariant 2-tensors.
pub struct Projectors<'a> {
    j: &'a ACStructure,
}

impl<'a> Projectors<'a> {
    pub fn new(j: &'a ACStructure) -> Self {
        Projectors { j }
    }

    fn conj(&self, t: &TensorField, sign: f64) -> TensorField {
        let grid = t.grid();
        TensorField::from_mat_fn(grid, [t.slots()[0], t.slots()[1]], |p| {
            let jm = self.j.mat(p);
            let m = t.mat(p);
            let c = matmul(&matmul(&jm, &m), &transpose(&jm));
            let mut out = [[0.0; 4]; 4];
            for a in 0..4 {
                for b in 0..4 {
                    out[a][b] = 0.5 * (m[a][b] + sign * c[a][b]);
                }
            }
            out
        })
    }

    /// `(P T)_kl = (T_kl - J_k^i J_l^j T_ij) / 2`.
    pub fn p(&self, t: &TensorField) -> TensorField {
        self.conj(t, -1.0)
    }

    /// `(Q T)_kl = (T_kl + J_k^i J_l^j T_ij) / 2`.
    pub fn q(&self, t: &TensorField) -> TensorField {
        self.conj(t, 1.0)
    }

    pub fn p_form(&self, a: &TwoForm) -> TwoForm {
        let grid = a.grid();
        TwoForm::from_pairs_fn(grid, |p| {
            let jm = self.j.mat(p);
            let m = from_pairs(&a.pairs(p));
            let c = matmul(&matmul(&jm, &m), &transpose(&jm));
            let v = to_pairs(&m);
            let cv = to_pairs(&c);
            [0, 1, 2, 3, 4, 5].map(|k| 0.5 * (v[k] - cv[k]))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_pair_gives_identity_metric() {
        let g = Grid4::cubic(4).unwrap();
        let t = AKTriple::new(standard_omega(&g), ACStructure::standard(&g)).unwrap();
        for p in [0, 77, g.len() - 1] {
            assert_eq!(t.g.mat(p), IDENTITY);
        }
        assert!(check_compatibility(&t.omega, &t.j).passes());
    }

    #[test]
    fn rejects_non_almost_complex() {
        let g = Grid4::cubic(4).unwrap();
        let t = TensorField::from_mat_fn(&g, [Slot::Co, Slot::Contra], |_| IDENTITY);
        assert!(matches!(ACStructure::new(t), Err(Error::NotAlmostComplex { .. })));
    }

    #[test]
    fn reversed_orientation_is_not_taming() {
        let g = Grid4::cubic(4).unwrap();
        let omega = standard_omega(&g).scaled(-1.0);
        assert!(matches!(
            metric_from_pair(&omega, &ACStructure::standard(&g)),
            Err(Error::NotTaming { .. })
        ));
    }

    #[test]
    fn polar_decomposition_recovers_standard_j() {
        let g = Grid4::cubic(4).unwrap();
        let j = compatible_j_from_metric(&standard_omega(&g), &Metric::flat(&g)).unwrap();
        assert!(j.tensor().max_abs_diff(ACStructure::standard(&g).tensor()) < 1e-14);
    }
}
