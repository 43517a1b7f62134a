//! Harmonic self-dual forms and the low spectrum of `(d+, d*)` on one-forms.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::algebra::{dot6, mat6_vec, Vec6, ANTI_SELF_DUAL_FLAT, SELF_DUAL_FLAT};
use crate::error::{Error, Result};
use crate::field::{Metric, OneForm, ScalarField, TwoForm};
use crate::grid::Grid4;
use crate::krylov::GmresOptions;

use super::forms::{codifferential1, d1, l2_inner2_with, HodgeStar, MetricData};
use super::laplacian::solve_laplacian_metric;
use super::system::{split_solution, Gauge, MeanSlot, OneFormSystem};

/// An `L^2(g)`-orthonormal basis of closed self-dual two-forms.
#[derive(Clone, Debug)]
pub struct HarmonicBasis {
    pub forms: Vec<TwoForm>,
}

impl HarmonicBasis {
    /// Gram matrix `int <chi_a, chi_b>_g dvol_g`.
    pub fn gram(&self, g: &Metric) -> Result<DMatrix<f64>> {
        let md = MetricData::new(g)?;
        Ok(gram_with(&md, &self.forms))
    }
}

fn gram_with(md: &MetricData, forms: &[TwoForm]) -> DMatrix<f64> {
    let k = forms.len();
    let mut m = DMatrix::zeros(k, k);
    for a in 0..k {
        for b in a..k {
            let v = l2_inner2_with(md, &forms[a], &forms[b]);
            m[(a, b)] = v;
            m[(b, a)] = v;
        }
    }
    m
}

/// Combines `forms` with the columns of `coef`.
fn combine(grid: &Grid4, forms: &[TwoForm], coef: &DMatrix<f64>) -> Vec<TwoForm> {
    (0..coef.ncols())
        .map(|c| {
            let mut acc = TwoForm::zeros(grid);
            for (r, f) in forms.iter().enumerate() {
                if coef[(r, c)] != 0.0 {
                    acc = acc.lin_comb(1.0, f, coef[(r, c)]);
                }
            }
            acc
        })
        .collect()
}

/// Symmetric (Löwdin) orthonormalisation; the result stays as close as
/// possible to the input forms, which fixes signs and ordering.
pub fn lowdin(md: &MetricData, grid: &Grid4, forms: &[TwoForm], rank_tol: f64) -> Result<Vec<TwoForm>> {
    let gram = gram_with(md, forms);
    let eig = SymmetricEigen::new(gram.clone());
    let max = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    let found = eig.eigenvalues.iter().filter(|&&l| l > rank_tol * max.max(1e-300)).count();
    if found < forms.len() {
        return Err(Error::DimensionMismatch {
            expected: forms.len(),
            found,
        });
    }
    let inv_sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
    let coef = &eig.eigenvectors * inv_sqrt * eig.eigenvectors.transpose();
    Ok(combine(grid, forms, &coef))
}

/// Closed `g`-self-dual forms `c + y.nu + da` continuing the three flat
/// self-dual constants, orthonormalised in `L^2(g)`.
///
/// For each flat self-dual seed `c` the anti-self-dual part of
/// `c + sum y_b nu_b + da` is driven to zero, with `nu_b` the flat
/// anti-self-dual constants and `a` in flat Coulomb gauge.
pub fn harmonic_self_dual_basis(g: &Metric) -> Result<HarmonicBasis> {
    harmonic_self_dual_basis_with(g, &GmresOptions::default())
}

pub fn harmonic_self_dual_basis_with(g: &Metric, opts: &GmresOptions) -> Result<HarmonicBasis> {
    let grid = g.grid();
    let md = MetricData::new(g)?;
    let star = HodgeStar::from_data(grid, &md);
    let n = grid.len();
    let rows: Vec<_> = (0..n)
        .map(|p| star.projected_rows(p, &ANTI_SELF_DUAL_FLAT, -1.0))
        .collect();
    let nu: Vec<TwoForm> = ANTI_SELF_DUAL_FLAT
        .iter()
        .map(|v| TwoForm::constant(grid, *v))
        .collect();
    let sys = OneFormSystem::new(
        grid,
        rows.clone(),
        Gauge::Flat,
        nu.clone(),
        [
            MeanSlot::Field(3),
            MeanSlot::Extra(0),
            MeanSlot::Extra(1),
            MeanSlot::Extra(2),
        ],
        None,
        ANTI_SELF_DUAL_FLAT,
    )?;
    let mut raw = Vec::with_capacity(3);
    for seed in SELF_DUAL_FLAT {
        let mut rhs = vec![0.0; 4 * n + 3];
        for p in 0..n {
            for a in 0..3 {
                rhs[a * n + p] = -dot6(&rows[p][a], &seed);
            }
        }
        let mut x = vec![0.0; 4 * n + 3];
        sys.solve(&rhs, &mut x, opts).into_result()?;
        let (a, y) = split_solution(grid, &x);
        let mut chi = TwoForm::constant(grid, seed).plus(&d1(&a));
        for (b, nb) in nu.iter().enumerate() {
            chi = chi.lin_comb(1.0, nb, y[b]);
        }
        raw.push(chi);
    }
    Ok(HarmonicBasis {
        forms: lowdin(&md, grid, &raw, 1e-10)?,
    })
}

/// Splits a harmonic basis of a compatible metric into `omega / |omega|` and
/// an orthonormal pair spanning its orthogonal complement, the pair chosen
/// closest to the flat anti-invariant seeds `dx01 - dx23`, `dx03 - dx12`.
pub fn class_directions(g: &Metric, omega: &TwoForm, basis: &HarmonicBasis) -> Result<(TwoForm, [TwoForm; 2])> {
    let grid = g.grid();
    let md = MetricData::new(g)?;
    let norm = l2_inner2_with(&md, omega, omega).sqrt();
    let omega_hat = omega.scaled(1.0 / norm);
    let mut pair = Vec::with_capacity(2);
    for seed in [SELF_DUAL_FLAT[0], SELF_DUAL_FLAT[2]] {
        let t = TwoForm::constant(grid, seed);
        // expand the seed in the basis, then remove the omega direction
        let mut proj = TwoForm::zeros(grid);
        for f in &basis.forms {
            proj = proj.lin_comb(1.0, f, l2_inner2_with(&md, f, &t));
        }
        let c = l2_inner2_with(&md, &omega_hat, &proj);
        pair.push(proj.lin_comb(1.0, &omega_hat, -c));
    }
    let ortho = lowdin(&md, grid, &pair, 1e-10)?;
    Ok((omega_hat, [ortho[0].clone(), ortho[1].clone()]))
}

/// Harmonic one-forms `c + d psi` with `Delta_g psi = d*_g c` for the four
/// flat constants `c`.
pub fn harmonic_one_forms(g: &Metric, opts: &GmresOptions) -> Result<Vec<OneForm>> {
    let grid = g.grid();
    let mut out = Vec::with_capacity(4);
    for m in 0..4 {
        let c = OneForm::from_fn(grid, |_| {
            let mut v = [0.0; 4];
            v[m] = 1.0;
            v
        });
        let rhs = codifferential1(g, &c)?;
        let rhs = rhs.map(|v| v).zip_map(&ScalarField::constant(grid, rhs.mean()), |a, b| a - b);
        let psi = solve_laplacian_metric(g, &rhs, opts)?;
        let dpsi = psi.gradient();
        out.push(OneForm::from_fn(grid, |p| {
            let mut v = dpsi.vec4(p);
            v[m] += 1.0;
            v
        }));
    }
    Ok(out)
}

/// The operator `T b = (<(db)+_g, e_a>_flat, d*_g b)` on resolved one-forms,
/// with its transpose in the Euclidean grid inner product.
struct KernelOperator {
    grid: Grid4,
    rows: Vec<[Vec6; 3]>,
    coef: Vec<[[f64; 4]; 4]>,
    inv_sqrt: Vec<f64>,
}

impl KernelOperator {
    fn new(g: &Metric) -> Result<Self> {
        let grid = g.grid().clone();
        let md = MetricData::new(g)?;
        let star = HodgeStar::from_data(&grid, &md);
        let rows = (0..grid.len())
            .map(|p| star.projected_rows(p, &SELF_DUAL_FLAT, 1.0))
            .collect();
        let coef = md
            .ginv
            .iter()
            .zip(&md.sqrt_det)
            .map(|(gi, s)| {
                let mut m = *gi;
                m.iter_mut().flatten().for_each(|v| *v *= s);
                m
            })
            .collect();
        let inv_sqrt = md.sqrt_det.iter().map(|s| 1.0 / s).collect();
        Ok(KernelOperator {
            grid,
            rows,
            coef,
            inv_sqrt,
        })
    }

    fn filter(&self, v: &mut [f64]) {
        let n = self.grid.len();
        let mut fields: Vec<Vec<f64>> = v.chunks(n).map(|c| c.to_vec()).collect();
        self.grid.spectral().filter_unresolved(&mut fields);
        for (c, f) in fields.into_iter().enumerate() {
            v[c * n..(c + 1) * n].copy_from_slice(&f);
        }
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.grid.len();
        let b = OneForm::from_components(&self.grid, std::array::from_fn(|i| x[i * n..(i + 1) * n].to_vec()))
            .expect("shape");
        let db = d1(&b);
        let mut out = vec![0.0; 4 * n];
        for p in 0..n {
            let v = db.pairs(p);
            for a in 0..3 {
                out[a * n + p] = dot6(&self.rows[p][a], &v);
            }
        }
        let q: Vec<Vec<f64>> = (0..4)
            .map(|i| (0..n).map(|p| (0..4).map(|j| self.coef[p][i][j] * x[j * n + p]).sum()).collect())
            .collect();
        let sp = self.grid.spectral();
        let refs: Vec<&[f64]> = q.iter().map(|f| f.as_slice()).collect();
        let spec = sp.forward_real(&refs);
        let div: Vec<Complex64> = (0..n)
            .map(|p| {
                let k = sp.wavevector(p);
                -(0..4).map(|i| spec[i][p] * Complex64::new(0.0, k[i])).sum::<Complex64>()
            })
            .collect();
        let dv = sp.inverse_real(&[div]).pop().unwrap();
        for p in 0..n {
            out[3 * n + p] = dv[p] * self.inv_sqrt[p];
        }
        out
    }

    fn apply_transpose(&self, y: &[f64]) -> Vec<f64> {
        let n = self.grid.len();
        let sp = self.grid.spectral();
        // two-form part: w_ij = sum_a R_a^{ij} y_a, then b_m gets -sum_i D_i w_im
        let mut w = vec![vec![0.0; n]; 6];
        for p in 0..n {
            for q in 0..6 {
                w[q][p] = (0..3).map(|a| self.rows[p][a][q] * y[a * n + p]).sum();
            }
        }
        // gauge part: b_j = coef_ij D_i (u / sqrt G)
        let u: Vec<f64> = (0..n).map(|p| y[3 * n + p] * self.inv_sqrt[p]).collect();
        let mut fields: Vec<&[f64]> = w.iter().map(|f| f.as_slice()).collect();
        fields.push(&u);
        let spec = sp.forward_real(&fields);
        let mut out_spec = vec![vec![Complex64::default(); n]; 8];
        for p in 0..n {
            let k = sp.wavevector(p);
            let ik = k.map(|v| Complex64::new(0.0, v));
            for (q, &(i, j)) in crate::algebra::PAIRS.iter().enumerate() {
                // <D_i b_j - D_j b_i, w> = -<b_j, D_i w> + <b_i, D_j w>
                out_spec[j][p] -= ik[i] * spec[q][p];
                out_spec[i][p] += ik[j] * spec[q][p];
            }
            for i in 0..4 {
                out_spec[4 + i][p] = ik[i] * spec[6][p];
            }
        }
        let back = sp.inverse_real(&out_spec);
        let mut out = vec![0.0; 4 * n];
        for m in 0..4 {
            for p in 0..n {
                let gauge: f64 = (0..4).map(|i| self.coef[p][i][m] * back[4 + i][p]).sum();
                out[m * n + p] = back[m][p] + gauge;
            }
        }
        out
    }

    /// `Pi T^T T Pi` on the resolved subspace.
    fn normal(&self, x: &[f64]) -> Vec<f64> {
        let mut v = x.to_vec();
        self.filter(&mut v);
        let mut out = self.apply_transpose(&self.apply(&v));
        self.filter(&mut out);
        out
    }

    /// Inverse of the flat normal operator `|kappa|^2` on non-constant resolved modes.
    fn precondition(&self, r: &[f64]) -> Vec<f64> {
        let n = self.grid.len();
        let sp = self.grid.spectral();
        let fields: Vec<&[f64]> = r.chunks(n).collect();
        let mut spec = sp.forward_real(&fields);
        for s in spec.iter_mut() {
            for (p, z) in s.iter_mut().enumerate() {
                let k = sp.wavevector(p);
                let k2 = k.iter().map(|v| v * v).sum::<f64>();
                *z = if p == 0 || !sp.is_resolved(p) { Complex64::default() } else { *z / k2 };
            }
        }
        sp.inverse_real(&spec).concat()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn deflate(v: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for q in basis {
            let c = dot(v, q);
            v.iter_mut().zip(q).for_each(|(a, b)| *a -= c * b);
        }
    }
}

/// Low singular values of `(d+_g, d*_g)` on resolved one-forms.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct KernelSpectrum {
    /// Ritz values on the harmonic one-forms (upper bounds for the four smallest).
    pub kernel: [f64; 4],
    /// Smallest singular value on the complement of the harmonic forms.
    pub gap: f64,
    pub iterations: usize,
}

pub fn kernel_spectrum(g: &Metric, seed: u64) -> Result<KernelSpectrum> {
    let grid = g.grid();
    let n = grid.len();
    let op = KernelOperator::new(g)?;
    let opts = GmresOptions::default();
    let harmonic = harmonic_one_forms(g, &opts)?;
    // Euclidean orthonormal basis of the harmonic span
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for h in &harmonic {
        let mut v: Vec<f64> = h.tensor().components().concat();
        deflate(&mut v, &basis);
        let nv = dot(&v, &v).sqrt();
        v.iter_mut().for_each(|x| *x /= nv);
        basis.push(v);
    }
    let images: Vec<Vec<f64>> = basis.iter().map(|v| op.apply(v)).collect();
    let mut gram = DMatrix::zeros(4, 4);
    for a in 0..4 {
        for b in 0..4 {
            gram[(a, b)] = dot(&images[a], &images[b]);
        }
    }
    let mut ev: Vec<f64> = SymmetricEigen::new(gram).eigenvalues.iter().map(|l| l.max(0.0).sqrt()).collect();
    ev.sort_by(f64::total_cmp);
    let kernel = [ev[0], ev[1], ev[2], ev[3]];

    // single-vector LOBPCG for the smallest eigenvalue of T^T T on the complement
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<f64> = (0..4 * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    op.filter(&mut x);
    deflate(&mut x, &basis);
    normalize(&mut x);
    let mut ax = op.normal(&x);
    let mut p: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut lambda = dot(&x, &ax);
    let mut iterations = 0;
    for it in 0..200 {
        iterations = it + 1;
        let r: Vec<f64> = ax.iter().zip(&x).map(|(a, b)| a - lambda * b).collect();
        if dot(&r, &r).sqrt() < 1e-6 * lambda.abs().max(1e-12) {
            break;
        }
        let mut w = op.precondition(&r);
        deflate(&mut w, &basis);
        let aw = op.normal(&w);
        let mut vecs = vec![(x.clone(), ax.clone()), (w, aw)];
        if let Some(pp) = p.take() {
            vecs.push(pp);
        }
        let k = vecs.len();
        let mut s = DMatrix::zeros(k, k);
        let mut h = DMatrix::zeros(k, k);
        for a in 0..k {
            for b in 0..k {
                s[(a, b)] = dot(&vecs[a].0, &vecs[b].0);
                h[(a, b)] = dot(&vecs[a].0, &vecs[b].1);
            }
        }
        let h = (&h + h.transpose()) * 0.5;
        let c = match smallest_generalized(&h, &s) {
            Some(c) => c,
            None => {
                // drop the search direction and retry with x and w only
                let s2 = s.view((0, 0), (2, 2)).into_owned();
                let h2 = h.view((0, 0), (2, 2)).into_owned();
                match smallest_generalized(&h2, &s2) {
                    Some(c) => {
                        let mut full = nalgebra::DVector::zeros(k);
                        full[0] = c[0];
                        full[1] = c[1];
                        full
                    }
                    None => break,
                }
            }
        };
        let mut nx = vec![0.0; 4 * n];
        let mut nax = vec![0.0; 4 * n];
        let mut np = vec![0.0; 4 * n];
        let mut nap = vec![0.0; 4 * n];
        for (a, (v, av)) in vecs.iter().enumerate() {
            for i in 0..4 * n {
                nx[i] += c[a] * v[i];
                nax[i] += c[a] * av[i];
                if a > 0 {
                    np[i] += c[a] * v[i];
                    nap[i] += c[a] * av[i];
                }
            }
        }
        let nn = dot(&nx, &nx).sqrt();
        nx.iter_mut().for_each(|v| *v /= nn);
        nax.iter_mut().for_each(|v| *v /= nn);
        let pn = dot(&np, &np).sqrt();
        if pn > 0.0 {
            np.iter_mut().for_each(|v| *v /= pn);
            nap.iter_mut().for_each(|v| *v /= pn);
            p = Some((np, nap));
        }
        x = nx;
        ax = nax;
        lambda = dot(&x, &ax);
    }
    Ok(KernelSpectrum {
        kernel,
        gap: lambda.max(0.0).sqrt(),
        iterations,
    })
}

fn normalize(v: &mut [f64]) {
    let n = dot(v, v).sqrt();
    v.iter_mut().for_each(|x| *x /= n);
}

/// Eigenvector of the smallest eigenvalue of `H c = lambda S c`.
fn smallest_generalized(h: &DMatrix<f64>, s: &DMatrix<f64>) -> Option<nalgebra::DVector<f64>> {
    let chol = s.clone().cholesky()?;
    let l = chol.l();
    let linv = l.clone().try_inverse()?;
    let m = &linv * h * linv.transpose();
    let m = (&m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(m);
    let (idx, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))?;
    let y = eig.eigenvectors.column(idx).into_owned();
    let c = linv.transpose() * y;
    if c.iter().all(|v| v.is_finite()) {
        Some(c)
    } else {
        None
    }
}

/// Applies the `g`-Hodge star to each basis form and reports `max |* chi - chi|`.
pub fn self_duality_defect(g: &Metric, basis: &HarmonicBasis) -> Result<f64> {
    let star = HodgeStar::new(g)?;
    let mut worst: f64 = 0.0;
    for f in &basis.forms {
        for p in 0..g.grid().len() {
            let v = f.pairs(p);
            let s = mat6_vec(star.matrix(p), &v);
            for k in 0..6 {
                worst = worst.max((s[k] - v[k]).abs());
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_basis_is_the_constant_self_dual_forms() {
        let grid = Grid4::cubic(4).unwrap();
        let g = Metric::flat(&grid);
        let b = harmonic_self_dual_basis(&g).unwrap();
        for (f, seed) in b.forms.iter().zip(SELF_DUAL_FLAT) {
            let expect = TwoForm::constant(&grid, seed.map(|v| v / 2f64.sqrt()));
            assert!(f.tensor().max_abs_diff(expect.tensor()) < 1e-12);
        }
    }

    #[test]
    fn transpose_is_adjoint() {
        let grid = Grid4::cubic(4).unwrap();
        let t = crate::scenario::perturbed_triple(&grid, 0.2, 2).unwrap();
        let op = KernelOperator::new(&t.g).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = grid.len();
        let x: Vec<f64> = (0..4 * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..4 * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let lhs = dot(&op.apply(&x), &y);
        let rhs = dot(&x, &op.apply_transpose(&y));
        assert!((lhs - rhs).abs() < 1e-9 * lhs.abs().max(1.0), "{lhs} vs {rhs}");
    }
}
