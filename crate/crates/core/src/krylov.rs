//! Restarted GMRES and the flat-symbol block inverse used to precondition
//! every first-order system on one-forms.

use nalgebra::{DMatrix, DVector, Matrix4};
use num_complex::Complex64;

use crate::algebra::{Vec6, PAIRS};
use crate::error::{Error, Result};
use crate::grid::Grid4;

#[derive(Clone, Copy, Debug)]
pub struct GmresOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub restart: usize,
    pub max_iter: usize,
}

impl Default for GmresOptions {
    fn default() -> Self {
        GmresOptions {
            rel_tol: 1e-10,
            abs_tol: 0.0,
            restart: 60,
            max_iter: 500,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GmresInfo {
    pub iterations: usize,
    /// Final residual divided by the right-hand-side norm.
    pub relative_residual: f64,
    pub converged: bool,
}

impl GmresInfo {
    pub fn into_result(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::LinearSolveFailure {
                iterations: self.iterations,
                residual: self.relative_residual,
            })
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solves `op(x) = rhs` starting from the contents of `x`.
pub fn gmres(
    mut op: impl FnMut(&[f64]) -> Vec<f64>,
    rhs: &[f64],
    x: &mut [f64],
    opts: &GmresOptions,
) -> GmresInfo {
    let n = rhs.len();
    let bnorm = norm(rhs);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return GmresInfo {
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
        };
    }
    let target = (opts.rel_tol * bnorm).max(opts.abs_tol);
    let m = opts.restart.max(1);
    let mut total = 0;
    loop {
        let ax = op(x);
        let mut r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let beta = norm(&r);
        if beta <= target || total >= opts.max_iter || !beta.is_finite() {
            return GmresInfo {
                iterations: total,
                relative_residual: beta / bnorm,
                converged: beta <= target,
            };
        }
        r.iter_mut().for_each(|v| *v /= beta);
        let mut basis = vec![r];
        let mut h = vec![vec![0.0; m]; m + 1];
        let mut cs = vec![0.0; m];
        let mut sn = vec![0.0; m];
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut used = 0;
        for j in 0..m {
            let mut w = op(&basis[j]);
            total += 1;
            for (i, v) in basis.iter().enumerate() {
                let hij = dot(&w, v);
                h[i][j] = hij;
                w.iter_mut().zip(v).for_each(|(a, b)| *a -= hij * b);
            }
            // one reorthogonalisation pass keeps long cycles stable
            for (i, v) in basis.iter().enumerate() {
                let c = dot(&w, v);
                h[i][j] += c;
                w.iter_mut().zip(v).for_each(|(a, b)| *a -= c * b);
            }
            let hn = norm(&w);
            h[j + 1][j] = hn;
            for i in 0..j {
                let t = cs[i] * h[i][j] + sn[i] * h[i + 1][j];
                h[i + 1][j] = -sn[i] * h[i][j] + cs[i] * h[i + 1][j];
                h[i][j] = t;
            }
            let denom = h[j][j].hypot(h[j + 1][j]);
            if denom == 0.0 {
                break;
            }
            cs[j] = h[j][j] / denom;
            sn[j] = h[j + 1][j] / denom;
            h[j][j] = denom;
            h[j + 1][j] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] *= cs[j];
            used = j + 1;
            if g[j + 1].abs() <= target || total >= opts.max_iter || hn == 0.0 {
                break;
            }
            w.iter_mut().for_each(|v| *v /= hn);
            basis.push(w);
        }
        let mut y = vec![0.0; used];
        for i in (0..used).rev() {
            let s: f64 = (i + 1..used).map(|k| h[i][k] * y[k]).sum();
            y[i] = (g[i] - s) / h[i][i];
        }
        for (k, yk) in y.iter().enumerate() {
            for i in 0..n {
                x[i] += yk * basis[k][i];
            }
        }
    }
}

/// Exact inverse of a constant-coefficient first-order operator on one-forms.
///
/// The operator maps a one-form `b` (four fields) plus `m` scalars to three
/// two-form projections `<e_a, db>`, the flat gauge `-div b`, and `m`
/// scalars. Non-zero resolved wavevectors are inverted 4x4 block by block;
/// the constant modes are handled by a caller-supplied `(4+m)` square block
/// acting on (field means, extra scalars). Modes touching a Nyquist index
/// are mapped to zero.
pub struct FlatBlockSolver {
    grid: Grid4,
    kinv: Vec<[[f64; 4]; 4]>,
    k0_inverse: DMatrix<f64>,
    extras: usize,
}

impl FlatBlockSolver {
    pub fn new(grid: &Grid4, rows: [Vec6; 3], k0_block: DMatrix<f64>) -> Result<Self> {
        let extras = k0_block.nrows() - 4;
        let k0_inverse = k0_block
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Degenerate("constant-mode block is singular".into()))?;
        let sp = grid.spectral();
        let mut kinv = vec![[[0.0; 4]; 4]; grid.len()];
        for (p, slot) in kinv.iter_mut().enumerate() {
            if p == 0 || !sp.is_resolved(p) {
                continue;
            }
            let k = symbol(&rows, sp.wavevector(p));
            let inv = k
                .try_inverse()
                .ok_or_else(|| Error::Degenerate(format!("flat symbol singular at mode {p}")))?;
            for i in 0..4 {
                for j in 0..4 {
                    slot[i][j] = inv[(i, j)];
                }
            }
        }
        Ok(FlatBlockSolver {
            grid: grid.clone(),
            kinv,
            k0_inverse,
            extras,
        })
    }

    pub fn extras(&self) -> usize {
        self.extras
    }

    /// `input` holds four output-side fields then `m` scalars; returns the
    /// matching one-form fields then `m` scalars.
    pub fn apply(&self, input: &[f64]) -> Vec<f64> {
        let n = self.grid.len();
        let sp = self.grid.spectral();
        let fields: Vec<&[f64]> = (0..4).map(|c| &input[c * n..(c + 1) * n]).collect();
        let spec = sp.forward_real(&fields);
        let mut out_spec = vec![vec![Complex64::default(); n]; 4];
        for p in 1..n {
            let kinv = &self.kinv[p];
            if !sp.is_resolved(p) {
                continue;
            }
            for i in 0..4 {
                let mut acc = Complex64::default();
                for j in 0..4 {
                    acc += spec[j][p] * kinv[i][j];
                }
                out_spec[i][p] = Complex64::new(acc.im, -acc.re);
            }
        }
        let mut v0 = DVector::zeros(4 + self.extras);
        for c in 0..4 {
            v0[c] = spec[c][0].re / n as f64;
        }
        for e in 0..self.extras {
            v0[4 + e] = input[4 * n + e];
        }
        let sol = &self.k0_inverse * v0;
        for c in 0..4 {
            out_spec[c][0] = Complex64::new(sol[c] * n as f64, 0.0);
        }
        let mut out: Vec<f64> = sp.inverse_real(&out_spec).concat();
        out.extend((0..self.extras).map(|e| sol[4 + e]));
        out
    }
}

/// Real matrix `K` with `output_hat = i K b_hat` for wavevector `kappa`.
pub fn symbol(rows: &[Vec6; 3], kappa: [f64; 4]) -> Matrix4<f64> {
    let mut k = Matrix4::zeros();
    for (a, row) in rows.iter().enumerate() {
        for (q, &(i, j)) in PAIRS.iter().enumerate() {
            // (kappa ^ b)_ij = kappa_i b_j - kappa_j b_i
            k[(a, j)] += row[q] * kappa[i];
            k[(a, i)] -= row[q] * kappa[j];
        }
    }
    for m in 0..4 {
        k[(3, m)] = -kappa[m];
    }
    k
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gmres_solves_small_nonsymmetric_system() {
        let a = [[4.0, 1.0, 0.0], [2.0, 5.0, 1.0], [0.0, -1.0, 3.0]];
        let b = [1.0, 2.0, 3.0];
        let mut x = vec![0.0; 3];
        let info = gmres(
            |v| (0..3).map(|i| (0..3).map(|j| a[i][j] * v[j]).sum()).collect(),
            &b,
            &mut x,
            &GmresOptions {
                restart: 2,
                ..Default::default()
            },
        );
        assert!(info.converged);
        for i in 0..3 {
            let r: f64 = (0..3).map(|j| a[i][j] * x[j]).sum::<f64>() - b[i];
            assert!(r.abs() < 1e-9);
        }
    }

    #[test]
    fn self_dual_symbol_is_invertible_off_zero() {
        let rows = crate::algebra::SELF_DUAL_FLAT;
        let k = symbol(&rows, [0.3, -1.0, 2.0, 0.5]);
        assert!(k.determinant().abs() > 1e-6);
        // K^T K = |kappa|^2 for the self-dual rows
        let ktk = k.transpose() * k;
        let k2 = 0.09 + 1.0 + 4.0 + 0.25;
        for i in 0..4 {
            for j in 0..4 {
                let e = if i == j { k2 } else { 0.0 };
                assert!((ktk[(i, j)] - e).abs() < 1e-12);
            }
        }
    }
}
