//! First-order linear systems on one-forms solved by preconditioned GMRES.
//!
//! Every system here has the shape
//!
//! ```text
//! (b, e) |-> ( R_a(x) . (db + sum_k e_k X_k)   for a = 0, 1, 2,
//!              gauge(b),
//!              slots )
//! ```
//!
//! where `R_a(x)` are pointwise row covectors on two-forms, `X_k` are fixed
//! two-forms carrying extra scalar unknowns, and the plain means of `b` are
//! injected into output slots so the discrete system is square.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::algebra::{dot6, j_conjugation_matrix, Mat4, Vec6, SELF_DUAL_FLAT};
use crate::error::Result;
use crate::field::{OneForm, TwoForm};
use crate::grid::Grid4;
use crate::krylov::{gmres, FlatBlockSolver, GmresInfo, GmresOptions};

use super::forms::{d1, MetricData};

/// How the gauge row is computed.
pub enum Gauge {
    /// `-div b` with the flat metric.
    Flat,
    /// `d*_g b = -(1/sqrt G) d_i (sqrt G g^ij b_j)`.
    Metric { coef: Vec<Mat4>, inv_sqrt_det: Vec<f64> },
}

impl Gauge {
    pub fn metric(md: &MetricData) -> Self {
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
        Gauge::Metric {
            coef,
            inv_sqrt_det: md.sqrt_det.iter().map(|s| 1.0 / s).collect(),
        }
    }
}

/// Where the mean of a one-form component is injected.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeanSlot {
    Field(usize),
    Extra(usize),
}

pub struct OneFormSystem {
    grid: Grid4,
    rows: Vec<[Vec6; 3]>,
    gauge: Gauge,
    extra_forms: Vec<TwoForm>,
    slots: [MeanSlot; 4],
    /// Weights `w` with `sum w = 1`; output 0 has its `w`-mean removed.
    mean_free_row0: Option<Vec<f64>>,
    pre: Option<FlatBlockSolver>,
}

impl OneFormSystem {
    /// `flat_rows` are the row covectors of the constant-coefficient model
    /// used for preconditioning.
    pub fn new(
        grid: &Grid4,
        rows: Vec<[Vec6; 3]>,
        gauge: Gauge,
        extra_forms: Vec<TwoForm>,
        slots: [MeanSlot; 4],
        mean_free_row0: Option<Vec<f64>>,
        flat_rows: [Vec6; 3],
    ) -> Result<Self> {
        let mut sys = OneFormSystem {
            grid: grid.clone(),
            rows,
            gauge,
            extra_forms,
            slots,
            mean_free_row0,
            pre: None,
        };
        let m = sys.extras();
        let n = grid.len();
        let mut k0 = DMatrix::zeros(4 + m, 4 + m);
        for col in 0..4 + m {
            let mut x = vec![0.0; 4 * n + m];
            if col < 4 {
                x[col * n..(col + 1) * n].iter_mut().for_each(|v| *v = 1.0);
            } else {
                x[4 * n + col - 4] = 1.0;
            }
            let y = sys.apply(&x);
            for row in 0..4 {
                k0[(row, col)] = y[row * n..(row + 1) * n].iter().sum::<f64>() / n as f64;
            }
            for e in 0..m {
                k0[(4 + e, col)] = y[4 * n + e];
            }
        }
        sys.pre = Some(FlatBlockSolver::new(grid, flat_rows, k0)?);
        Ok(sys)
    }

    pub fn extras(&self) -> usize {
        self.extra_forms.len()
    }

    pub fn len(&self) -> usize {
        4 * self.grid.len() + self.extras()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Applies the operator to `x = (b_0..b_3, e_0..e_{m-1})`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.grid.len();
        let m = self.extras();
        let b = OneForm::from_components(
            &self.grid,
            std::array::from_fn(|i| x[i * n..(i + 1) * n].to_vec()),
        )
        .expect("one-form shape");
        let db = d1(&b);
        let mut out = vec![0.0; 4 * n + m];
        for p in 0..n {
            let mut eta = db.pairs(p);
            for (k, f) in self.extra_forms.iter().enumerate() {
                let e = x[4 * n + k];
                if e != 0.0 {
                    let v = f.pairs(p);
                    for q in 0..6 {
                        eta[q] += e * v[q];
                    }
                }
            }
            let r = &self.rows[p];
            for a in 0..3 {
                out[a * n + p] = dot6(&r[a], &eta);
            }
        }
        if let Some(w) = &self.mean_free_row0 {
            let mean: f64 = out[..n].iter().zip(w).map(|(v, w)| v * w).sum();
            out[..n].iter_mut().for_each(|v| *v -= mean);
        }
        self.add_tail(x, &mut out);
        out
    }

    /// The gauge row and the mean slots alone, i.e. `apply` with the two-form rows removed.
    pub fn tail(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.add_tail(x, &mut out);
        out
    }

    fn add_tail(&self, x: &[f64], out: &mut [f64]) {
        let n = self.grid.len();
        let gauge = self.gauge_of(x);
        out[3 * n..4 * n].copy_from_slice(&gauge);
        for (c, slot) in self.slots.iter().enumerate() {
            let mean = x[c * n..(c + 1) * n].iter().sum::<f64>() / n as f64;
            match *slot {
                MeanSlot::Field(f) => out[f * n..(f + 1) * n].iter_mut().for_each(|v| *v += mean),
                MeanSlot::Extra(e) => out[4 * n + e] += mean,
            }
        }
    }

    fn gauge_of(&self, x: &[f64]) -> Vec<f64> {
        let n = self.grid.len();
        let sp = self.grid.spectral();
        let fields: Vec<Vec<f64>> = match &self.gauge {
            Gauge::Flat => (0..4).map(|i| x[i * n..(i + 1) * n].to_vec()).collect(),
            Gauge::Metric { coef, .. } => (0..4)
                .map(|i| {
                    (0..n)
                        .map(|p| (0..4).map(|j| coef[p][i][j] * x[j * n + p]).sum())
                        .collect()
                })
                .collect(),
        };
        let refs: Vec<&[f64]> = fields.iter().map(|f| f.as_slice()).collect();
        let spec = sp.forward_real(&refs);
        let div: Vec<Complex64> = (0..n)
            .map(|p| {
                let k = sp.wavevector(p);
                -(0..4)
                    .map(|i| spec[i][p] * Complex64::new(0.0, k[i]))
                    .sum::<Complex64>()
            })
            .collect();
        let mut v = sp.inverse_real(&[div]).pop().unwrap();
        if let Gauge::Metric { inv_sqrt_det, .. } = &self.gauge {
            v.iter_mut().zip(inv_sqrt_det).for_each(|(a, s)| *a *= s);
        }
        v
    }

    pub fn precondition(&self, y: &[f64]) -> Vec<f64> {
        self.pre.as_ref().expect("preconditioner").apply(y)
    }

    /// Solves `A x = rhs` with left preconditioning; `x` holds the initial guess.
    pub fn solve(&self, rhs: &[f64], x: &mut [f64], opts: &GmresOptions) -> GmresInfo {
        let prhs = self.precondition(rhs);
        gmres(|v| self.precondition(&self.apply(v)), &prhs, x, opts)
    }
}

/// Row covector `2 omega ^ . / omega^2` of the linearised volume form.
pub fn volume_row(omega: &Vec6, density: f64) -> Vec6 {
    let w = crate::algebra::wedge_matrix();
    let mut r = [0.0; 6];
    for (k, rk) in r.iter_mut().enumerate() {
        *rk = 2.0 * (0..6).map(|l| omega[l] * w[l][k]).sum::<f64>() / density;
    }
    r
}

/// Rows `e_a^T P(x)` for the flat anti-invariant covectors `e_a`.
pub fn anti_invariant_rows(jm: &[[f64; 4]; 4]) -> [Vec6; 2] {
    let c = j_conjugation_matrix(jm);
    [SELF_DUAL_FLAT[0], SELF_DUAL_FLAT[2]].map(|e| {
        let mut r = [0.0; 6];
        for (k, rk) in r.iter_mut().enumerate() {
            *rk = 0.5 * (e[k] - (0..6).map(|l| e[l] * c[l][k]).sum::<f64>());
        }
        r
    })
}

/// Constant-coefficient rows of [`volume_row`] and [`anti_invariant_rows`] at the standard pair.
pub fn flat_newton_rows() -> [Vec6; 3] {
    let w0 = SELF_DUAL_FLAT[1];
    let d0 = crate::algebra::wedge6(&w0, &w0);
    let [r1, r2] = anti_invariant_rows(&super::structure::STANDARD_J);
    [volume_row(&w0, d0), r1, r2]
}

/// Splits a solution vector into its one-form and extra scalars.
pub fn split_solution(grid: &Grid4, x: &[f64]) -> (OneForm, Vec<f64>) {
    let n = grid.len();
    let b = OneForm::from_components(grid, std::array::from_fn(|i| x[i * n..(i + 1) * n].to_vec()))
        .expect("one-form shape");
    (b, x[4 * n..].to_vec())
}
