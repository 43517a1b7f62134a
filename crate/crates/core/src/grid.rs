//! Uniform periodic grids on the 4-torus and their Fourier transforms.
//!
//! Points are stored row-major with axis 0 slowest. Every transform is a
//! full complex 4-D FFT; real fields are packed two at a time.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use once_cell::sync::Lazy;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

pub const DIM: usize = 4;

type PlanKey = ([usize; 4], [u64; 4]);

static SPECTRAL_CACHE: Lazy<Mutex<HashMap<PlanKey, Arc<Spectral>>>> =
    Lazy::new(|| Mutex::new(HashMap::new()));

/// A uniform grid `n[0] x n[1] x n[2] x n[3]` on a torus with the given periods.
#[derive(Clone)]
pub struct Grid4 {
    n: [usize; 4],
    periods: [f64; 4],
    spectral: Arc<Spectral>,
}

impl fmt::Debug for Grid4 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid4")
            .field("n", &self.n)
            .field("periods", &self.periods)
            .finish()
    }
}

impl PartialEq for Grid4 {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.periods == other.periods
    }
}

impl Grid4 {
    /// Each `n[k]` must be even and at least 4; periods must be positive.
    pub fn new(n: [usize; 4], periods: [f64; 4]) -> Result<Self> {
        for k in 0..DIM {
            if n[k] < 4 || n[k] % 2 != 0 {
                return Err(Error::InvalidGrid(format!(
                    "axis {k} has {} points; need an even count >= 4",
                    n[k]
                )));
            }
            if !(periods[k].is_finite() && periods[k] > 0.0) {
                return Err(Error::InvalidGrid(format!(
                    "axis {k} has period {}",
                    periods[k]
                )));
            }
        }
        let key = (n, periods.map(f64::to_bits));
        let spectral = {
            let mut cache = SPECTRAL_CACHE.lock().expect("spectral cache poisoned");
            cache
                .entry(key)
                .or_insert_with(|| Arc::new(Spectral::new(n, periods)))
                .clone()
        };
        Ok(Grid4 { n, periods, spectral })
    }

    /// Unit torus with `n` points per axis.
    pub fn cubic(n: usize) -> Result<Self> {
        Self::new([n; 4], [1.0; 4])
    }

    pub fn n(&self) -> [usize; 4] {
        self.n
    }

    pub fn periods(&self) -> [f64; 4] {
        self.periods
    }

    pub fn len(&self) -> usize {
        self.n.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.periods[axis] / self.n[axis] as f64
    }

    pub fn cell_volume(&self) -> f64 {
        (0..DIM).map(|k| self.spacing(k)).product()
    }

    pub fn total_volume(&self) -> f64 {
        self.periods.iter().product()
    }

    pub fn strides(&self) -> [usize; 4] {
        let n = self.n;
        [n[1] * n[2] * n[3], n[2] * n[3], n[3], 1]
    }

    pub fn multi_index(&self, p: usize) -> [usize; 4] {
        let s = self.strides();
        [
            p / s[0],
            (p / s[1]) % self.n[1],
            (p / s[2]) % self.n[2],
            p % self.n[3],
        ]
    }

    pub fn coords(&self, p: usize) -> [f64; 4] {
        let m = self.multi_index(p);
        [0, 1, 2, 3].map(|k| m[k] as f64 * self.spacing(k))
    }

    pub fn spectral(&self) -> &Spectral {
        &self.spectral
    }
}

/// Cached FFT plans and wavenumber tables for one grid shape.
pub struct Spectral {
    n: [usize; 4],
    len: usize,
    fwd: [Arc<dyn Fft<f64>>; 4],
    inv: [Arc<dyn Fft<f64>>; 4],
    /// First-derivative wavenumbers; zero at the Nyquist index.
    kappa: [Vec<f64>; 4],
    /// Second-derivative wavenumbers; the Nyquist index keeps its full value.
    kappa_full: [Vec<f64>; 4],
    neg: Vec<u32>,
}

impl Spectral {
    fn new(n: [usize; 4], periods: [f64; 4]) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = [0, 1, 2, 3].map(|k| planner.plan_fft_forward(n[k]));
        let inv = [0, 1, 2, 3].map(|k| planner.plan_fft_inverse(n[k]));
        let kappa = [0, 1, 2, 3].map(|k| {
            (0..n[k])
                .map(|m| {
                    if 2 * m == n[k] {
                        0.0
                    } else {
                        2.0 * PI / periods[k] * signed_mode(m, n[k]) as f64
                    }
                })
                .collect::<Vec<_>>()
        });
        let kappa_full = [0, 1, 2, 3].map(|k| {
            (0..n[k])
                .map(|m| 2.0 * PI / periods[k] * signed_mode(m, n[k]).unsigned_abs() as f64)
                .collect::<Vec<_>>()
        });
        let len = n.iter().product();
        let strides = [n[1] * n[2] * n[3], n[2] * n[3], n[3], 1];
        let neg = (0..len)
            .map(|p| {
                let mut q = 0;
                for k in 0..DIM {
                    let m = (p / strides[k]) % n[k];
                    q += ((n[k] - m) % n[k]) * strides[k];
                }
                q as u32
            })
            .collect();
        Spectral {
            n,
            len,
            fwd,
            inv,
            kappa,
            kappa_full,
            neg,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn mode_index(&self, p: usize) -> [usize; 4] {
        let n = self.n;
        [
            p / (n[1] * n[2] * n[3]),
            (p / (n[2] * n[3])) % n[1],
            (p / n[3]) % n[2],
            p % n[3],
        ]
    }

    /// Derivative wavevector of spectral index `p` (Nyquist entries zeroed).
    pub fn wavevector(&self, p: usize) -> [f64; 4] {
        let m = self.mode_index(p);
        [0, 1, 2, 3].map(|k| self.kappa[k][m[k]])
    }

    /// Squared norm of the full wavevector, the symbol of `-Delta_flat`.
    pub fn laplace_symbol(&self, p: usize) -> f64 {
        let m = self.mode_index(p);
        (0..DIM).map(|k| self.kappa_full[k][m[k]].powi(2)).sum()
    }

    /// True when no axis sits at its Nyquist index.
    pub fn is_resolved(&self, p: usize) -> bool {
        let m = self.mode_index(p);
        (0..DIM).all(|k| 2 * m[k] != self.n[k])
    }

    /// Index of the wavevector `-k`.
    pub fn negated(&self, p: usize) -> usize {
        self.neg[p] as usize
    }

    /// Unnormalised forward transform in place.
    pub fn forward(&self, data: &mut [Complex64]) {
        assert_eq!(data.len(), self.len);
        for axis in 0..DIM {
            self.axis_pass(data, axis, &self.fwd[axis]);
        }
    }

    /// Inverse transform in place, including the `1/N` factor.
    pub fn inverse(&self, data: &mut [Complex64]) {
        assert_eq!(data.len(), self.len);
        for axis in 0..DIM {
            self.axis_pass(data, axis, &self.inv[axis]);
        }
        let scale = 1.0 / self.len as f64;
        data.iter_mut().for_each(|z| *z *= scale);
    }

    fn axis_pass(&self, data: &mut [Complex64], axis: usize, plan: &Arc<dyn Fft<f64>>) {
        let n = self.n[axis];
        let stride: usize = self.n[axis + 1..].iter().product();
        if stride == 1 {
            data.par_chunks_mut(n * 64).for_each(|chunk| {
                let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
                plan.process_with_scratch(chunk, &mut scratch);
            });
            return;
        }
        let block = n * stride;
        data.par_chunks_mut(block).for_each(|blk| {
            let mut lines = vec![Complex64::default(); block];
            for m in 0..n {
                for r in 0..stride {
                    lines[r * n + m] = blk[m * stride + r];
                }
            }
            let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
            plan.process_with_scratch(&mut lines, &mut scratch);
            for m in 0..n {
                for r in 0..stride {
                    blk[m * stride + r] = lines[r * n + m];
                }
            }
        });
    }

    /// Spectra of real fields; two fields share one complex transform.
    pub fn forward_real(&self, fields: &[&[f64]]) -> Vec<Vec<Complex64>> {
        let mut out = Vec::with_capacity(fields.len());
        for pair in fields.chunks(2) {
            let mut z: Vec<Complex64> = match pair {
                [u, v] => u.iter().zip(v.iter()).map(|(&a, &b)| Complex64::new(a, b)).collect(),
                [u] => u.iter().map(|&a| Complex64::new(a, 0.0)).collect(),
                _ => unreachable!(),
            };
            self.forward(&mut z);
            if pair.len() == 1 {
                out.push(z);
                continue;
            }
            let mut a = vec![Complex64::default(); self.len];
            let mut b = vec![Complex64::default(); self.len];
            for p in 0..self.len {
                let zc = z[self.neg[p] as usize].conj();
                a[p] = (z[p] + zc) * 0.5;
                b[p] = (z[p] - zc) * Complex64::new(0.0, -0.5);
            }
            out.push(a);
            out.push(b);
        }
        out
    }

    /// Real parts of the inverse transforms of Hermitian spectra.
    pub fn inverse_real(&self, spectra: &[Vec<Complex64>]) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(spectra.len());
        for pair in spectra.chunks(2) {
            let mut z: Vec<Complex64> = match pair {
                [a, b] => a
                    .iter()
                    .zip(b.iter())
                    .map(|(&x, &y)| x + Complex64::new(-y.im, y.re))
                    .collect(),
                [a] => a.clone(),
                _ => unreachable!(),
            };
            self.inverse(&mut z);
            out.push(z.iter().map(|c| c.re).collect());
            if pair.len() == 2 {
                out.push(z.iter().map(|c| c.im).collect());
            }
        }
        out
    }

    /// Removes every mode that touches a Nyquist index.
    pub fn filter_unresolved(&self, fields: &mut [Vec<f64>]) {
        let refs: Vec<&[f64]> = fields.iter().map(|f| f.as_slice()).collect();
        let mut spectra = self.forward_real(&refs);
        for s in spectra.iter_mut() {
            for (p, z) in s.iter_mut().enumerate() {
                if !self.is_resolved(p) {
                    *z = Complex64::default();
                }
            }
        }
        let back = self.inverse_real(&spectra);
        for (f, b) in fields.iter_mut().zip(back) {
            *f = b;
        }
    }
}

fn signed_mode(m: usize, n: usize) -> i64 {
    if 2 * m <= n {
        m as i64
    } else {
        m as i64 - n as i64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_odd_and_small_grids() {
        assert!(Grid4::new([8, 8, 7, 8], [1.0; 4]).is_err());
        assert!(Grid4::new([2, 8, 8, 8], [1.0; 4]).is_err());
        assert!(Grid4::new([8; 4], [1.0, 1.0, 0.0, 1.0]).is_err());
        assert!(Grid4::new([4, 6, 8, 10], [1.0, 2.0, 0.5, 3.0]).is_ok());
    }

    #[test]
    fn multi_index_round_trip() {
        let g = Grid4::new([4, 6, 8, 10], [1.0; 4]).unwrap();
        let s = g.strides();
        for p in [0, 1, 17, 1919, g.len() - 1] {
            let m = g.multi_index(p);
            assert_eq!(m[0] * s[0] + m[1] * s[1] + m[2] * s[2] + m[3], p);
        }
    }

    #[test]
    fn fft_round_trip_and_packing() {
        let g = Grid4::new([4, 6, 8, 4], [1.0, 2.0, 1.0, 0.5]).unwrap();
        let sp = g.spectral();
        let u: Vec<f64> = (0..g.len()).map(|p| ((p * 37 % 101) as f64).sin()).collect();
        let v: Vec<f64> = (0..g.len()).map(|p| ((p * 11 % 53) as f64).cos()).collect();
        let packed = sp.forward_real(&[&u, &v]);
        let mut single: Vec<Complex64> = u.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        sp.forward(&mut single);
        for p in 0..g.len() {
            assert!((packed[0][p] - single[p]).norm() < 1e-10);
        }
        let back = sp.inverse_real(&packed);
        for p in 0..g.len() {
            assert!((back[0][p] - u[p]).abs() < 1e-12);
            assert!((back[1][p] - v[p]).abs() < 1e-12);
        }
    }

    #[test]
    fn single_mode_lands_on_its_wavevector() {
        let g = Grid4::cubic(8).unwrap();
        let sp = g.spectral();
        let u: Vec<f64> = (0..g.len())
            .map(|p| {
                let x = g.coords(p);
                (2.0 * PI * (x[1] - 2.0 * x[3])).cos()
            })
            .collect();
        let s = &sp.forward_real(&[&u])[0];
        let peak = (0..g.len()).max_by(|&a, &b| s[a].norm().total_cmp(&s[b].norm())).unwrap();
        let k = sp.wavevector(peak);
        assert_eq!(k[0], 0.0);
        assert_eq!(k[2], 0.0);
        assert!((k[1].abs() - 2.0 * PI).abs() < 1e-12);
        assert!((k[3].abs() - 4.0 * PI).abs() < 1e-12);
        assert!((k[1] * k[3]) < 0.0);
    }
}
