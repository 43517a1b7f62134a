//! Scalar and tensor fields sampled on a [`Grid4`], with spectral calculus.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::algebra::{from_pairs, Mat4, Vec6, PAIRS};
use crate::error::{Error, Result};
use crate::grid::{Grid4, DIM};

/// Whether a tensor slot carries a lower or an upper index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Slot {
    Co,
    Contra,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: Grid4,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: &Grid4, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        Ok(ScalarField {
            grid: grid.clone(),
            values,
        })
    }

    pub fn zeros(grid: &Grid4) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: &Grid4, c: f64) -> Self {
        ScalarField {
            grid: grid.clone(),
            values: vec![c; grid.len()],
        }
    }

    pub fn from_fn(grid: &Grid4, f: impl Fn([f64; 4]) -> f64) -> Self {
        let values = (0..grid.len()).map(|p| f(grid.coords(p))).collect();
        ScalarField {
            grid: grid.clone(),
            values,
        }
    }

    pub fn from_index_fn(grid: &Grid4, f: impl Fn(usize) -> f64) -> Self {
        ScalarField {
            grid: grid.clone(),
            values: (0..grid.len()).map(f).collect(),
        }
    }

    pub fn grid(&self) -> &Grid4 {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        ScalarField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Self {
        ScalarField {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// Plain grid average.
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn oscillation(&self) -> f64 {
        self.max() - self.min()
    }

    /// `(int |f|^2 dx)^(1/2)` with the flat measure.
    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() * self.grid.cell_volume()).sqrt()
    }

    pub fn partial(&self, axis: usize) -> ScalarField {
        let v = spectral_partials(&self.grid, &[&self.values], &[axis]);
        ScalarField {
            grid: self.grid.clone(),
            values: v.into_iter().next().unwrap().into_iter().next().unwrap(),
        }
    }

    /// The differential `d f` as a one-form.
    pub fn gradient(&self) -> OneForm {
        let d = spectral_partials(&self.grid, &[&self.values], &[0, 1, 2, 3]);
        let comps = d.into_iter().next().unwrap();
        OneForm(TensorField {
            grid: self.grid.clone(),
            slots: vec![Slot::Co],
            comps,
        })
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Spectral derivatives of several real fields along the listed axes.
/// Returns `out[field][axis_position]`.
pub fn spectral_partials(grid: &Grid4, fields: &[&[f64]], axes: &[usize]) -> Vec<Vec<Vec<f64>>> {
    let sp = grid.spectral();
    let spectra = sp.forward_real(fields);
    let mut derived = Vec::with_capacity(fields.len() * axes.len());
    for s in &spectra {
        for &a in axes {
            derived.push(
                s.iter()
                    .enumerate()
                    .map(|(p, &z)| z * Complex64::new(0.0, sp.wavevector(p)[a]))
                    .collect::<Vec<_>>(),
            );
        }
    }
    let mut flat = sp.inverse_real(&derived).into_iter();
    (0..fields.len())
        .map(|_| (0..axes.len()).map(|_| flat.next().unwrap()).collect())
        .collect()
}

/// A tensor field with `4^rank` component arrays, each of grid length.
///
/// Components are indexed row-major over the slots, so for rank 2 the
/// component `(i, j)` lives at `4 i + j`.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorField {
    grid: Grid4,
    slots: Vec<Slot>,
    comps: Vec<Vec<f64>>,
}

impl TensorField {
    pub fn new(grid: &Grid4, slots: Vec<Slot>, comps: Vec<Vec<f64>>) -> Result<Self> {
        let expected = DIM.pow(slots.len() as u32);
        if comps.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "{} components for rank {}",
                comps.len(),
                slots.len()
            )));
        }
        if comps.iter().any(|c| c.len() != grid.len()) {
            return Err(Error::ShapeMismatch("component length differs from grid".into()));
        }
        Ok(TensorField {
            grid: grid.clone(),
            slots,
            comps,
        })
    }

    pub fn zeros(grid: &Grid4, slots: Vec<Slot>) -> Self {
        let n = DIM.pow(slots.len() as u32);
        TensorField {
            grid: grid.clone(),
            slots,
            comps: vec![vec![0.0; grid.len()]; n],
        }
    }

    /// Rank-2 field from a pointwise matrix function of the point index.
    pub fn from_mat_fn(grid: &Grid4, slots: [Slot; 2], f: impl Fn(usize) -> Mat4) -> Self {
        let mut t = Self::zeros(grid, slots.to_vec());
        for p in 0..grid.len() {
            let m = f(p);
            for i in 0..4 {
                for j in 0..4 {
                    t.comps[4 * i + j][p] = m[i][j];
                }
            }
        }
        t
    }

    /// Rank-1 field from a pointwise vector function.
    pub fn from_vec_fn(grid: &Grid4, slot: Slot, f: impl Fn(usize) -> [f64; 4]) -> Self {
        let mut t = Self::zeros(grid, vec![slot]);
        for p in 0..grid.len() {
            let v = f(p);
            for i in 0..4 {
                t.comps[i][p] = v[i];
            }
        }
        t
    }

    pub fn grid(&self) -> &Grid4 {
        &self.grid
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn rank(&self) -> usize {
        self.slots.len()
    }

    pub fn components(&self) -> &[Vec<f64>] {
        &self.comps
    }

    pub fn components_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.comps
    }

    pub fn into_components(self) -> Vec<Vec<f64>> {
        self.comps
    }

    pub fn comp(&self, c: usize) -> &[f64] {
        &self.comps[c]
    }

    /// Flat component index of a multi-index.
    pub fn index_of(idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * DIM + i)
    }

    pub fn mat(&self, p: usize) -> Mat4 {
        debug_assert_eq!(self.rank(), 2);
        let mut m = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                m[i][j] = self.comps[4 * i + j][p];
            }
        }
        m
    }

    pub fn vec4(&self, p: usize) -> [f64; 4] {
        debug_assert_eq!(self.rank(), 1);
        [0, 1, 2, 3].map(|i| self.comps[i][p])
    }

    /// Componentwise spectral derivative along `axis`.
    pub fn partial(&self, axis: usize) -> TensorField {
        let refs: Vec<&[f64]> = self.comps.iter().map(|c| c.as_slice()).collect();
        let d = spectral_partials(&self.grid, &refs, &[axis]);
        TensorField {
            grid: self.grid.clone(),
            slots: self.slots.clone(),
            comps: d.into_iter().map(|mut v| v.pop().unwrap()).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.comps
            .iter()
            .flat_map(|c| c.iter())
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &TensorField) -> f64 {
        self.comps
            .iter()
            .zip(&other.comps)
            .flat_map(|(a, b)| a.iter().zip(b.iter()))
            .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
    }

    pub fn scaled(&self, c: f64) -> TensorField {
        let mut t = self.clone();
        t.comps.iter_mut().flatten().for_each(|v| *v *= c);
        t
    }

    pub fn plus(&self, other: &TensorField) -> TensorField {
        self.lin_comb(1.0, other, 1.0)
    }

    pub fn minus(&self, other: &TensorField) -> TensorField {
        self.lin_comb(1.0, other, -1.0)
    }

    pub fn lin_comb(&self, a: f64, other: &TensorField, b: f64) -> TensorField {
        let comps = self
            .comps
            .iter()
            .zip(&other.comps)
            .map(|(x, y)| x.iter().zip(y).map(|(u, v)| a * u + b * v).collect())
            .collect();
        TensorField {
            grid: self.grid.clone(),
            slots: self.slots.clone(),
            comps,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.comps.iter().flatten().all(|v| v.is_finite())
    }
}

/// Wrapper newtypes give the common tensor kinds a typed API.
macro_rules! tensor_newtype {
    ($name:ident) => {
        #[derive(Clone, Debug, PartialEq)]
        pub struct $name(pub(crate) TensorField);

        impl $name {
            pub fn tensor(&self) -> &TensorField {
                &self.0
            }

            pub fn into_tensor(self) -> TensorField {
                self.0
            }

            pub fn grid(&self) -> &Grid4 {
                self.0.grid()
            }
        }

        impl std::ops::Deref for $name {
            type Target = TensorField;
            fn deref(&self) -> &TensorField {
                &self.0
            }
        }
    };
}

tensor_newtype!(OneForm);
tensor_newtype!(TwoForm);
tensor_newtype!(Metric);

impl OneForm {
    pub fn new(t: TensorField) -> Result<Self> {
        if t.slots() != [Slot::Co] {
            return Err(Error::ShapeMismatch("one-form needs a single lower slot".into()));
        }
        Ok(OneForm(t))
    }

    pub fn from_components(grid: &Grid4, comps: [Vec<f64>; 4]) -> Result<Self> {
        Self::new(TensorField::new(grid, vec![Slot::Co], comps.to_vec())?)
    }

    pub fn zeros(grid: &Grid4) -> Self {
        OneForm(TensorField::zeros(grid, vec![Slot::Co]))
    }

    pub fn from_fn(grid: &Grid4, f: impl Fn(usize) -> [f64; 4]) -> Self {
        OneForm(TensorField::from_vec_fn(grid, Slot::Co, f))
    }

    /// Plain grid average of each component.
    pub fn means(&self) -> [f64; 4] {
        [0, 1, 2, 3].map(|i| self.comp(i).iter().sum::<f64>() / self.grid().len() as f64)
    }

    pub fn flat_l2_norm(&self) -> f64 {
        let s: f64 = self.components().iter().flatten().map(|v| v * v).sum();
        (s * self.grid().cell_volume()).sqrt()
    }
}

impl TwoForm {
    /// Checks antisymmetry to `1e-12` relative to the largest entry.
    pub fn new(t: TensorField) -> Result<Self> {
        if t.slots() != [Slot::Co, Slot::Co] {
            return Err(Error::ShapeMismatch("two-form needs two lower slots".into()));
        }
        let scale = t.max_abs().max(1.0);
        for i in 0..4 {
            for j in 0..4 {
                let a = t.comp(4 * i + j);
                let b = t.comp(4 * j + i);
                if a.iter().zip(b).any(|(x, y)| (x + y).abs() > 1e-12 * scale) {
                    return Err(Error::ShapeMismatch(format!(
                        "two-form component ({i},{j}) is not antisymmetric"
                    )));
                }
            }
        }
        Ok(TwoForm(t))
    }

    pub fn zeros(grid: &Grid4) -> Self {
        TwoForm(TensorField::zeros(grid, vec![Slot::Co, Slot::Co]))
    }

    /// Builds a two-form from its six independent component arrays, ordered as `PAIRS`.
    pub fn from_pair_arrays(grid: &Grid4, pairs: [Vec<f64>; 6]) -> Self {
        let n = grid.len();
        let mut comps = vec![vec![0.0; n]; 16];
        for (k, &(i, j)) in PAIRS.iter().enumerate() {
            comps[4 * j + i] = pairs[k].iter().map(|v| -v).collect();
            comps[4 * i + j] = pairs[k].clone();
        }
        TwoForm(TensorField {
            grid: grid.clone(),
            slots: vec![Slot::Co, Slot::Co],
            comps,
        })
    }

    pub fn from_pairs_fn(grid: &Grid4, f: impl Fn(usize) -> Vec6) -> Self {
        let mut pairs: [Vec<f64>; 6] = std::array::from_fn(|_| vec![0.0; grid.len()]);
        for p in 0..grid.len() {
            let v = f(p);
            for k in 0..6 {
                pairs[k][p] = v[k];
            }
        }
        Self::from_pair_arrays(grid, pairs)
    }

    pub fn constant(grid: &Grid4, v: Vec6) -> Self {
        Self::from_pairs_fn(grid, |_| v)
    }

    pub fn pairs(&self, p: usize) -> Vec6 {
        PAIRS.map(|(i, j)| self.0.comps[4 * i + j][p])
    }

    pub fn pair_array(&self, k: usize) -> &[f64] {
        let (i, j) = PAIRS[k];
        self.comp(4 * i + j)
    }

    pub fn mat(&self, p: usize) -> Mat4 {
        from_pairs(&self.pairs(p))
    }

    pub fn plus(&self, other: &TwoForm) -> TwoForm {
        TwoForm(self.0.plus(&other.0))
    }

    pub fn minus(&self, other: &TwoForm) -> TwoForm {
        TwoForm(self.0.minus(&other.0))
    }

    pub fn scaled(&self, c: f64) -> TwoForm {
        TwoForm(self.0.scaled(c))
    }

    pub fn lin_comb(&self, a: f64, other: &TwoForm, b: f64) -> TwoForm {
        TwoForm(self.0.lin_comb(a, &other.0, b))
    }

    /// `sup_x max_I |alpha_I|`.
    pub fn max_abs(&self) -> f64 {
        self.0.max_abs()
    }

    /// Flat `L^2` norm over the six independent components.
    pub fn flat_l2_norm(&self) -> f64 {
        let s: f64 = (0..6)
            .map(|k| self.pair_array(k).iter().map(|v| v * v).sum::<f64>())
            .sum();
        (s * self.grid().cell_volume()).sqrt()
    }
}

impl Metric {
    /// Checks symmetry to `1e-12` relative to the largest entry.
    pub fn new(t: TensorField) -> Result<Self> {
        if t.slots() != [Slot::Co, Slot::Co] {
            return Err(Error::ShapeMismatch("metric needs two lower slots".into()));
        }
        let asym = (0..4)
            .flat_map(|i| (0..4).map(move |j| (i, j)))
            .map(|(i, j)| {
                t.comp(4 * i + j)
                    .iter()
                    .zip(t.comp(4 * j + i))
                    .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
            })
            .fold(0.0, f64::max);
        if asym > 1e-12 * t.max_abs().max(1.0) {
            return Err(Error::NotCompatible { asymmetry: asym });
        }
        Ok(Metric(t))
    }

    pub fn flat(grid: &Grid4) -> Self {
        Metric(TensorField::from_mat_fn(grid, [Slot::Co, Slot::Co], |_| {
            crate::algebra::IDENTITY
        }))
    }

    pub fn from_mat_fn(grid: &Grid4, f: impl Fn(usize) -> Mat4) -> Self {
        Metric(TensorField::from_mat_fn(grid, [Slot::Co, Slot::Co], f))
    }

    /// `sqrt(det g)` at every point.
    pub fn volume_density(&self) -> ScalarField {
        ScalarField::from_index_fn(self.grid(), |p| crate::algebra::determinant(&self.mat(p)).sqrt())
    }
}

/// Componentwise spectral derivative of any tensor field.
pub fn partial_derivative(t: &TensorField, axis: usize) -> TensorField {
    t.partial(axis)
}

/// `int f * density dx` where `density` is a positive 4-form density relative to `vol_ref`.
pub fn integrate(f: &ScalarField, density: &ScalarField) -> Result<f64> {
    if f.grid() != density.grid() {
        return Err(Error::ShapeMismatch("integrand and density live on different grids".into()));
    }
    if let Some((index, &min)) = density
        .values()
        .iter()
        .enumerate()
        .find(|(_, v)| !(**v > 0.0))
    {
        return Err(Error::NonPositiveDensity { min, index });
    }
    Ok(weighted_sum(f.values(), density.values()) * f.grid().cell_volume())
}

/// `int f dx` for a 4-form given by its density relative to `vol_ref`, no sign check.
pub fn integrate_density(f: &ScalarField) -> f64 {
    f.values().iter().sum::<f64>() * f.grid().cell_volume()
}

fn weighted_sum(a: &[f64], w: &[f64]) -> f64 {
    a.iter().zip(w).map(|(x, y)| x * y).sum()
}

/// Flat Laplacian `sum_k d_k d_k` using the exact second-derivative symbol.
pub fn flat_laplacian(u: &ScalarField) -> ScalarField {
    let sp = u.grid().spectral();
    let mut s = sp.forward_real(&[u.values()]);
    for (p, z) in s[0].iter_mut().enumerate() {
        *z *= -sp.laplace_symbol(p);
    }
    ScalarField::new(u.grid(), sp.inverse_real(&s).pop().unwrap()).unwrap()
}

/// The zero-mean solution of `Delta_flat u = rhs`.
pub fn solve_flat_poisson(rhs: &ScalarField) -> Result<ScalarField> {
    let mean = rhs.mean();
    let tol = 1e-10 * rhs.max_abs().max(1.0);
    if mean.abs() > tol {
        return Err(Error::NonZeroMean { mean, tol });
    }
    let sp = rhs.grid().spectral();
    let mut s = sp.forward_real(&[rhs.values()]);
    for (p, z) in s[0].iter_mut().enumerate() {
        let sym = sp.laplace_symbol(p);
        *z = if sym == 0.0 { Complex64::default() } else { *z / -sym };
    }
    ScalarField::new(rhs.grid(), sp.inverse_real(&s).pop().unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid(n: usize) -> Grid4 {
        Grid4::new([n; 4], [1.0, 2.0, 1.0, 0.5]).unwrap()
    }

    #[test]
    fn derivative_of_trig_mode_is_exact() {
        let g = grid(8);
        let f = ScalarField::from_fn(&g, |x| (2.0 * PI * x[0]).sin() * (2.0 * PI * 3.0 * x[3] / 0.5).cos());
        let d3 = f.partial(3);
        let exact = ScalarField::from_fn(&g, |x| {
            -(2.0 * PI * x[0]).sin() * (6.0 * PI / 0.5) * (6.0 * PI * x[3] / 0.5).sin()
        });
        let err = d3.zip_map(&exact, |a, b| a - b).max_abs();
        assert!(err < 1e-10 * exact.max_abs(), "err {err}");
    }

    #[test]
    fn poisson_round_trip() {
        let g = grid(8);
        let mut r = ScalarField::from_index_fn(&g, |p| ((p * 7919) % 211) as f64 / 211.0 - 0.3);
        let m = r.mean();
        r.values_mut().iter_mut().for_each(|v| *v -= m);
        let u = solve_flat_poisson(&r).unwrap();
        assert!(u.mean().abs() < 1e-14);
        let back = flat_laplacian(&u);
        let err = back.zip_map(&r, |a, b| a - b).max_abs();
        assert!(err < 1e-10 * r.max_abs(), "err {err}");
    }

    #[test]
    fn poisson_rejects_nonzero_mean() {
        let g = grid(4);
        let r = ScalarField::constant(&g, 1.0);
        assert!(matches!(solve_flat_poisson(&r), Err(Error::NonZeroMean { .. })));
    }

    #[test]
    fn integrate_checks_density_sign() {
        let g = grid(4);
        let f = ScalarField::constant(&g, 2.0);
        let mut w = ScalarField::constant(&g, 1.0);
        assert!((integrate(&f, &w).unwrap() - 2.0 * g.total_volume()).abs() < 1e-12);
        w.values_mut()[5] = 0.0;
        assert!(matches!(
            integrate(&f, &w),
            Err(Error::NonPositiveDensity { index: 5, .. })
        ));
    }

    #[test]
    fn two_form_constructor_rejects_symmetric_part() {
        let g = grid(4);
        let t = TensorField::from_mat_fn(&g, [Slot::Co, Slot::Co], |_| crate::algebra::IDENTITY);
        assert!(TwoForm::new(t).is_err());
    }
}
