//! Laplacians of almost-Kähler and general metrics, and a preconditioned
//! solver for variable-coefficient Poisson problems.

use num_complex::Complex64;

use crate::algebra::wedge6;
use crate::error::{Error, Result};
use crate::field::{Metric, ScalarField, TwoForm};
use crate::grid::Grid4;
use crate::krylov::{gmres, GmresInfo, GmresOptions};

use super::forms::{codifferential1, d1, j_d, square_density};
use super::structure::ACStructure;

/// `Delta_Omega phi = -2 Omega ^ d(J d phi) / Omega^2`.
pub fn laplacian(omega: &TwoForm, j: &ACStructure, phi: &ScalarField) -> Result<ScalarField> {
    let dens = square_density(omega);
    if let Some((index, &min)) = dens.values().iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::NonPositiveDensity { min, index });
    }
    Ok(laplacian_with(omega, &dens, j, phi))
}

fn laplacian_with(omega: &TwoForm, dens: &ScalarField, j: &ACStructure, phi: &ScalarField) -> ScalarField {
    let ddc = d1(&j_d(phi, j));
    ScalarField::from_index_fn(phi.grid(), |p| {
        -2.0 * wedge6(&omega.pairs(p), &ddc.pairs(p)) / dens.values()[p]
    })
}

/// `Delta_g phi = -d*_g d phi`.
pub fn laplacian_metric(g: &Metric, phi: &ScalarField) -> Result<ScalarField> {
    Ok(codifferential1(g, &phi.gradient())?.map(|v| -v))
}

/// Flat inverse Laplacian on resolved modes, identity on constants.
fn flat_preconditioner(grid: &Grid4, r: &[f64]) -> Vec<f64> {
    let sp = grid.spectral();
    let mut s = sp.forward_real(&[r]);
    for (p, z) in s[0].iter_mut().enumerate() {
        if p == 0 {
            continue;
        }
        if !sp.is_resolved(p) {
            *z = Complex64::default();
        } else {
            let k = sp.wavevector(p);
            *z /= -(k[0] * k[0] + k[1] * k[1] + k[2] * k[2] + k[3] * k[3]);
        }
    }
    sp.inverse_real(&s).pop().unwrap()
}

/// Solves `L phi = rhs` for an operator annihilating constants whose range
/// misses the constants; the plain mean of `phi` is fed back into the
/// constant mode so the system is square. Returns the zero-mean solution.
pub fn solve_scalar(
    grid: &Grid4,
    op: impl Fn(&ScalarField) -> ScalarField,
    rhs: &ScalarField,
    opts: &GmresOptions,
) -> Result<(ScalarField, GmresInfo)> {
    let apply = |v: &[f64]| -> Vec<f64> {
        let phi = ScalarField::new(grid, v.to_vec()).expect("shape");
        let mean = phi.mean();
        let mut out = op(&phi).into_values();
        out.iter_mut().for_each(|x| *x += mean);
        flat_preconditioner(grid, &out)
    };
    let prhs = flat_preconditioner(grid, rhs.values());
    let mut x = vec![0.0; grid.len()];
    let info = gmres(apply, &prhs, &mut x, opts).into_result()?;
    let mut phi = ScalarField::new(grid, x)?;
    let m = phi.mean();
    phi.values_mut().iter_mut().for_each(|v| *v -= m);
    Ok((phi, info))
}

/// Zero-mean solution of `Delta_Omega phi = rhs`; `rhs` must have zero
/// `Omega^2`-weighted mean.
pub fn solve_laplacian(
    omega: &TwoForm,
    j: &ACStructure,
    rhs: &ScalarField,
    opts: &GmresOptions,
) -> Result<ScalarField> {
    let dens = square_density(omega);
    if let Some((index, &min)) = dens.values().iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::NonPositiveDensity { min, index });
    }
    let (phi, _) = solve_scalar(omega.grid(), |f| laplacian_with(omega, &dens, j, f), rhs, opts)?;
    Ok(phi)
}

/// Zero-mean solution of `Delta_g psi = rhs`.
pub fn solve_laplacian_metric(g: &Metric, rhs: &ScalarField, opts: &GmresOptions) -> Result<ScalarField> {
    let (psi, _) = solve_scalar(
        g.grid(),
        |f| laplacian_metric(g, f).expect("metric checked by caller"),
        rhs,
        opts,
    )?;
    Ok(psi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::flat_laplacian;
    use crate::geometry::structure::{standard_omega, ACStructure};
    use std::f64::consts::PI;

    #[test]
    fn flat_laplacians_agree_with_spectral_symbol() {
        let g = Grid4::cubic(8).unwrap();
        let phi = ScalarField::from_fn(&g, |x| (2.0 * PI * (x[0] - x[2])).sin() * (2.0 * PI * x[3]).cos());
        let flat = flat_laplacian(&phi);
        let ak = laplacian(&standard_omega(&g), &ACStructure::standard(&g), &phi).unwrap();
        let met = laplacian_metric(&Metric::flat(&g), &phi).unwrap();
        assert!(ak.zip_map(&flat, |a, b| a - b).max_abs() < 1e-9);
        assert!(met.zip_map(&flat, |a, b| a - b).max_abs() < 1e-9);
    }
}
