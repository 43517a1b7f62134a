//! Damped inexact Newton iteration for `Phi(b, s, t) = 0` at fixed `t`.

use crate::error::{Error, Result};
use crate::field::{OneForm, TwoForm};
use crate::geometry::forms::d1;
use crate::geometry::structure::Projectors;
use crate::geometry::system::{flat_newton_rows, split_solution, volume_row, Gauge, MeanSlot, OneFormSystem};
use crate::grid::Grid4;

use super::config::{Formulation, SolverConfig};
use super::problem::{volume_part, Anchor, Problem};

/// L2 norms of the three residual blocks at the returned iterate.
#[derive(Clone, Copy, Debug, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Residuals {
    /// `log(omega'^2/omega~^2) - (t - t_0) F - c_hat`.
    pub volume: f64,
    /// `P omega'`.
    pub selfdual: f64,
    /// Flat divergence of `b`.
    pub gauge: f64,
}

#[derive(Clone, Debug)]
pub struct NewtonOutcome {
    pub b: OneForm,
    /// Coefficients of `chi_1, chi_2` (zero in the fixed-class formulation).
    pub y: [f64; 2],
    pub omega_prime: TwoForm,
    pub c_hat: f64,
    pub iterations: usize,
    /// Combined residual on resolved modes, the quantity compared with `newton_tol`.
    pub residual: f64,
    pub residuals: Residuals,
}

struct Layout {
    n: usize,
    extras: usize,
}

impl Layout {
    fn new(grid: &Grid4, f: Formulation) -> Self {
        Layout {
            n: grid.len(),
            extras: match f {
                Formulation::Drifting => 2,
                Formulation::FixedClass => 0,
            },
        }
    }

    fn len(&self) -> usize {
        4 * self.n + self.extras
    }
}

fn slots(f: Formulation) -> [MeanSlot; 4] {
    match f {
        Formulation::Drifting => [
            MeanSlot::Field(0),
            MeanSlot::Field(3),
            MeanSlot::Extra(0),
            MeanSlot::Extra(1),
        ],
        Formulation::FixedClass => [
            MeanSlot::Field(0),
            MeanSlot::Field(1),
            MeanSlot::Field(2),
            MeanSlot::Field(3),
        ],
    }
}

struct Iterate {
    x: Vec<f64>,
    omega_prime: TwoForm,
    c_hat: f64,
    g: Vec<f64>,
    norm: f64,
    density: Vec<f64>,
    weights: Vec<f64>,
}

struct Newton<'a> {
    problem: &'a Problem,
    anchor: &'a Anchor,
    t: f64,
    config: &'a SolverConfig,
    layout: Layout,
}

impl Newton<'_> {
    fn omega_prime(&self, x: &[f64]) -> TwoForm {
        let grid = self.problem.triple.grid();
        let (b, y) = split_solution(grid, x);
        let mut w = self.anchor.omega.plus(&d1(&b));
        for (c, yc) in self.problem.chi.iter().zip(&y) {
            w = w.lin_comb(1.0, c, *yc);
        }
        w
    }

    fn system(&self, omega_prime: &TwoForm, density: &[f64], weights: Vec<f64>) -> Result<OneFormSystem> {
        let grid = self.problem.triple.grid();
        let rows = (0..self.layout.n)
            .map(|p| {
                let [r1, r2] = self.problem.p_rows[p];
                [volume_row(&omega_prime.pairs(p), density[p]), r1, r2]
            })
            .collect();
        let extras = if self.layout.extras == 2 {
            self.problem.chi.to_vec()
        } else {
            vec![]
        };
        OneFormSystem::new(
            grid,
            rows,
            Gauge::Flat,
            extras,
            slots(self.config.formulation),
            Some(weights),
            flat_newton_rows(),
        )
    }

    /// Residual vector `G(x)`: the two-form rows of `Phi` followed by the gauge and mean slots.
    fn evaluate(&self, x: Vec<f64>, tail_sys: &OneFormSystem) -> Result<Iterate> {
        let n = self.layout.n;
        let omega_prime = self.omega_prime(&x);
        let vp = volume_part(self.problem, self.anchor, &omega_prime, self.t)?;
        let [c1, c2] = self.problem.p_residual(&omega_prime);
        let mut g = tail_sys.tail(&x);
        for p in 0..n {
            g[p] += vp.f[p];
            g[n + p] += c1[p];
            g[2 * n + p] += c2[p];
        }
        let norm = resolved_norm(self.problem.triple.grid(), &g);
        Ok(Iterate {
            x,
            omega_prime,
            c_hat: vp.c_hat,
            g,
            norm,
            density: vp.density,
            weights: vp.weights,
        })
    }
}

/// Flat L2 norm of the four field blocks restricted to resolved modes, plus the extras.
pub(crate) fn resolved_norm(grid: &Grid4, g: &[f64]) -> f64 {
    let n = grid.len();
    let mut blocks: Vec<Vec<f64>> = (0..4).map(|c| g[c * n..(c + 1) * n].to_vec()).collect();
    grid.spectral().filter_unresolved(&mut blocks);
    let fields: f64 = blocks.iter().flatten().map(|v| v * v).sum::<f64>() * grid.cell_volume();
    let extras: f64 = g[4 * n..].iter().map(|v| v * v).sum();
    (fields + extras).sqrt()
}

fn l2(grid: &Grid4, v: &[f64]) -> f64 {
    (v.iter().map(|x| x * x).sum::<f64>() * grid.cell_volume()).sqrt()
}

/// Solves `Phi(b, s, t) = 0` around `anchor`, starting from `initial` (or zero).
pub fn newton_solve(
    problem: &Problem,
    anchor: &Anchor,
    t: f64,
    config: &SolverConfig,
    initial: Option<(&OneForm, [f64; 2])>,
) -> Result<NewtonOutcome> {
    let grid = problem.triple.grid();
    let newton = Newton {
        problem,
        anchor,
        t,
        config,
        layout: Layout::new(grid, config.formulation),
    };
    let n = newton.layout.n;
    let mut x0 = vec![0.0; newton.layout.len()];
    if let Some((b, y)) = initial {
        for c in 0..4 {
            x0[c * n..(c + 1) * n].copy_from_slice(b.comp(c));
        }
        for e in 0..newton.layout.extras {
            x0[4 * n + e] = y[e];
        }
    }
    // the gauge and slot part does not depend on omega', so any assembled system serves
    let probe = volume_part(problem, anchor, &newton.omega_prime(&x0), t)?;
    let mut sys = newton.system(&newton.omega_prime(&x0), &probe.density, probe.weights.clone())?;
    let mut it = newton.evaluate(x0, &sys)?;
    let mut iterations = 0;
    while it.norm >= config.newton_tol {
        if iterations == config.newton_max_iter {
            return Err(Error::NewtonDivergence {
                iterations,
                residual: it.norm,
            });
        }
        iterations += 1;
        sys = newton.system(&it.omega_prime, &it.density, it.weights.clone())?;
        let rhs: Vec<f64> = it.g.iter().map(|v| -v).collect();
        let rel = (0.1 * config.newton_tol / it.norm).clamp(1e-12, config.forcing);
        let mut delta = vec![0.0; rhs.len()];
        let info = sys.solve(&rhs, &mut delta, &config.gmres(rel));
        if !info.converged && info.relative_residual > 0.5 {
            return Err(Error::LinearSolveFailure {
                iterations: info.iterations,
                residual: info.relative_residual,
            });
        }
        let mut lambda = 1.0;
        let mut lost: Option<f64> = None;
        let mut accepted = None;
        for _ in 0..=config.damping.max_backtracks {
            let x: Vec<f64> = it.x.iter().zip(&delta).map(|(a, d)| a + lambda * d).collect();
            match newton.evaluate(x, &sys) {
                Ok(cand) if cand.norm < (1.0 - 1e-4 * lambda) * it.norm => {
                    accepted = Some(cand);
                    break;
                }
                Ok(_) => {}
                Err(Error::LostPositivity { min_ratio }) => lost = Some(min_ratio),
                Err(e) => return Err(e),
            }
            lambda *= config.damping.factor;
        }
        match accepted {
            Some(cand) => it = cand,
            None => {
                return Err(match lost {
                    Some(min_ratio) => Error::LostPositivity { min_ratio },
                    None => Error::NewtonDivergence {
                        iterations,
                        residual: it.norm,
                    },
                })
            }
        }
    }
    let (b, y) = split_solution(grid, &it.x);
    let vp = volume_part(problem, anchor, &it.omega_prime, t)?;
    let pw = Projectors::new(&problem.triple.j).p_form(&it.omega_prime);
    let div: Vec<f64> = it.g[3 * n..4 * n].to_vec();
    let mut y2 = [0.0; 2];
    y2[..y.len()].copy_from_slice(&y);
    Ok(NewtonOutcome {
        b,
        y: y2,
        c_hat: it.c_hat,
        iterations,
        residual: it.norm,
        residuals: Residuals {
            volume: l2(grid, &vp.f),
            selfdual: pw.flat_l2_norm(),
            gauge: l2(grid, &div),
        },
        omega_prime: it.omega_prime,
    })
}
