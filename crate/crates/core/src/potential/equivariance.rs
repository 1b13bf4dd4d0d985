//! Equivariance potential: a cubic density `P_n` fitted to the five worlds
//! `x_{n-2} .. x_{n+2}` so that each of the four intervals carries mass `1/N`,
//! giving `U = (hbar^2/8m) sum_n (P_n'(x_n) / P_n(x_n))^2`.
//!
//! The cubic is solved in coordinates centred on `x_n`, where `P_n(x_n)` and
//! `P_n'(x_n)` are simply the first two coefficients. The force uses the
//! linear-solve derivative `d(beta)/dxi = -K^{-1} (dK/dxi) beta` contracted with
//! an adjoint vector, so each local term costs two 4x4 factorisations.

use nalgebra::{Matrix4, Vector4};

use super::{check_gaps, EdgePolicy};
use crate::ensemble::WorldEnsemble;
use crate::error::{Error, Result};
use crate::units::PhysicalParams;

const WIDTH: usize = 5;

/// Cubic density coefficients `P(x) = a + b x + c x^2 + d x^3` for one world.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EquivarianceCoefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    centre: f64,
    /// Coefficients of the same cubic in powers of `x - centre`.
    centred: [f64; 4],
}

impl EquivarianceCoefficients {
    pub fn density(&self, x: f64) -> f64 {
        let t = x - self.centre;
        let [a, b, c, d] = self.centred;
        a + t * (b + t * (c + t * d))
    }

    /// `int_lo^hi P(x) dx`.
    pub fn mass(&self, lo: f64, hi: f64) -> f64 {
        let prim = |x: f64| {
            let t = x - self.centre;
            let [a, b, c, d] = self.centred;
            t * (a + t * (b / 2.0 + t * (c / 3.0 + t * d / 4.0)))
        };
        prim(hi) - prim(lo)
    }
}

/// Interval-mass matrix `K_{ij} = (t_{i+1}^{j+1} - t_i^{j+1}) / (j+1)` for
/// centred positions `t`.
fn mass_matrix(t: &[f64; WIDTH]) -> Matrix4<f64> {
    Matrix4::from_fn(|i, j| {
        let p = j as i32 + 1;
        (t[i + 1].powi(p) - t[i].powi(p)) / p as f64
    })
}

fn solve_centred(t: &[f64; WIDTH], mass: f64) -> Option<(Matrix4<f64>, Vector4<f64>)> {
    let k = mass_matrix(t);
    let beta = k.lu().solve(&Vector4::repeat(mass))?;
    beta.iter().all(|v| v.is_finite()).then_some((k, beta))
}

/// Solves the equal-area system for world `n` (1-based, `3 <= n <= N-2`).
pub fn equivariance_coefficients(e: &WorldEnsemble, n: usize, n_worlds: usize) -> Result<EquivarianceCoefficients> {
    let len = e.len();
    if n < 3 || n + 2 > len {
        return Err(Error::Domain(format!("world {n} has no five-world neighbourhood in {len} worlds")));
    }
    if n_worlds == 0 {
        return Err(Error::Domain("world count must be positive".into()));
    }
    check_gaps(&e.positions)?;
    let centre = e.positions[n - 1];
    let t: [f64; WIDTH] = std::array::from_fn(|i| e.positions[n - 3 + i] - centre);
    let (_, beta) = solve_centred(&t, 1.0 / n_worlds as f64)
        .ok_or_else(|| Error::SingularSystem(format!("equal-area matrix at world {n}")))?;
    let [a0, b0, c0, d0] = [beta[0], beta[1], beta[2], beta[3]];
    // Re-expand a0 + b0 (x-s) + c0 (x-s)^2 + d0 (x-s)^3 in powers of x.
    let s = centre;
    Ok(EquivarianceCoefficients {
        a: a0 - b0 * s + c0 * s * s - d0 * s * s * s,
        b: b0 - 2.0 * c0 * s + 3.0 * d0 * s * s,
        c: c0 - 3.0 * d0 * s,
        d: d0,
        centre,
        centred: [a0, b0, c0, d0],
    })
}

#[derive(Clone, Debug)]
pub struct Equivariance {
    edge_policy: EdgePolicy,
}

impl Equivariance {
    pub fn new(edge_policy: EdgePolicy) -> Self {
        Self { edge_policy }
    }

    /// First world (0-based) of the neighbourhood used for world `n`, and the
    /// position of `n` inside it; `None` if the term is skipped.
    fn neighbourhood(&self, n: usize, len: usize) -> Option<(usize, usize)> {
        if n >= 2 && n + 2 < len {
            return Some((n - 2, 2));
        }
        match self.edge_policy {
            EdgePolicy::SkipBoundaryTerms => None,
            EdgePolicy::OneSidedStencil => {
                let start = n.saturating_sub(2).min(len - WIDTH);
                Some((start, n - start))
            }
        }
    }

    fn check_len(len: usize) -> Result<()> {
        if len < WIDTH {
            return Err(Error::TooFewWorlds { needed: WIDTH, got: len });
        }
        Ok(())
    }

    pub(crate) fn energy(&self, positions: &[f64], params: &PhysicalParams) -> Result<f64> {
        let len = positions.len();
        Self::check_len(len)?;
        check_gaps(positions)?;
        let k = params.quantum_prefactor();
        let mut total = 0.0;
        for n in 0..len {
            let Some((start, at)) = self.neighbourhood(n, len) else { continue };
            let term = LocalFit::new(positions, start, at, n)?;
            total += k * term.ratio * term.ratio;
        }
        Ok(total)
    }

    pub(crate) fn forces_into(&self, positions: &[f64], params: &PhysicalParams, out: &mut [f64]) -> Result<()> {
        let len = positions.len();
        Self::check_len(len)?;
        check_gaps(positions)?;
        let k = params.quantum_prefactor();
        for n in 0..len {
            let Some((start, at)) = self.neighbourhood(n, len) else { continue };
            let fit = LocalFit::new(positions, start, at, n)?;
            let grad = fit.gradient(k)?;
            // t_i = x_{start+i} - x_n: world n enters every t_i with weight -1.
            let mut centre = 0.0;
            for (i, g) in grad.iter().enumerate() {
                if i != at {
                    out[start + i] -= g;
                    centre += g;
                }
            }
            out[n] += centre;
        }
        Ok(())
    }
}

struct LocalFit {
    t: [f64; WIDTH],
    k: Matrix4<f64>,
    beta: Vector4<f64>,
    ratio: f64,
}

impl LocalFit {
    fn new(xs: &[f64], start: usize, at: usize, n: usize) -> Result<Self> {
        let centre = xs[start + at];
        let t: [f64; WIDTH] = std::array::from_fn(|i| xs[start + i] - centre);
        // The log-derivative does not depend on the common mass, so use 1.
        let (k, beta) = solve_centred(&t, 1.0)
            .ok_or_else(|| Error::SingularSystem(format!("equal-area matrix at world {}", n + 1)))?;
        if !(beta[0] > 0.0) {
            return Err(Error::NonPositiveDensity { world: n + 1, value: beta[0] });
        }
        Ok(Self { t, k, ratio: beta[1] / beta[0], beta })
    }

    /// `dU_n/dt_i` for `U_n = k (b/a)^2`.
    fn gradient(&self, k: f64) -> Result<[f64; WIDTH]> {
        let (a, b) = (self.beta[0], self.beta[1]);
        let scale = 2.0 * k * self.ratio;
        let w = Vector4::new(-scale * b / (a * a), scale / a, 0.0, 0.0);
        // lambda = K^{-T} w, then dU/dt_i = -lambda^T (dK/dt_i) beta.
        let lambda = self
            .k
            .transpose()
            .lu()
            .solve(&w)
            .ok_or_else(|| Error::SingularSystem("transposed equal-area matrix".into()))?;
        let poly = |x: f64| self.beta[0] + x * (self.beta[1] + x * (self.beta[2] + x * self.beta[3]));
        // Row i of K has t_{i+1} as upper and t_i as lower limit, so
        // (dK/dt_i) beta = P(t_i) (e_{i-1} - e_i).
        Ok(std::array::from_fn(|i| {
            let upper = if i >= 1 { lambda[i - 1] } else { 0.0 };
            let lower = if i < 4 { lambda[i] } else { 0.0 };
            -poly(self.t[i]) * (upper - lower)
        }))
    }
}

pub fn equivariance_potential(e: &WorldEnsemble, params: &PhysicalParams) -> Result<f64> {
    Equivariance::new(EdgePolicy::SkipBoundaryTerms).energy(&e.positions, params)
}

pub fn equivariance_force(e: &WorldEnsemble, params: &PhysicalParams) -> Result<Vec<f64>> {
    let mut out = vec![0.0; e.len()];
    Equivariance::new(EdgePolicy::SkipBoundaryTerms).forces_into(&e.positions, params, &mut out)?;
    Ok(out)
}
