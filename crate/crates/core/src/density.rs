//! Harmonic-oscillator eigenstate densities in dimensionless coordinates and
//! equal-area world sampling.
//!
//! With `X = sqrt(2 m omega / hbar) x` the ground-state density is the standard
//! normal `phi(X)` and the first excited density is `X^2 phi(X)`; both CDFs have
//! closed forms in terms of `erf`/`erfc`.
//!
//! Interworld forces are third differences of world positions, so sampled
//! positions must be accurate to a few ulp. Inversion works on the odd
//! function `cdf(X) - 1/2` near the centre and on the lower tail elsewhere.

use std::f64::consts::SQRT_2;
use std::fmt;
use std::str::FromStr;

use libm::{erf, erfc};
use serde::{Deserialize, Serialize};

use crate::ensemble::WorldEnsemble;
use crate::error::{Error, Result};
use crate::units::PhysicalParams;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityKind {
    #[serde(alias = "ground")]
    HarmonicGround,
    #[serde(alias = "excited")]
    HarmonicFirstExcited,
}

impl fmt::Display for DensityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DensityKind::HarmonicGround => "ground",
            DensityKind::HarmonicFirstExcited => "excited",
        })
    }
}

impl FromStr for DensityKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ground" | "harmonic_ground" => Ok(DensityKind::HarmonicGround),
            "excited" | "harmonic_first_excited" => Ok(DensityKind::HarmonicFirstExcited),
            other => Err(Error::Domain(format!(
                "unknown density model `{other}` (expected `ground` or `excited`)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityModel {
    pub kind: DensityKind,
    pub params: PhysicalParams,
}

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
const BRACKET: f64 = 40.0;

fn std_normal_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// `int_0^x t^2 phi(t) dt = (1/sqrt(2 pi)) sum_k (-1/2)^k x^(2k+3) / (k! (2k+3))`.
fn excited_series(x: f64) -> f64 {
    let x2 = x * x;
    let mut power = x * x2; // (-1/2)^k x^(2k+3) / k!
    let mut sum = 0.0;
    for k in 0..80 {
        let term = power / (2 * k + 3) as f64;
        sum += term;
        if term.abs() <= 1e-18 * sum.abs() {
            break;
        }
        power *= -0.5 * x2 / (k + 1) as f64;
    }
    INV_SQRT_2PI * sum
}

/// Bisection to a small bracket, then bracket-safeguarded Newton steps until
/// the update stalls at rounding level. `f` must be increasing on `[lo, hi]`.
fn newton_bracketed(f: impl Fn(f64) -> f64, df: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..24 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..100 {
        let r = f(x);
        if r == 0.0 {
            break;
        }
        if r < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - r / df(x);
        let next = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        let stalled = (next - x).abs() <= 2.0 * f64::EPSILON * x.abs().max(f64::MIN_POSITIVE);
        x = next;
        if stalled {
            break;
        }
    }
    x
}

impl DensityModel {
    pub fn new(kind: DensityKind, params: PhysicalParams) -> Self {
        Self { kind, params }
    }

    pub fn ground() -> Self {
        Self::new(DensityKind::HarmonicGround, PhysicalParams::dimensionless())
    }

    pub fn excited() -> Self {
        Self::new(DensityKind::HarmonicFirstExcited, PhysicalParams::dimensionless())
    }

    pub fn density(&self, x: f64) -> f64 {
        match self.kind {
            DensityKind::HarmonicGround => std_normal_pdf(x),
            DensityKind::HarmonicFirstExcited => x * x * std_normal_pdf(x),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x > 0.0 {
            return 1.0 - self.lower_tail(-x);
        }
        self.lower_tail(x)
    }

    /// `cdf(x)` for `x <= 0`, accurate relative to its own (small) value.
    fn lower_tail(&self, x: f64) -> f64 {
        if x == f64::NEG_INFINITY {
            return 0.0;
        }
        match self.kind {
            DensityKind::HarmonicGround => std_normal_cdf(x),
            // d/dX [Phi(X) - X phi(X)] = X^2 phi(X); both terms are >= 0 for X <= 0.
            DensityKind::HarmonicFirstExcited => std_normal_cdf(x) - x * std_normal_pdf(x),
        }
    }

    /// `cdf(x) - 1/2`, an odd function evaluated without cancellation near 0.
    pub fn centred_cdf(&self, x: f64) -> f64 {
        match self.kind {
            DensityKind::HarmonicGround => 0.5 * erf(x / SQRT_2),
            DensityKind::HarmonicFirstExcited if x.abs() <= 2.0 => excited_series(x),
            DensityKind::HarmonicFirstExcited => 0.5 * erf(x / SQRT_2) - x * std_normal_pdf(x),
        }
    }

    /// Position `X` with `cdf(X) = u`, converged to machine precision.
    pub fn inverse_cdf(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::Domain(format!("inverse CDF needs 0 < u < 1, got {u}")));
        }
        Ok(if u < 0.25 {
            self.solve_tail(u)
        } else if u > 0.75 {
            -self.solve_tail(1.0 - u)
        } else {
            // u - 1/2 is exact on [1/4, 3/4].
            self.solve_centred(u - 0.5)
        })
    }

    /// Root of `centred_cdf(X) = v`.
    fn solve_centred(&self, v: f64) -> f64 {
        if v == 0.0 {
            return 0.0;
        }
        let target = v.abs();
        let x = newton_bracketed(|x| self.centred_cdf(x) - target, |x| self.density(x), 0.0, BRACKET);
        x.copysign(v)
    }

    /// Root of `cdf(X) = u` for `u < 1/2`, which lies at `X < 0`.
    fn solve_tail(&self, u: f64) -> f64 {
        newton_bracketed(|x| self.lower_tail(x) - u, |x| self.density(x), -BRACKET, 0.0)
    }

    /// Equal-area sampling: world `n` sits at `cdf^-1((n - 1/2) / N)`.
    ///
    /// Each world is solved through its mirror-image quantile in the lower half
    /// with the offset from the median formed from integers, so the samples are
    /// exactly mirror-symmetric.
    pub fn sample_worlds(&self, n: usize) -> Result<WorldEnsemble> {
        if n == 0 {
            return Err(Error::Domain("need at least one world".into()));
        }
        if self.kind == DensityKind::HarmonicFirstExcited && n % 2 == 1 {
            return Err(Error::Domain(format!(
                "odd world count {n} would place a world on the excited-state node"
            )));
        }
        let positions = (1..=n)
            .map(|k| {
                let lower = k.min(n + 1 - k);
                // cdf = (2 lower - 1) / 2N, i.e. 1/2 - (N + 1 - 2 lower) / 2N.
                let u = (2 * lower - 1) as f64 / (2 * n) as f64;
                let x = if u < 0.25 {
                    self.solve_tail(u)
                } else {
                    -self.solve_centred((n + 1 - 2 * lower) as f64 / (2 * n) as f64)
                };
                if 2 * k > n + 1 { -x } else { x }
            })
            .collect();
        WorldEnsemble::from_positions(positions)
    }

    /// Interworld force a perfect MIW potential exerts on a stationary world at
    /// `x`: for a real eigenstate `Q = E - V`, so the quantum force is `+V'(x)`.
    pub fn bohmian_force(&self, x: f64) -> Result<f64> {
        if self.kind == DensityKind::HarmonicFirstExcited && x == 0.0 {
            return Err(Error::Domain("Bohmian force is undefined at the node x = 0".into()));
        }
        let p = &self.params;
        Ok(p.mass * p.omega * p.omega * x)
    }

    /// Exact eigen-energy `(k + 1/2) hbar omega`.
    pub fn energy(&self) -> f64 {
        let k = match self.kind {
            DensityKind::HarmonicGround => 0.0,
            DensityKind::HarmonicFirstExcited => 1.0,
        };
        (k + 0.5) * self.params.hbar * self.params.omega
    }
}

pub fn density_eval(model: &DensityModel, x: f64) -> f64 {
    model.density(x)
}

pub fn cdf_eval(model: &DensityModel, x: f64) -> f64 {
    model.cdf(x)
}

pub fn inverse_cdf(model: &DensityModel, u: f64) -> Result<f64> {
    model.inverse_cdf(u)
}

pub fn sample_worlds(model: &DensityModel, n: usize) -> Result<WorldEnsemble> {
    model.sample_worlds(n)
}

pub fn bohmian_force_oracle(model: &DensityModel, x: f64) -> Result<f64> {
    model.bohmian_force(x)
}
